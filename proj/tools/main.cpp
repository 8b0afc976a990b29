#include <iostream>
#include <string>
#include <vector>

#include "nlrcnn/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return nlrcnn::cli::run(args, std::cout, std::cerr);
}
