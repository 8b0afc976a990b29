#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace nlrcnn::cli {

enum ExitCode : int { kSuccess = 0, kFailure = 1, kUsage = 2 };

// Runs one command line (without the program name) and returns the exit code.
// Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// `key = value` lines of a train config file as `--key=value` arguments.
// Blank lines and lines starting with '#' are skipped.
std::vector<std::string> config_arguments(const std::filesystem::path& path);

}  // namespace nlrcnn::cli
