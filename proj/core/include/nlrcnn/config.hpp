#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "nlrcnn/tensor.hpp"

namespace nlrcnn {

enum class ModelKind : std::uint8_t { cp = 0, nlr_cnn = 1 };
enum class OptimizerKind : std::uint8_t { adam = 0, sgd = 1 };

std::string_view to_string(ModelKind kind);
std::string_view to_string(OptimizerKind kind);
ModelKind parse_model_kind(std::string_view text);
OptimizerKind parse_optimizer_kind(std::string_view text);

// Hyperparameters shared by both models. The defaults depend on the model,
// so start from defaults_for().
struct TrainConfig {
  ModelKind model = ModelKind::nlr_cnn;
  std::size_t rank = 10;
  std::size_t window = 3;
  std::size_t conv3_channels = 16;
  std::size_t conv2_channels = 8;
  std::size_t conv1_channels = 4;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 1000;
  double tolerance = 1e-5;
  std::size_t batch_size = 128;
  double l2 = 0.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  bool nonnegative = false;
  std::uint64_t seed = 0;
  SplitSpec split;

  static TrainConfig defaults_for(ModelKind kind);

  // Throws ConfigError describing the first invalid field.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace nlrcnn
