#include "nlrcnn/config.hpp"

#include <cmath>

#include "nlrcnn/error.hpp"
#include "nlrcnn/nlr.hpp"

namespace nlrcnn {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::cp:
      return "cp";
    case ModelKind::nlr_cnn:
      return "nlr-cnn";
  }
  return "?";
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::adam:
      return "adam";
    case OptimizerKind::sgd:
      return "sgd";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "cp") return ModelKind::cp;
  if (text == "nlr-cnn") return ModelKind::nlr_cnn;
  throw ConfigError("unknown model '" + std::string(text) + "' (expected cp or nlr-cnn)");
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected adam or sgd)");
}

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
  TrainConfig config;
  config.model = kind;
  if (kind == ModelKind::cp) {
    config.learning_rate = 1e-2;
    config.l2 = 0.02;
    config.optimizer = OptimizerKind::sgd;
  }
  return config;
}

void TrainConfig::validate() const {
  if (rank < 1) throw ConfigError("rank must be >= 1");
  if (model == ModelKind::nlr_cnn && rank < kMinimumRank) {
    throw ConfigError("rank must be >= " + std::to_string(kMinimumRank) + " for nlr-cnn");
  }
  if (window < 1) throw ConfigError("window must be >= 1");
  if (conv3_channels < 1 || conv2_channels < 1 || conv1_channels < 1) {
    throw ConfigError("channel widths must be >= 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (max_epochs < 1) throw ConfigError("epoch cap must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 weight must be >= 0");
  for (const double r : {split.train, split.validation, split.test}) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must all be positive");
  }
}

}  // namespace nlrcnn
