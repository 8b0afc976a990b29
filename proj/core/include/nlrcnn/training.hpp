#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlrcnn/config.hpp"
#include "nlrcnn/nlr.hpp"
#include "nlrcnn/random.hpp"
#include "nlrcnn/tensor.hpp"
#include "nlrcnn/trace.hpp"

namespace nlrcnn {

// 1/2 sum (x - z)^2 + l2/2 * (sum of squares of every parameter).
// Throws NumericError naming the entry if a prediction is not finite.
double nlr_loss(const NlrModel& model, std::span<const Entry> entries, double l2 = 0.0);

// Reverse-mode gradient of the residual term over `entries` plus
// reg_weight * l2 * parameters; reg_weight = 1 gives the gradient of nlr_loss.
// Max-pool routes to the first maximal cell; ReLU passes iff preactivation > 0.
NlrModel nlr_backward(const NlrModel& model, std::span<const Entry> entries, double l2 = 0.0,
                      double reg_weight = 1.0);

double nlr_rmse(const NlrModel& model, std::span<const Entry> entries);

// Factors uniform (0, 0.1], identity-tap encoder, Glorot-uniform kernels,
// zero biases.
NlrModel init_nlr(const Dims& dims, const TrainConfig& config, Rng& rng);

// Every weight and bias zero: predicts 0.5 everywhere.
NlrModel zero_nlr(const Dims& dims, const TrainConfig& config);

struct NlrResult {
  NlrModel model;
  TrainTrace trace;
};

// Minibatch training early-stopped on validation RMSE; returns the parameters
// of the best validation epoch. Throws DivergenceError carrying the trace.
NlrResult train_nlr(std::span<const Entry> train, std::span<const Entry> validation, const Dims& dims,
                    const TrainConfig& config);
NlrResult train_nlr(NlrModel initial, std::span<const Entry> train, std::span<const Entry> validation,
                    const TrainConfig& config, const EpochObserver<NlrModel>& on_epoch = {});

struct GradcheckOptions {
  std::size_t rank = kMinimumRank;
  std::size_t window = 2;
  std::size_t conv3_channels = 2;
  std::size_t conv2_channels = 2;
  std::size_t conv1_channels = 2;
  Dims dims{3, 3, 4};
  std::size_t entries = 5;
  double l2 = 1e-2;
  double step = 1e-5;
  double threshold = 1e-4;
  std::uint64_t seed = 0;
  // Layer or group name whose analytic gradient is deliberately transposed
  // before comparison (fault-injection hook).
  std::optional<std::string> corrupt;
};

struct GradcheckGroup {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  bool passed = true;

  double max_relative_error() const;
  // Layer names (the part before '.') of failing groups, first-seen order.
  std::vector<std::string> failed_layers() const;
};

// Central differences against nlr_backward on a random instance. Throws
// ConfigError if the instance has more than 2000 parameters.
GradcheckReport gradcheck(const GradcheckOptions& options);

// Same comparison for the CP loss gradient.
GradcheckReport cp_gradcheck(const Dims& dims, std::size_t rank, std::size_t entries, double l2,
                             std::uint64_t seed, double step = 1e-5, double threshold = 1e-4);

// Relative error |a - n| / max(|a|, |n|); 0 when both are exactly zero.
double relative_error(double analytic, double numeric);

}  // namespace nlrcnn
