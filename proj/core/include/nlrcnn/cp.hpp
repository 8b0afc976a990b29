#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nlrcnn/config.hpp"
#include "nlrcnn/matrix.hpp"
#include "nlrcnn/random.hpp"
#include "nlrcnn/tensor.hpp"
#include "nlrcnn/trace.hpp"

namespace nlrcnn {

// A named view over one parameter tensor, used by optimizers and gradcheck.
struct ParamGroup {
  std::string name;
  std::span<double> values;
};

struct ConstParamGroup {
  std::string name;
  std::span<const double> values;
};

// Rank-R CP factors: one row per station, parameter, and time slot.
struct FactorModel {
  Matrix stations;
  Matrix parameters;
  Matrix times;

  std::size_t rank() const { return stations.cols(); }
  Dims dims() const { return {stations.rows(), parameters.rows(), times.rows()}; }

  static FactorModel zeros(const Dims& dims, std::size_t rank);
  // Entries uniform on (0, scale].
  static FactorModel random(const Dims& dims, std::size_t rank, Rng& rng, double scale = 0.1);

  // Throws ConfigError/NumericError if the shapes disagree or a value is not finite.
  void validate() const;

  std::vector<ParamGroup> groups();
  std::vector<ConstParamGroup> groups() const;

  bool operator==(const FactorModel&) const = default;
};

double cpd_predict(const FactorModel& model, std::size_t i, std::size_t j, std::size_t k);

// 1/2 sum (x - z)^2 + l2/2 (|S|^2 + |U|^2 + |V|^2).
double cp_loss(const FactorModel& model, std::span<const Entry> entries, double l2 = 0.0);

// Gradient of the residual term over `entries` plus reg_weight * l2 * factors.
// reg_weight = 1 gives the gradient of cp_loss.
FactorModel cp_gradient(const FactorModel& model, std::span<const Entry> entries, double l2 = 0.0,
                        double reg_weight = 1.0);

double cp_rmse(const FactorModel& model, std::span<const Entry> entries);

// Called with the current (not best) parameters after every completed epoch.
template <typename Model>
using EpochObserver = std::function<void(std::size_t epoch, const Model& model)>;

struct CpResult {
  FactorModel model;
  TrainTrace trace;
};

// Minibatch gradient descent on cp_loss over `train`, early-stopped on the
// validation RMSE. Returns the factors from the best validation epoch.
CpResult cp_train(std::span<const Entry> train, std::span<const Entry> validation, const Dims& dims,
                  const TrainConfig& config);

// Same loop from caller-supplied initial factors.
CpResult cp_train(FactorModel initial, std::span<const Entry> train, std::span<const Entry> validation,
                  const TrainConfig& config, const EpochObserver<FactorModel>& on_epoch = {});

}  // namespace nlrcnn
