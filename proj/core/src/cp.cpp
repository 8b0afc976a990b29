#include "nlrcnn/cp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "loop.hpp"
#include "nlrcnn/error.hpp"

namespace nlrcnn {

namespace {

void check_index(const FactorModel& model, std::size_t i, std::size_t j, std::size_t k) {
  if (!model.dims().contains(i, j, k)) {
    throw std::out_of_range("index (" + std::to_string(i) + "," + std::to_string(j) + "," +
                            std::to_string(k) + ") outside factor dims");
  }
}

double squared_norm(std::span<const double> values) {
  double sum = 0.0;
  for (const double v : values) sum += v * v;
  return sum;
}

}  // namespace

FactorModel FactorModel::zeros(const Dims& dims, std::size_t rank) {
  return {Matrix(dims.stations, rank), Matrix(dims.parameters, rank), Matrix(dims.times, rank)};
}

FactorModel FactorModel::random(const Dims& dims, std::size_t rank, Rng& rng, double scale) {
  FactorModel model = zeros(dims, rank);
  for (auto& group : model.groups()) {
    for (double& v : group.values) v = rng.uniform_positive(scale);
  }
  return model;
}

void FactorModel::validate() const {
  if (rank() < 1) throw ConfigError("factor rank must be >= 1");
  if (parameters.cols() != rank() || times.cols() != rank()) {
    throw ConfigError("factor matrices disagree on rank");
  }
  for (const auto& group : groups()) {
    for (const double v : group.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite value in factor " + group.name);
    }
  }
}

std::vector<ParamGroup> FactorModel::groups() {
  return {{"S", stations.values()}, {"U", parameters.values()}, {"V", times.values()}};
}

std::vector<ConstParamGroup> FactorModel::groups() const {
  return {{"S", stations.values()}, {"U", parameters.values()}, {"V", times.values()}};
}

double cpd_predict(const FactorModel& model, std::size_t i, std::size_t j, std::size_t k) {
  check_index(model, i, j, k);
  const auto s = model.stations.row(i);
  const auto u = model.parameters.row(j);
  const auto v = model.times.row(k);
  double sum = 0.0;
  for (std::size_t r = 0; r < s.size(); ++r) sum += s[r] * u[r] * v[r];
  return sum;
}

double cp_loss(const FactorModel& model, std::span<const Entry> entries, double l2) {
  double loss = 0.0;
  for (const Entry& e : entries) {
    const double residual = e.value - cpd_predict(model, e.i, e.j, e.k);
    loss += 0.5 * residual * residual;
  }
  if (l2 > 0.0) {
    double norm = 0.0;
    for (const auto& group : model.groups()) norm += squared_norm(group.values);
    loss += 0.5 * l2 * norm;
  }
  return loss;
}

FactorModel cp_gradient(const FactorModel& model, std::span<const Entry> entries, double l2,
                        double reg_weight) {
  FactorModel grad = FactorModel::zeros(model.dims(), model.rank());
  const std::size_t rank = model.rank();
  for (const Entry& e : entries) {
    // d/dz of 1/2 (x - z)^2
    const double dz = cpd_predict(model, e.i, e.j, e.k) - e.value;
    const auto s = model.stations.row(e.i);
    const auto u = model.parameters.row(e.j);
    const auto v = model.times.row(e.k);
    auto gs = grad.stations.row(e.i);
    auto gu = grad.parameters.row(e.j);
    auto gv = grad.times.row(e.k);
    for (std::size_t r = 0; r < rank; ++r) {
      gs[r] += dz * u[r] * v[r];
      gu[r] += dz * s[r] * v[r];
      gv[r] += dz * s[r] * u[r];
    }
  }
  const double weight = l2 * reg_weight;
  if (weight > 0.0) {
    auto params = model.groups();
    auto grads = grad.groups();
    for (std::size_t g = 0; g < params.size(); ++g) {
      for (std::size_t n = 0; n < params[g].values.size(); ++n) {
        grads[g].values[n] += weight * params[g].values[n];
      }
    }
  }
  return grad;
}

double cp_rmse(const FactorModel& model, std::span<const Entry> entries) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const Entry& e : entries) {
    const double residual = e.value - cpd_predict(model, e.i, e.j, e.k);
    sum += residual * residual;
  }
  return std::sqrt(sum / static_cast<double>(entries.size()));
}

CpResult cp_train(std::span<const Entry> train, std::span<const Entry> validation, const Dims& dims,
                  const TrainConfig& config) {
  TrainConfig checked = config;
  checked.model = ModelKind::cp;
  checked.validate();
  Rng rng(config.seed);
  FactorModel initial = FactorModel::random(dims, config.rank, rng);
  return cp_train(std::move(initial), train, validation, config);
}

CpResult cp_train(FactorModel initial, std::span<const Entry> train, std::span<const Entry> validation,
                  const TrainConfig& config, const EpochObserver<FactorModel>& on_epoch) {
  initial.validate();
  // Shuffling stream distinct from initialisation.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  struct Hooks {
    const TrainConfig& config;
    const EpochObserver<FactorModel>& on_epoch;
    void observe(std::size_t epoch, const FactorModel& m) const {
      if (on_epoch) on_epoch(epoch, m);
    }
    double loss(const FactorModel& m, std::span<const Entry> entries) const {
      return cp_loss(m, entries, config.l2);
    }
    double rmse(const FactorModel& m, std::span<const Entry> entries) const { return cp_rmse(m, entries); }
    FactorModel gradient(const FactorModel& m, std::span<const Entry> batch, double reg_weight) const {
      return cp_gradient(m, batch, config.l2, reg_weight);
    }
    void project(FactorModel& m) const {
      if (!config.nonnegative) return;
      for (auto& group : m.groups()) {
        for (double& v : group.values) v = std::max(v, 0.0);
      }
    }
  };
  auto [model, trace] = detail::run_epochs(std::move(initial), train, validation, config, rng, Hooks{config, on_epoch});
  return {std::move(model), std::move(trace)};
}

}  // namespace nlrcnn
