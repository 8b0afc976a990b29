#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "nlrcnn/config.hpp"
#include "nlrcnn/error.hpp"
#include "nlrcnn/random.hpp"
#include "nlrcnn/tensor.hpp"
#include "nlrcnn/trace.hpp"
#include "optimizer.hpp"

namespace nlrcnn::detail {

// Epoch loop shared by both models. `hooks` provides
//   double loss(const Model&, span<const Entry>)
//   double rmse(const Model&, span<const Entry>)
//   Model gradient(const Model&, span<const Entry> batch, double reg_weight)
//   void project(Model&)
//   void observe(std::size_t epoch, const Model&)  called after each epoch
// A minibatch gradient carries |batch|/|train| of the regulariser so that one
// epoch of minibatch gradients sums to the full-objective gradient.
template <typename Model, typename Hooks>
std::pair<Model, TrainTrace> run_epochs(Model model, std::span<const Entry> train,
                                        std::span<const Entry> validation, const TrainConfig& config,
                                        Rng& rng, const Hooks& hooks) {
  if (train.empty()) throw ConfigError("training set is empty");
  if (validation.empty()) throw ConfigError("validation set is empty");

  TrainTrace trace;
  trace.initial_loss = hooks.loss(model, train);
  trace.initial_val_rmse = hooks.rmse(model, validation);
  trace.best_val_rmse = trace.initial_val_rmse;

  Model best = model;
  double previous = trace.initial_val_rmse;
  Optimizer optimizer(config.optimizer, config.learning_rate);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Entry> batch;
  batch.reserve(config.batch_size);
  const double total = static_cast<double>(train.size());

  const auto diverged = [&](std::size_t epoch, const std::string& detail) {
    trace.stop = StopReason::divergence;
    std::ostringstream msg;
    msg << "training diverged at epoch " << epoch << " (learning rate " << config.learning_rate << ")";
    if (!detail.empty()) msg << ": " << detail;
    return DivergenceError(msg.str(), trace);
  };

  trace.stop = StopReason::cap;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss = 0.0;
    double val = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t stop = std::min(order.size(), start + config.batch_size);
        batch.clear();
        for (std::size_t n = start; n < stop; ++n) batch.push_back(train[order[n]]);
        const Model grad = hooks.gradient(model, batch, static_cast<double>(batch.size()) / total);
        optimizer.step(model.groups(), grad.groups());
        hooks.project(model);
      }
      loss = hooks.loss(model, train);
      val = hooks.rmse(model, validation);
    } catch (const NumericError& e) {
      throw diverged(epoch, e.what());
    }
    if (!std::isfinite(loss) || !std::isfinite(val)) throw diverged(epoch, "non-finite loss");

    trace.train_loss.push_back(loss);
    trace.val_rmse.push_back(val);
    hooks.observe(epoch, model);
    if (val < trace.best_val_rmse) {
      trace.best_val_rmse = val;
      trace.best_epoch = epoch;
      best = model;
    }
    if (std::abs(val - previous) < config.tolerance) {
      trace.stop = StopReason::tolerance;
      break;
    }
    previous = val;
  }
  return {std::move(best), std::move(trace)};
}

}  // namespace nlrcnn::detail
