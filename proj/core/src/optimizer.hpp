#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nlrcnn/config.hpp"
#include "nlrcnn/cp.hpp"

namespace nlrcnn::detail {

// Plain gradient descent or Adam (beta1 0.9, beta2 0.999, eps 1e-8) over a
// fixed list of parameter groups.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

  void step(const std::vector<ParamGroup>& params, const std::vector<ConstParamGroup>& grads) {
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t g = 0; g < params.size(); ++g) {
        auto p = params[g].values;
        auto d = grads[g].values;
        for (std::size_t n = 0; n < p.size(); ++n) p[n] -= lr_ * d[n];
      }
      return;
    }
    if (first_.empty()) {
      for (const auto& group : params) {
        first_.emplace_back(group.values.size(), 0.0);
        second_.emplace_back(group.values.size(), 0.0);
      }
    }
    ++steps_;
    const double correction1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
    for (std::size_t g = 0; g < params.size(); ++g) {
      auto p = params[g].values;
      auto d = grads[g].values;
      auto& m = first_[g];
      auto& v = second_[g];
      for (std::size_t n = 0; n < p.size(); ++n) {
        m[n] = kBeta1 * m[n] + (1.0 - kBeta1) * d[n];
        v[n] = kBeta2 * v[n] + (1.0 - kBeta2) * d[n] * d[n];
        const double m_hat = m[n] / correction1;
        const double v_hat = v[n] / correction2;
        p[n] -= lr_ * m_hat / (std::sqrt(v_hat) + kEpsilon);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  OptimizerKind kind_;
  double lr_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace nlrcnn::detail
