#pragma once

#include <cstddef>
#include <cstdint>

#include "nlrcnn/cp.hpp"
#include "nlrcnn/matrix.hpp"
#include "nlrcnn/tensor.hpp"

namespace nlrcnn {

struct SynthSpec {
  Dims dims{20, 10, 30};
  std::size_t rank = 3;
  double noise = 0.0;  // Gaussian standard deviation added to observed values
  bool nonlinear = false;
  double observed_fraction = 0.3;
  std::uint64_t seed = 0;
};

// Noise-free value of every cell.
//   linear:    x = sum_r s_ir u_jr v_kr
//   nonlinear: x = sigmoid(alpha * sum_r s_ir u_jr w_kr + beta), where w is V
//              smoothed causally with taps (0.5, 0.3, 0.2) renormalised at the
//              start of the series, alpha = 24 / rank, beta = -3.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(FactorModel factors, bool nonlinear);

  double operator()(std::size_t i, std::size_t j, std::size_t k) const;

  const FactorModel& factors() const { return factors_; }
  const Matrix& smoothed_times() const { return smoothed_; }
  bool nonlinear() const { return nonlinear_; }

  static constexpr double kTaps[3] = {0.5, 0.3, 0.2};

 private:
  FactorModel factors_;
  Matrix smoothed_;
  bool nonlinear_ = false;
};

struct SynthData {
  SparseTensor tensor;
  GroundTruth truth;
};

// Factors uniform on [0, 1); the observed mask has round(fraction * volume)
// cells drawn uniformly without replacement. Throws ConfigError if the
// fraction is outside (0, 1].
SynthData synth_generate(const SynthSpec& spec);

}  // namespace nlrcnn
