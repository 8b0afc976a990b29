#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlrcnn/cp.hpp"
#include "nlrcnn/matrix.hpp"
#include "nlrcnn/random.hpp"

namespace nlrcnn {

// Spatial side length after each stage of the interaction CNN, all
// convolutions valid: conv3 (3x3) -> 2x2/2 max-pool -> conv2 (3x3) -> conv1 (2x2).
struct SpatialChain {
  std::size_t input = 0;
  std::size_t conv3 = 0;
  std::size_t pool = 0;
  std::size_t conv2 = 0;
  std::size_t conv1 = 0;

  constexpr bool valid() const { return conv1 >= 1; }
  bool operator==(const SpatialChain&) const = default;
};

// Arithmetic only; stages that would be empty are reported as 0.
constexpr SpatialChain spatial_chain(std::size_t rank) {
  SpatialChain c;
  c.input = rank;
  c.conv3 = rank >= 3 ? rank - 2 : 0;
  c.pool = c.conv3 / 2;
  c.conv2 = c.pool >= 3 ? c.pool - 2 : 0;
  c.conv1 = c.conv2 >= 2 ? c.conv2 - 1 : 0;
  return c;
}

constexpr std::size_t minimum_rank() {
  std::size_t r = 1;
  while (!spatial_chain(r).valid()) ++r;
  return r;
}

inline constexpr std::size_t kMinimumRank = minimum_rank();
static_assert(kMinimumRank == 10);

// Depthwise causal convolution over the time factors:
//   out_r = ReLU(sum_tau weights(r, tau) * V(k - window + 1 + tau, r) + bias_r)
// with rows before time 0 treated as zero.
struct TemporalEncoder {
  Matrix weights;  // rank x window; the last column taps the current slot
  std::vector<double> bias;

  std::size_t rank() const { return weights.rows(); }
  std::size_t window() const { return weights.cols(); }

  // Last tap 1, everything else 0.
  static TemporalEncoder identity(std::size_t rank, std::size_t window);

  bool operator==(const TemporalEncoder&) const = default;
};

// Square valid 2D convolution, weights laid out [out][in][row][col].
struct Conv2d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static Conv2d zeros(std::size_t in, std::size_t out, std::size_t kernel);

  double& weight(std::size_t o, std::size_t i, std::size_t p, std::size_t q) {
    return weights[((o * in_channels + i) * kernel + p) * kernel + q];
  }
  double weight(std::size_t o, std::size_t i, std::size_t p, std::size_t q) const {
    return weights[((o * in_channels + i) * kernel + p) * kernel + q];
  }

  bool operator==(const Conv2d&) const = default;
};

// Scores an R x R x R interaction tensor: the third mode becomes the channel
// axis of an R x R map, then conv3 -> pool -> conv2 -> conv1 (ReLU after each
// convolution), a per-channel global average, an affine head, and a sigmoid.
struct InteractionCNN {
  Conv2d conv3;
  Conv2d conv2;
  Conv2d conv1;
  std::vector<double> head_weights;
  double head_bias = 0.0;

  std::size_t rank() const { return conv3.in_channels; }

  // Throws ConfigError if rank is below kMinimumRank.
  static InteractionCNN zeros(std::size_t rank, std::size_t conv3_channels, std::size_t conv2_channels,
                              std::size_t conv1_channels);

  void validate() const;

  bool operator==(const InteractionCNN&) const = default;
};

// Dense n x n x n tensor, index (a, b, c) row-major.
class Cube {
 public:
  Cube() = default;
  explicit Cube(std::size_t n, double fill = 0.0) : n_(n), data_(n * n * n, fill) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t a, std::size_t b, std::size_t c) { return data_[(a * n_ + b) * n_ + c]; }
  double operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * n_ + b) * n_ + c];
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

std::vector<double> temporal_encode(const Matrix& times, std::size_t k, const TemporalEncoder& encoder);

// H(a, b, c) = s_a * u_b * v_c.
Cube outer3(std::span<const double> s, std::span<const double> u, std::span<const double> v);

// Output lies strictly inside (0, 1).
double cnn_forward(const Cube& interaction, const InteractionCNN& net);

// Every trainable tensor of the nonlinear model.
struct NlrModel {
  FactorModel factors;
  TemporalEncoder encoder;
  InteractionCNN net;

  std::size_t rank() const { return factors.rank(); }
  Dims dims() const { return factors.dims(); }

  // Same shapes, all zeros.
  static NlrModel zeros_like(const NlrModel& model);

  // Throws ConfigError on inconsistent shapes, NumericError on non-finite values.
  void validate() const;

  // S, U, V, encoder.weights, encoder.bias, conv3.weights, conv3.bias,
  // conv2.weights, conv2.bias, conv1.weights, conv1.bias, head.weights, head.bias.
  std::vector<ParamGroup> groups();
  std::vector<ConstParamGroup> groups() const;
  std::size_t parameter_count() const;

  bool operator==(const NlrModel&) const = default;
};

double model_predict(const NlrModel& model, std::size_t i, std::size_t j, std::size_t k);

}  // namespace nlrcnn
