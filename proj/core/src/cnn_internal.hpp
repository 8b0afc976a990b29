#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlrcnn/nlr.hpp"

namespace nlrcnn::detail {

struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  const double& at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
};

// Intermediate values of one forward pass, kept for the backward pass.
struct CnnActivations {
  bool rank_one = false;
  FeatureMap input;  // generic path only
  // Rank-one path: the three factor vectors, M(o, p, q) = sum_c W v_c, and
  // T(o, p, x) = sum_q M(o, p, q) u_{x+q}.
  std::vector<double> s, u, v;
  std::vector<double> contracted;
  std::vector<double> row_terms;
  FeatureMap conv3_pre;
  FeatureMap conv3_out;
  FeatureMap pooled;
  std::vector<std::size_t> pool_source;  // flat index into conv3_out.data per pooled cell
  FeatureMap conv2_pre;
  FeatureMap conv2_out;
  FeatureMap conv1_pre;
  FeatureMap conv1_out;
  std::vector<double> features;
  double logit = 0.0;
  double output = 0.0;
};

// Channel c of the map is the slice H(:, :, c).
FeatureMap unfold_channels(const Cube& interaction);

void run_cnn(const FeatureMap& input, const InteractionCNN& net, CnnActivations& acts);

// Same network applied to H = s o u o v without materialising H.
void run_cnn_rank_one(std::span<const double> s, std::span<const double> u, std::span<const double> v,
                      const InteractionCNN& net, CnnActivations& acts);

// Accumulates parameter gradients into `grad` and returns dLoss/dInput given
// dLoss/dOutput.
FeatureMap backward_cnn(const CnnActivations& acts, const InteractionCNN& net, double grad_output,
                        InteractionCNN& grad);

// Backward for run_cnn_rank_one: accumulates into the network gradient and
// into ds, du, dv.
void backward_cnn_rank_one(const CnnActivations& acts, const InteractionCNN& net, double grad_output,
                           InteractionCNN& grad, std::span<double> ds, std::span<double> du, std::span<double> dv);

double sigmoid(double x);

}  // namespace nlrcnn::detail
