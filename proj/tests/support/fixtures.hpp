#pragma once

#include <vector>

#include "nlrcnn/nlr.hpp"
#include "nlrcnn/random.hpp"
#include "nlrcnn/tensor.hpp"

namespace fixture {

// Every parameter uniform on [lo, hi).
inline nlrcnn::NlrModel random_model(const nlrcnn::Dims& dims, std::size_t rank, std::size_t window,
                                     std::size_t c3, std::size_t c2, std::size_t c1, nlrcnn::Rng& rng,
                                     double lo = -1.0, double hi = 1.0) {
  nlrcnn::NlrModel m;
  m.factors = nlrcnn::FactorModel::zeros(dims, rank);
  m.encoder = nlrcnn::TemporalEncoder{nlrcnn::Matrix(rank, window), std::vector<double>(rank, 0.0)};
  m.net = nlrcnn::InteractionCNN::zeros(rank, c3, c2, c1);
  for (auto& g : m.groups())
    for (double& v : g.values) v = rng.uniform(lo, hi);
  return m;
}

inline nlrcnn::InteractionCNN random_net(std::size_t rank, std::size_t c3, std::size_t c2, std::size_t c1,
                                         nlrcnn::Rng& rng, double scale = 1.0) {
  nlrcnn::InteractionCNN net = nlrcnn::InteractionCNN::zeros(rank, c3, c2, c1);
  for (auto* conv : {&net.conv3, &net.conv2, &net.conv1}) {
    for (double& w : conv->weights) w = rng.uniform(-scale, scale);
    for (double& b : conv->bias) b = rng.uniform(-scale, scale);
  }
  for (double& w : net.head_weights) w = rng.uniform(-scale, scale);
  net.head_bias = rng.uniform(-scale, scale);
  return net;
}

inline nlrcnn::Cube random_cube(std::size_t n, nlrcnn::Rng& rng, double scale = 1.0) {
  nlrcnn::Cube h(n);
  for (double& v : h.values()) v = rng.uniform(-scale, scale);
  return h;
}

inline std::vector<double> random_vector(std::size_t n, nlrcnn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline std::vector<nlrcnn::Entry> random_entries(const nlrcnn::Dims& dims, std::size_t n, nlrcnn::Rng& rng) {
  std::vector<nlrcnn::Entry> out;
  for (std::size_t e = 0; e < n; ++e) {
    out.push_back({rng.index(dims.stations), rng.index(dims.parameters), rng.index(dims.times), rng.uniform()});
  }
  return out;
}

}  // namespace fixture
