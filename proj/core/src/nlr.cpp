#include "nlrcnn/nlr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cnn_internal.hpp"
#include "nlrcnn/error.hpp"

namespace nlrcnn {

namespace detail {

namespace {

void conv_valid(const FeatureMap& in, const Conv2d& layer, FeatureMap& out) {
  const std::size_t k = layer.kernel;
  const std::size_t oh = in.height - k + 1;
  const std::size_t ow = in.width - k + 1;
  out = FeatureMap(layer.out_channels, oh, ow);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* dst = &out.at(o, 0, 0);
    std::fill(dst, dst + oh * ow, layer.bias[o]);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) {
          const double w = layer.weight(o, i, p, q);
          for (std::size_t y = 0; y < oh; ++y) {
            const double* src = &in.at(i, y + p, q);
            double* row = dst + y * ow;
            for (std::size_t x = 0; x < ow; ++x) row[x] += w * src[x];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients; writes dL/d(in) when grad_in is given.
void conv_backward(const FeatureMap& in, const Conv2d& layer, const FeatureMap& grad_out, Conv2d& grad_layer,
                   FeatureMap* grad_in) {
  const std::size_t k = layer.kernel;
  const std::size_t oh = grad_out.height;
  const std::size_t ow = grad_out.width;
  if (grad_in) *grad_in = FeatureMap(in.channels, in.height, in.width);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const double* g = &grad_out.at(o, 0, 0);
    double bias_sum = 0.0;
    for (std::size_t n = 0; n < oh * ow; ++n) bias_sum += g[n];
    grad_layer.bias[o] += bias_sum;
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = 0; q < k; ++q) {
          const double w = layer.weight(o, i, p, q);
          double acc = 0.0;
          for (std::size_t y = 0; y < oh; ++y) {
            const double* src = &in.at(i, y + p, q);
            const double* grow = g + y * ow;
            for (std::size_t x = 0; x < ow; ++x) acc += grow[x] * src[x];
            if (grad_in) {
              double* dst = &grad_in->at(i, y + p, q);
              for (std::size_t x = 0; x < ow; ++x) dst[x] += w * grow[x];
            }
          }
          grad_layer.weight(o, i, p, q) += acc;
        }
      }
    }
  }
}

void relu(const FeatureMap& pre, FeatureMap& out) {
  out = pre;
  for (double& v : out.data) v = v < 0.0 ? 0.0 : v;  // NaN passes through
}

// dL/dpre = dL/dout where pre > 0, else 0.
void relu_backward(const FeatureMap& pre, FeatureMap& grad) {
  for (std::size_t n = 0; n < grad.data.size(); ++n) {
    if (!(pre.data[n] > 0.0)) grad.data[n] = 0.0;
  }
}

// 2x2 stride-2 max pool, floor mode. Ties resolve to the first cell in
// row-major order within the window.
void max_pool(const FeatureMap& in, FeatureMap& out, std::vector<std::size_t>& source) {
  const std::size_t oh = in.height / 2;
  const std::size_t ow = in.width / 2;
  out = FeatureMap(in.channels, oh, ow);
  source.assign(out.data.size(), 0);
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (c * in.height + 2 * y) * in.width + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * in.height + 2 * y + dy) * in.width + 2 * x + dx;
            if (in.data[idx] > in.data[best] || std::isnan(in.data[idx])) best = idx;
          }
        }
        const std::size_t o = (c * oh + y) * ow + x;
        out.data[o] = in.data[best];
        source[o] = best;
      }
    }
  }
}

}  // namespace

double sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  // Keep the result inside the open interval even when exp saturates.
  return std::clamp(y, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

FeatureMap unfold_channels(const Cube& interaction) {
  const std::size_t n = interaction.size();
  FeatureMap map(n, n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < n; ++c) map.at(c, a, b) = interaction(a, b, c);
    }
  }
  return map;
}

namespace {

// Everything after the conv3 preactivation.
void run_tail(const InteractionCNN& net, CnnActivations& acts) {
  relu(acts.conv3_pre, acts.conv3_out);
  max_pool(acts.conv3_out, acts.pooled, acts.pool_source);
  conv_valid(acts.pooled, net.conv2, acts.conv2_pre);
  relu(acts.conv2_pre, acts.conv2_out);
  conv_valid(acts.conv2_out, net.conv1, acts.conv1_pre);
  relu(acts.conv1_pre, acts.conv1_out);

  const FeatureMap& last = acts.conv1_out;
  const std::size_t area = last.height * last.width;
  acts.features.assign(last.channels, 0.0);
  double logit = net.head_bias;
  for (std::size_t c = 0; c < last.channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < area; ++n) sum += last.data[c * area + n];
    acts.features[c] = sum / static_cast<double>(area);
    logit += net.head_weights[c] * acts.features[c];
  }
  acts.logit = logit;
  acts.output = sigmoid(logit);
}

// Returns dL/d(conv3 preactivation).
FeatureMap backward_tail(const CnnActivations& acts, const InteractionCNN& net, double grad_output,
                         InteractionCNN& grad) {
  const double grad_logit = grad_output * acts.output * (1.0 - acts.output);
  grad.head_bias += grad_logit;

  const FeatureMap& last = acts.conv1_out;
  const std::size_t area = last.height * last.width;
  FeatureMap g1(last.channels, last.height, last.width);
  for (std::size_t c = 0; c < last.channels; ++c) {
    grad.head_weights[c] += grad_logit * acts.features[c];
    const double share = grad_logit * net.head_weights[c] / static_cast<double>(area);
    for (std::size_t n = 0; n < area; ++n) g1.data[c * area + n] = share;
  }
  relu_backward(acts.conv1_pre, g1);

  FeatureMap g2;
  conv_backward(acts.conv2_out, net.conv1, g1, grad.conv1, &g2);
  relu_backward(acts.conv2_pre, g2);

  FeatureMap g_pooled;
  conv_backward(acts.pooled, net.conv2, g2, grad.conv2, &g_pooled);

  FeatureMap g3(acts.conv3_out.channels, acts.conv3_out.height, acts.conv3_out.width);
  for (std::size_t n = 0; n < g_pooled.data.size(); ++n) g3.data[acts.pool_source[n]] += g_pooled.data[n];
  relu_backward(acts.conv3_pre, g3);
  return g3;
}

// M(o, p, q) = sum_c W(o, c, p, q) v_c
std::vector<double> contract_channels(const Conv2d& conv, std::span<const double> v) {
  const std::size_t kk = conv.kernel * conv.kernel;
  std::vector<double> m(conv.out_channels * kk, 0.0);
  for (std::size_t o = 0; o < conv.out_channels; ++o) {
    for (std::size_t c = 0; c < conv.in_channels; ++c) {
      const double vc = v[c];
      const double* w = &conv.weights[(o * conv.in_channels + c) * kk];
      double* dst = &m[o * kk];
      for (std::size_t n = 0; n < kk; ++n) dst[n] += w[n] * vc;
    }
  }
  return m;
}

}  // namespace

void run_cnn(const FeatureMap& input, const InteractionCNN& net, CnnActivations& acts) {
  acts.rank_one = false;
  acts.input = input;
  conv_valid(acts.input, net.conv3, acts.conv3_pre);
  run_tail(net, acts);
}

void run_cnn_rank_one(std::span<const double> s, std::span<const double> u, std::span<const double> v,
                      const InteractionCNN& net, CnnActivations& acts) {
  const Conv2d& conv = net.conv3;
  const std::size_t k = conv.kernel;
  const std::size_t n = s.size();
  const std::size_t m = n - k + 1;
  acts.rank_one = true;
  acts.s.assign(s.begin(), s.end());
  acts.u.assign(u.begin(), u.end());
  acts.v.assign(v.begin(), v.end());
  acts.contracted = contract_channels(conv, v);
  // T(o, p, x) = sum_q M(o, p, q) u_{x+q}
  acts.row_terms.assign(conv.out_channels * k * m, 0.0);
  for (std::size_t o = 0; o < conv.out_channels; ++o) {
    for (std::size_t p = 0; p < k; ++p) {
      double* t = &acts.row_terms[(o * k + p) * m];
      for (std::size_t q = 0; q < k; ++q) {
        const double w = acts.contracted[(o * k + p) * k + q];
        for (std::size_t x = 0; x < m; ++x) t[x] += w * u[x + q];
      }
    }
  }
  acts.conv3_pre = FeatureMap(conv.out_channels, m, m);
  for (std::size_t o = 0; o < conv.out_channels; ++o) {
    for (std::size_t y = 0; y < m; ++y) {
      double* row = &acts.conv3_pre.at(o, y, 0);
      std::fill(row, row + m, conv.bias[o]);
      for (std::size_t p = 0; p < k; ++p) {
        const double sy = s[y + p];
        const double* t = &acts.row_terms[(o * k + p) * m];
        for (std::size_t x = 0; x < m; ++x) row[x] += sy * t[x];
      }
    }
  }
  run_tail(net, acts);
}

FeatureMap backward_cnn(const CnnActivations& acts, const InteractionCNN& net, double grad_output,
                        InteractionCNN& grad) {
  const FeatureMap g3 = backward_tail(acts, net, grad_output, grad);
  FeatureMap g_input;
  conv_backward(acts.input, net.conv3, g3, grad.conv3, &g_input);
  return g_input;
}

void backward_cnn_rank_one(const CnnActivations& acts, const InteractionCNN& net, double grad_output,
                           InteractionCNN& grad, std::span<double> ds, std::span<double> du,
                           std::span<double> dv) {
  const FeatureMap g = backward_tail(acts, net, grad_output, grad);
  const Conv2d& conv = net.conv3;
  const std::size_t k = conv.kernel;
  const std::size_t kk = k * k;
  const std::size_t m = g.height;
  const auto& s = acts.s;
  const auto& u = acts.u;

  std::vector<double> a(k * m);          // A(p, x) = sum_y g(o, y, x) s_{y+p}, per o
  std::vector<double> gk(conv.out_channels * kk, 0.0);  // G(o, p, q)
  for (std::size_t o = 0; o < conv.out_channels; ++o) {
    double bias_sum = 0.0;
    std::fill(a.begin(), a.end(), 0.0);
    for (std::size_t y = 0; y < m; ++y) {
      const double* grow = &g.at(o, y, 0);
      for (std::size_t x = 0; x < m; ++x) bias_sum += grow[x];
      for (std::size_t p = 0; p < k; ++p) {
        const double sy = s[y + p];
        double* ap = &a[p * m];
        const double* t = &acts.row_terms[(o * k + p) * m];
        double dsum = 0.0;
        for (std::size_t x = 0; x < m; ++x) {
          ap[x] += grow[x] * sy;
          dsum += grow[x] * t[x];
        }
        ds[y + p] += dsum;
      }
    }
    grad.conv3.bias[o] += bias_sum;
    for (std::size_t p = 0; p < k; ++p) {
      const double* ap = &a[p * m];
      for (std::size_t q = 0; q < k; ++q) {
        const double w = acts.contracted[(o * k + p) * k + q];
        double acc = 0.0;
        for (std::size_t x = 0; x < m; ++x) {
          acc += ap[x] * u[x + q];
          du[x + q] += ap[x] * w;
        }
        gk[(o * k + p) * k + q] = acc;
      }
    }
  }
  for (std::size_t o = 0; o < conv.out_channels; ++o) {
    const double* go = &gk[o * kk];
    for (std::size_t c = 0; c < conv.in_channels; ++c) {
      const double vc = acts.v[c];
      const double* w = &conv.weights[(o * conv.in_channels + c) * kk];
      double* dw = &grad.conv3.weights[(o * conv.in_channels + c) * kk];
      double acc = 0.0;
      for (std::size_t n = 0; n < kk; ++n) {
        dw[n] += vc * go[n];
        acc += w[n] * go[n];
      }
      dv[c] += acc;
    }
  }
}

}  // namespace detail

TemporalEncoder TemporalEncoder::identity(std::size_t rank, std::size_t window) {
  if (window < 1) throw ConfigError("temporal window must be >= 1");
  TemporalEncoder enc{Matrix(rank, window), std::vector<double>(rank, 0.0)};
  for (std::size_t r = 0; r < rank; ++r) enc.weights(r, window - 1) = 1.0;
  return enc;
}

Conv2d Conv2d::zeros(std::size_t in, std::size_t out, std::size_t kernel) {
  return {in, out, kernel, std::vector<double>(out * in * kernel * kernel, 0.0), std::vector<double>(out, 0.0)};
}

InteractionCNN InteractionCNN::zeros(std::size_t rank, std::size_t conv3_channels, std::size_t conv2_channels,
                                     std::size_t conv1_channels) {
  if (rank < kMinimumRank) {
    throw ConfigError("rank must be >= " + std::to_string(kMinimumRank) + " for nlr-cnn");
  }
  if (conv3_channels < 1 || conv2_channels < 1 || conv1_channels < 1) {
    throw ConfigError("channel widths must be >= 1");
  }
  InteractionCNN net;
  net.conv3 = Conv2d::zeros(rank, conv3_channels, 3);
  net.conv2 = Conv2d::zeros(conv3_channels, conv2_channels, 3);
  net.conv1 = Conv2d::zeros(conv2_channels, conv1_channels, 2);
  net.head_weights.assign(conv1_channels, 0.0);
  return net;
}

void InteractionCNN::validate() const {
  if (rank() < kMinimumRank) {
    throw ConfigError("rank must be >= " + std::to_string(kMinimumRank) + " for nlr-cnn");
  }
  const auto check = [](const Conv2d& c, std::size_t in, std::size_t kernel, const char* name) {
    if (c.in_channels != in || c.kernel != kernel ||
        c.weights.size() != c.out_channels * c.in_channels * c.kernel * c.kernel ||
        c.bias.size() != c.out_channels || c.out_channels < 1) {
      throw ConfigError(std::string("inconsistent shape for ") + name);
    }
  };
  check(conv3, conv3.in_channels, 3, "conv3");
  check(conv2, conv3.out_channels, 3, "conv2");
  check(conv1, conv2.out_channels, 2, "conv1");
  if (head_weights.size() != conv1.out_channels) throw ConfigError("inconsistent shape for head");
}

std::vector<double> temporal_encode(const Matrix& times, std::size_t k, const TemporalEncoder& encoder) {
  if (k >= times.rows()) {
    throw std::out_of_range("time index " + std::to_string(k) + " outside " + std::to_string(times.rows()) +
                            " time slots");
  }
  const std::size_t rank = encoder.rank();
  const std::size_t window = encoder.window();
  std::vector<double> out(rank);
  for (std::size_t r = 0; r < rank; ++r) {
    double pre = encoder.bias[r];
    for (std::size_t tau = 0; tau < window; ++tau) {
      // Row k - window + 1 + tau; rows before 0 are zero padding.
      if (k + 1 + tau < window) continue;
      pre += encoder.weights(r, tau) * times(k + 1 + tau - window, r);
    }
    out[r] = pre < 0.0 ? 0.0 : pre;
  }
  return out;
}

Cube outer3(std::span<const double> s, std::span<const double> u, std::span<const double> v) {
  if (s.size() != u.size() || s.size() != v.size()) {
    throw std::invalid_argument("outer3 needs equal-length vectors, got " + std::to_string(s.size()) + ", " +
                                std::to_string(u.size()) + ", " + std::to_string(v.size()));
  }
  const std::size_t n = s.size();
  Cube h(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double su = s[a] * u[b];
      for (std::size_t c = 0; c < n; ++c) h(a, b, c) = su * v[c];
    }
  }
  return h;
}

double cnn_forward(const Cube& interaction, const InteractionCNN& net) {
  if (interaction.size() != net.rank()) {
    throw std::invalid_argument("interaction tensor side " + std::to_string(interaction.size()) +
                                " does not match network rank " + std::to_string(net.rank()));
  }
  detail::CnnActivations acts;
  detail::run_cnn(detail::unfold_channels(interaction), net, acts);
  return acts.output;
}

NlrModel NlrModel::zeros_like(const NlrModel& model) {
  NlrModel zero = model;
  for (auto& group : zero.groups()) std::fill(group.values.begin(), group.values.end(), 0.0);
  return zero;
}

void NlrModel::validate() const {
  factors.validate();
  net.validate();
  if (net.rank() != rank() || encoder.rank() != rank() || encoder.bias.size() != rank()) {
    throw ConfigError("factor, encoder, and network ranks disagree");
  }
  if (encoder.window() < 1) throw ConfigError("temporal window must be >= 1");
  for (const auto& group : groups()) {
    for (const double v : group.values) {
      if (!std::isfinite(v)) throw NumericError("non-finite value in " + group.name);
    }
  }
}

namespace {
template <typename Group, typename Self>
std::vector<Group> model_groups(Self& m) {
  return {{"S", m.factors.stations.values()},
          {"U", m.factors.parameters.values()},
          {"V", m.factors.times.values()},
          {"encoder.weights", m.encoder.weights.values()},
          {"encoder.bias", m.encoder.bias},
          {"conv3.weights", m.net.conv3.weights},
          {"conv3.bias", m.net.conv3.bias},
          {"conv2.weights", m.net.conv2.weights},
          {"conv2.bias", m.net.conv2.bias},
          {"conv1.weights", m.net.conv1.weights},
          {"conv1.bias", m.net.conv1.bias},
          {"head.weights", m.net.head_weights},
          {"head.bias", {&m.net.head_bias, 1}}};
}
}  // namespace

std::vector<ParamGroup> NlrModel::groups() { return model_groups<ParamGroup>(*this); }
std::vector<ConstParamGroup> NlrModel::groups() const { return model_groups<ConstParamGroup>(*this); }

std::size_t NlrModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : groups()) n += g.values.size();
  return n;
}

double model_predict(const NlrModel& model, std::size_t i, std::size_t j, std::size_t k) {
  if (!model.dims().contains(i, j, k)) {
    throw std::out_of_range("index (" + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) +
                            ") outside model dims");
  }
  const auto encoded = temporal_encode(model.factors.times, k, model.encoder);
  detail::CnnActivations acts;
  detail::run_cnn_rank_one(model.factors.stations.row(i), model.factors.parameters.row(j), encoded, model.net, acts);
  return acts.output;
}

}  // namespace nlrcnn
