#include "nlrcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cnn_internal.hpp"
#include "loop.hpp"
#include "nlrcnn/error.hpp"

namespace nlrcnn {

namespace {

std::string describe(const Entry& e) {
  std::ostringstream out;
  out << "(" << e.i << "," << e.j << "," << e.k << ")";
  return out.str();
}

double parameter_norm(const NlrModel& model) {
  double sum = 0.0;
  for (const auto& group : model.groups()) {
    for (const double v : group.values) sum += v * v;
  }
  return sum;
}

void add_scaled(NlrModel& target, const NlrModel& source, double scale) {
  auto dst = target.groups();
  const auto src = source.groups();
  for (std::size_t g = 0; g < dst.size(); ++g) {
    for (std::size_t n = 0; n < dst[g].values.size(); ++n) dst[g].values[n] += scale * src[g].values[n];
  }
}

void glorot(Conv2d& layer, Rng& rng) {
  const double area = static_cast<double>(layer.kernel * layer.kernel);
  const double fan_in = static_cast<double>(layer.in_channels) * area;
  const double fan_out = static_cast<double>(layer.out_channels) * area;
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& w : layer.weights) w = rng.uniform(-bound, bound);
}

}  // namespace

double nlr_loss(const NlrModel& model, std::span<const Entry> entries, double l2) {
  double loss = 0.0;
  for (const Entry& e : entries) {
    const double z = model_predict(model, e.i, e.j, e.k);
    if (!std::isfinite(z)) throw NumericError("non-finite prediction for entry " + describe(e));
    const double residual = e.value - z;
    loss += 0.5 * residual * residual;
  }
  if (l2 > 0.0) loss += 0.5 * l2 * parameter_norm(model);
  return loss;
}

double nlr_rmse(const NlrModel& model, std::span<const Entry> entries) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const Entry& e : entries) {
    const double z = model_predict(model, e.i, e.j, e.k);
    if (!std::isfinite(z)) throw NumericError("non-finite prediction for entry " + describe(e));
    sum += (e.value - z) * (e.value - z);
  }
  return std::sqrt(sum / static_cast<double>(entries.size()));
}

NlrModel nlr_backward(const NlrModel& model, std::span<const Entry> entries, double l2, double reg_weight) {
  NlrModel grad = NlrModel::zeros_like(model);
  const std::size_t rank = model.rank();
  const std::size_t window = model.encoder.window();
  const Matrix& times = model.factors.times;
  std::vector<double> pre(rank);
  std::vector<double> encoded(rank);
  std::vector<double> d_encoded(rank);
  detail::CnnActivations acts;

  for (const Entry& e : entries) {
    if (!model.dims().contains(e.i, e.j, e.k)) {
      throw std::out_of_range("entry " + describe(e) + " outside model dims");
    }
    const auto s = model.factors.stations.row(e.i);
    const auto u = model.factors.parameters.row(e.j);

    // Encoder forward, keeping preactivations.
    for (std::size_t r = 0; r < rank; ++r) {
      double p = model.encoder.bias[r];
      for (std::size_t tau = 0; tau < window; ++tau) {
        if (e.k + 1 + tau < window) continue;
        p += model.encoder.weights(r, tau) * times(e.k + 1 + tau - window, r);
      }
      pre[r] = p;
      encoded[r] = p < 0.0 ? 0.0 : p;
    }

    detail::run_cnn_rank_one(s, u, encoded, model.net, acts);
    if (!std::isfinite(acts.output)) throw NumericError("non-finite prediction for entry " + describe(e));
    std::fill(d_encoded.begin(), d_encoded.end(), 0.0);
    detail::backward_cnn_rank_one(acts, model.net, acts.output - e.value, grad.net,
                                  grad.factors.stations.row(e.i), grad.factors.parameters.row(e.j), d_encoded);

    for (std::size_t r = 0; r < rank; ++r) {
      if (!(pre[r] > 0.0)) continue;
      const double d = d_encoded[r];
      grad.encoder.bias[r] += d;
      for (std::size_t tau = 0; tau < window; ++tau) {
        if (e.k + 1 + tau < window) continue;
        const std::size_t row = e.k + 1 + tau - window;
        grad.encoder.weights(r, tau) += d * times(row, r);
        grad.factors.times(row, r) += d * model.encoder.weights(r, tau);
      }
    }
  }
  const double weight = l2 * reg_weight;
  if (weight > 0.0) add_scaled(grad, model, weight);
  return grad;
}

NlrModel zero_nlr(const Dims& dims, const TrainConfig& config) {
  NlrModel model;
  model.factors = FactorModel::zeros(dims, config.rank);
  model.encoder = TemporalEncoder{Matrix(config.rank, config.window), std::vector<double>(config.rank, 0.0)};
  model.net = InteractionCNN::zeros(config.rank, config.conv3_channels, config.conv2_channels,
                                    config.conv1_channels);
  return model;
}

NlrModel init_nlr(const Dims& dims, const TrainConfig& config, Rng& rng) {
  NlrModel model = zero_nlr(dims, config);
  model.factors = FactorModel::random(dims, config.rank, rng);
  model.encoder = TemporalEncoder::identity(config.rank, config.window);
  glorot(model.net.conv3, rng);
  glorot(model.net.conv2, rng);
  glorot(model.net.conv1, rng);
  const double bound = std::sqrt(6.0 / (static_cast<double>(config.conv1_channels) + 1.0));
  for (double& w : model.net.head_weights) w = rng.uniform(-bound, bound);
  return model;
}

NlrResult train_nlr(std::span<const Entry> train, std::span<const Entry> validation, const Dims& dims,
                    const TrainConfig& config) {
  TrainConfig checked = config;
  checked.model = ModelKind::nlr_cnn;
  checked.validate();
  Rng rng(config.seed);
  return train_nlr(init_nlr(dims, config, rng), train, validation, config);
}

NlrResult train_nlr(NlrModel initial, std::span<const Entry> train, std::span<const Entry> validation,
                    const TrainConfig& config, const EpochObserver<NlrModel>& on_epoch) {
  initial.validate();
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  struct Hooks {
    const TrainConfig& config;
    const EpochObserver<NlrModel>& on_epoch;
    void observe(std::size_t epoch, const NlrModel& m) const {
      if (on_epoch) on_epoch(epoch, m);
    }
    double loss(const NlrModel& m, std::span<const Entry> entries) const { return nlr_loss(m, entries, config.l2); }
    double rmse(const NlrModel& m, std::span<const Entry> entries) const { return nlr_rmse(m, entries); }
    NlrModel gradient(const NlrModel& m, std::span<const Entry> batch, double reg_weight) const {
      return nlr_backward(m, batch, config.l2, reg_weight);
    }
    void project(NlrModel&) const {}
  };
  auto [model, trace] = detail::run_epochs(std::move(initial), train, validation, config, rng, Hooks{config, on_epoch});
  return {std::move(model), std::move(trace)};
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale == 0.0) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

double GradcheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, g.max_relative_error);
  return worst;
}

std::vector<std::string> GradcheckReport::failed_layers() const {
  std::vector<std::string> layers;
  for (const auto& g : groups) {
    if (g.passed) continue;
    std::string layer = g.name.substr(0, g.name.find('.'));
    if (std::find(layers.begin(), layers.end(), layer) == layers.end()) layers.push_back(std::move(layer));
  }
  return layers;
}

namespace {

// Transposes each square kernel of a conv weight gradient; other groups are
// reversed.
void corrupt_group(const std::string& name, std::span<double> values, const NlrModel& shape) {
  const Conv2d* layer = nullptr;
  if (name == "conv3.weights") layer = &shape.net.conv3;
  if (name == "conv2.weights") layer = &shape.net.conv2;
  if (name == "conv1.weights") layer = &shape.net.conv1;
  if (!layer) {
    std::reverse(values.begin(), values.end());
    if (values.size() == 1) values[0] = -values[0] + 1.0;
    return;
  }
  const std::size_t k = layer->kernel;
  for (std::size_t base = 0; base < values.size(); base += k * k) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) std::swap(values[base + p * k + q], values[base + q * k + p]);
    }
  }
}

template <typename Model, typename Loss>
GradcheckReport compare(Model& model, const Model& analytic, double step, double threshold, const Loss& loss) {
  GradcheckReport report;
  auto params = model.groups();
  const auto grads = analytic.groups();
  for (std::size_t g = 0; g < params.size(); ++g) {
    GradcheckGroup result;
    result.name = params[g].name;
    for (std::size_t n = 0; n < params[g].values.size(); ++n) {
      double& value = params[g].values[n];
      const double saved = value;
      value = saved + step;
      const double up = loss(model);
      value = saved - step;
      const double down = loss(model);
      value = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = grads[g].values[n];
      if (std::abs(exact) < 1e-8 && std::abs(numeric) < 1e-8) {
        ++result.skipped;
        continue;
      }
      ++result.checked;
      result.max_relative_error = std::max(result.max_relative_error, relative_error(exact, numeric));
    }
    result.passed = result.max_relative_error < threshold;
    report.passed = report.passed && result.passed;
    report.groups.push_back(std::move(result));
  }
  return report;
}

std::vector<Entry> random_entries(const Dims& dims, std::size_t count, Rng& rng) {
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    entries.push_back({rng.index(dims.stations), rng.index(dims.parameters), rng.index(dims.times), rng.uniform()});
  }
  return entries;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckOptions& options) {
  TrainConfig config;
  config.rank = options.rank;
  config.window = options.window;
  config.conv3_channels = options.conv3_channels;
  config.conv2_channels = options.conv2_channels;
  config.conv1_channels = options.conv1_channels;
  config.validate();

  Rng rng(options.seed);
  NlrModel model = zero_nlr(options.dims, config);
  if (model.parameter_count() > 2000) {
    throw ConfigError("gradcheck instance has " + std::to_string(model.parameter_count()) +
                      " parameters (limit 2000)");
  }
  // Generic point: mixed-sign kernels and biases so ReLUs are partly active.
  for (auto& group : model.factors.groups()) {
    for (double& v : group.values) v = rng.uniform(0.2, 1.0);
  }
  for (double& w : model.encoder.weights.values()) w = rng.uniform(0.2, 1.0);
  for (double& b : model.encoder.bias) b = rng.uniform(-0.2, 0.2);
  for (Conv2d* layer : {&model.net.conv3, &model.net.conv2, &model.net.conv1}) {
    for (double& w : layer->weights) w = rng.uniform(-1.0, 1.0);
    for (double& b : layer->bias) b = rng.uniform(0.0, 0.5);
  }
  for (double& w : model.net.head_weights) w = rng.uniform(-2.0, 2.0);
  model.net.head_bias = rng.uniform(-0.5, 0.5);

  const auto entries = random_entries(options.dims, options.entries, rng);
  NlrModel analytic = nlr_backward(model, entries, options.l2);
  if (options.corrupt) {
    const std::string& target = *options.corrupt;
    bool found = false;
    for (auto& group : analytic.groups()) {
      if (group.name == target || group.name == target + ".weights") {
        corrupt_group(group.name, group.values, model);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown parameter group '" + target + "'");
  }
  return compare(model, analytic, options.step, options.threshold,
                 [&](const NlrModel& m) { return nlr_loss(m, entries, options.l2); });
}

GradcheckReport cp_gradcheck(const Dims& dims, std::size_t rank, std::size_t entries, double l2,
                             std::uint64_t seed, double step, double threshold) {
  Rng rng(seed);
  FactorModel model = FactorModel::zeros(dims, rank);
  for (auto& group : model.groups()) {
    for (double& v : group.values) v = rng.uniform(-1.0, 1.0);
  }
  const auto data = random_entries(dims, entries, rng);
  const FactorModel analytic = cp_gradient(model, data, l2);
  return compare(model, analytic, step, threshold,
                 [&](const FactorModel& m) { return cp_loss(m, data, l2); });
}

}  // namespace nlrcnn
