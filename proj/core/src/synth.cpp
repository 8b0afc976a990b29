#include "nlrcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nlrcnn/error.hpp"
#include "nlrcnn/random.hpp"

namespace nlrcnn {

namespace {

// Hinnant's civil_from_days.
void civil_from_days(long long z, long long& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

// Hourly slots starting 2024-01-01T00:00:00Z (day 19723 since 1970-01-01).
std::string hourly_stamp(std::size_t k) {
  long long y = 0;
  unsigned m = 0;
  unsigned d = 0;
  civil_from_days(19723 + static_cast<long long>(k / 24), y, m, d);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04lld-%02u-%02uT%02zu:00:00Z", y, m, d, k % 24);
  return buffer;
}

std::string numbered(const char* prefix, std::size_t n, int width) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%s%0*zu", prefix, width, n);
  return buffer;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

GroundTruth::GroundTruth(FactorModel factors, bool nonlinear)
    : factors_(std::move(factors)), nonlinear_(nonlinear) {
  const Matrix& v = factors_.times;
  smoothed_ = Matrix(v.rows(), v.cols());
  for (std::size_t k = 0; k < v.rows(); ++k) {
    double weight = 0.0;
    for (std::size_t lag = 0; lag < 3 && lag <= k; ++lag) weight += kTaps[lag];
    for (std::size_t r = 0; r < v.cols(); ++r) {
      double sum = 0.0;
      for (std::size_t lag = 0; lag < 3 && lag <= k; ++lag) sum += kTaps[lag] * v(k - lag, r);
      smoothed_(k, r) = sum / weight;
    }
  }
}

double GroundTruth::operator()(std::size_t i, std::size_t j, std::size_t k) const {
  if (!nonlinear_) return cpd_predict(factors_, i, j, k);
  if (!factors_.dims().contains(i, j, k)) throw std::out_of_range("ground-truth index outside dims");
  const auto s = factors_.stations.row(i);
  const auto u = factors_.parameters.row(j);
  const auto w = smoothed_.row(k);
  double m = 0.0;
  for (std::size_t r = 0; r < s.size(); ++r) m += s[r] * u[r] * w[r];
  const double alpha = 24.0 / static_cast<double>(factors_.rank());
  return logistic(alpha * m - 3.0);
}

SynthData synth_generate(const SynthSpec& spec) {
  if (!(spec.observed_fraction > 0.0) || spec.observed_fraction > 1.0) {
    throw ConfigError("observed fraction must be in (0, 1]");
  }
  if (spec.rank < 1) throw ConfigError("rank must be >= 1");
  if (spec.dims.volume() == 0) throw ConfigError("dims must be positive");
  if (!(spec.noise >= 0.0)) throw ConfigError("noise must be >= 0");

  Rng rng(spec.seed);
  FactorModel factors = FactorModel::zeros(spec.dims, spec.rank);
  for (auto& group : factors.groups()) {
    for (double& v : group.values) v = rng.uniform();
  }
  GroundTruth truth(std::move(factors), spec.nonlinear);

  const std::size_t volume = spec.dims.volume();
  const auto count = static_cast<std::size_t>(std::llround(spec.observed_fraction * static_cast<double>(volume)));
  std::vector<std::size_t> cells(volume);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  for (std::size_t n = 0; n < count; ++n) std::swap(cells[n], cells[n + rng.index(volume - n)]);

  const std::size_t plane = spec.dims.parameters * spec.dims.times;
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t cell = cells[n];
    Entry e{cell / plane, (cell / spec.dims.times) % spec.dims.parameters, cell % spec.dims.times, 0.0};
    e.value = truth(e.i, e.j, e.k);
    if (spec.noise > 0.0) e.value += spec.noise * rng.normal();
    entries.push_back(e);
  }

  Labels labels;
  for (std::size_t i = 0; i < spec.dims.stations; ++i) labels.stations.push_back(numbered("ST", i, 3));
  for (std::size_t j = 0; j < spec.dims.parameters; ++j) labels.parameters.push_back(numbered("P", j, 2));
  for (std::size_t k = 0; k < spec.dims.times; ++k) labels.timestamps.push_back(hourly_stamp(k));

  return {SparseTensor(spec.dims, std::move(entries), std::move(labels)), std::move(truth)};
}

}  // namespace nlrcnn
