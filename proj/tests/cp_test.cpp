#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nlrcnn/cp.hpp"
#include "nlrcnn/synth.hpp"
#include "nlrcnn/training.hpp"
#include "oracles.hpp"

namespace nlrcnn {
namespace {

FactorModel filled(const Dims& dims, std::size_t rank, double value) {
  FactorModel m = FactorModel::zeros(dims, rank);
  for (auto& g : m.groups())
    for (double& v : g.values) v = value;
  return m;
}

FactorModel random_signed(const Dims& dims, std::size_t rank, Rng& rng) {
  FactorModel m = FactorModel::zeros(dims, rank);
  for (auto& g : m.groups())
    for (double& v : g.values) v = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<Entry> random_entries(const Dims& dims, std::size_t n, Rng& rng) {
  std::vector<Entry> out;
  for (std::size_t e = 0; e < n; ++e) {
    out.push_back({rng.index(dims.stations), rng.index(dims.parameters), rng.index(dims.times), rng.uniform()});
  }
  return out;
}

TEST(CpPredict, AllOnesSumsRank) {
  const FactorModel m = filled({3, 4, 5}, 10, 1.0);
  EXPECT_EQ(cpd_predict(m, 2, 3, 4), 10.0);
}

TEST(CpPredict, SingleProduct) {
  FactorModel m = FactorModel::zeros({2, 2, 2}, 1);
  m.stations(1, 0) = 2.0;
  m.parameters(0, 0) = 3.0;
  m.times(1, 0) = 4.0;
  EXPECT_EQ(cpd_predict(m, 1, 0, 1), 24.0);
}

TEST(CpPredict, MatchesDenseReconstruction) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims dims{4, 3, 5};
    const FactorModel m = random_signed(dims, 5, rng);
    for (std::size_t i = 0; i < dims.stations; ++i)
      for (std::size_t j = 0; j < dims.parameters; ++j)
        for (std::size_t k = 0; k < dims.times; ++k)
          EXPECT_NEAR(cpd_predict(m, i, j, k), oracle::cpd_value(m, i, j, k), 1e-12);
  }
}

TEST(CpPredict, OutOfRangeThrows) {
  const FactorModel m = filled({2, 2, 2}, 3, 1.0);
  EXPECT_THROW(cpd_predict(m, 2, 0, 0), std::out_of_range);
  EXPECT_THROW(cpd_predict(m, 0, 0, 2), std::out_of_range);
}

TEST(CpLoss, PerfectPredictionsLeaveOnlyRegulariser) {
  const FactorModel m = filled({2, 2, 2}, 2, 0.5);
  // 2 * 0.5^3 = 0.25
  const std::vector<Entry> entries{{0, 0, 0, 0.25}, {1, 1, 1, 0.25}};
  EXPECT_DOUBLE_EQ(cp_loss(m, entries, 0.0), 0.0);
  // 12 factor entries, each 0.5^2
  EXPECT_DOUBLE_EQ(cp_loss(m, entries, 0.1), 0.1 * 3.0 / 2.0);
}

TEST(CpLoss, OneEntryHalfSquare) {
  const FactorModel m = FactorModel::zeros({1, 1, 1}, 2);
  const std::vector<Entry> entries{{0, 0, 0, 1.0}};
  EXPECT_DOUBLE_EQ(cp_loss(m, entries), 0.5);
}

TEST(CpLoss, MatchesBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims dims{5, 4, 6};
    const FactorModel m = random_signed(dims, 3, rng);
    const auto entries = random_entries(dims, 15, rng);
    const double l2 = trial % 2 ? 0.05 : 0.0;
    EXPECT_NEAR(cp_loss(m, entries, l2), oracle::cp_loss(m, entries, l2), 1e-12);
  }
}

TEST(CpGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t rank = 1 + seed % 4;
    const Dims dims{6 - seed % 3, 5 - seed % 2, 7 - seed % 4};
    const auto report = cp_gradcheck(dims, rank, 12, seed % 2 ? 0.03 : 0.0, seed);
    EXPECT_TRUE(report.passed) << "seed " << seed << " max " << report.max_relative_error();
    EXPECT_LT(report.max_relative_error(), 1e-4);
    ASSERT_EQ(report.groups.size(), 3u);
  }
}

TEST(CpGradient, ZeroFactorsAreStationary) {
  const FactorModel m = FactorModel::zeros({4, 3, 5}, 3);
  Rng rng(2);
  const auto entries = random_entries(m.dims(), 20, rng);
  const FactorModel g = cp_gradient(m, entries, 0.02);
  for (const auto& group : g.groups())
    for (const double v : group.values) EXPECT_EQ(v, 0.0);
}

TEST(CpGradient, RegWeightScalesOnlyPenalty) {
  Rng rng(8);
  const FactorModel m = random_signed({3, 3, 3}, 2, rng);
  const auto entries = random_entries(m.dims(), 5, rng);
  const FactorModel full = cp_gradient(m, entries, 0.5, 1.0);
  const FactorModel part = cp_gradient(m, entries, 0.5, 0.25);
  const FactorModel none = cp_gradient(m, entries, 0.0);
  const auto f = full.groups();
  const auto p = part.groups();
  const auto n = none.groups();
  const auto params = m.groups();
  for (std::size_t g = 0; g < f.size(); ++g) {
    for (std::size_t i = 0; i < f[g].values.size(); ++i) {
      EXPECT_NEAR(f[g].values[i], n[g].values[i] + 0.5 * params[g].values[i], 1e-12);
      EXPECT_NEAR(p[g].values[i], n[g].values[i] + 0.125 * params[g].values[i], 1e-12);
    }
  }
}

struct Split90 {
  std::vector<Entry> train;
  std::vector<Entry> validation;
};

// 90% train, 10% validation over every observed entry.
Split90 split_observed(const SparseTensor& t, std::uint64_t seed) {
  std::vector<Entry> all(t.entries().begin(), t.entries().end());
  Rng rng(seed);
  rng.shuffle(std::span<Entry>(all));
  const std::size_t n_train = all.size() * 9 / 10;
  return {{all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train)},
          {all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end()}};
}

TEST(CpTrain, RecoversNoiselessLowRankTensor) {
  SynthSpec spec;  // 20 x 10 x 30, rank 3, 30% observed, noiseless
  spec.seed = 4;
  const SynthData data = synth_generate(spec);
  ASSERT_EQ(data.tensor.size(), 1800u);
  const auto s = split_observed(data.tensor, 4);

  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 3;
  config.l2 = 0.0;
  config.learning_rate = 0.03;
  // The 1e-5 stop fires on the early plateau; use the whole epoch budget.
  config.tolerance = 0.0;
  config.seed = 4;
  const CpResult result = cp_train(s.train, s.validation, data.tensor.dims(), config);
  EXPECT_LE(result.trace.epochs(), 1000u);

  double sq = 0.0;
  const auto unknown = data.tensor.unknown();
  for (const auto& idx : unknown) {
    const double d = cpd_predict(result.model, idx.i, idx.j, idx.k) - data.truth(idx.i, idx.j, idx.k);
    sq += d * d;
  }
  const double heldout = std::sqrt(sq / static_cast<double>(unknown.size()));
  EXPECT_LT(heldout, 1e-2);
}

TEST(CpTrain, InfiniteToleranceStopsAfterOneEpoch) {
  SynthSpec spec;
  spec.seed = 1;
  const SynthData data = synth_generate(spec);
  const auto s = split_observed(data.tensor, 1);
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 3;
  config.tolerance = std::numeric_limits<double>::infinity();
  const CpResult r = cp_train(s.train, s.validation, data.tensor.dims(), config);
  EXPECT_EQ(r.trace.epochs(), 1u);
  EXPECT_EQ(r.trace.stop, StopReason::tolerance);
}

TEST(CpTrain, FullBatchLossNonIncreasingOnExactLowRank) {
  SynthSpec spec;
  spec.observed_fraction = 1.0;
  spec.seed = 9;
  const SynthData data = synth_generate(spec);
  const std::vector<Entry> all(data.tensor.entries().begin(), data.tensor.entries().end());
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 3;
  config.l2 = 0.0;
  config.learning_rate = 1e-3;
  config.batch_size = all.size();
  config.max_epochs = 200;
  config.tolerance = 0.0;
  const CpResult r = cp_train(all, all, data.tensor.dims(), config);
  ASSERT_EQ(r.trace.epochs(), 200u);
  double previous = r.trace.initial_loss;
  for (const double loss : r.trace.train_loss) {
    EXPECT_LE(loss, previous);
    previous = loss;
  }
  EXPECT_LT(r.trace.train_loss.back(), r.trace.initial_loss);
}

TEST(CpTrain, NonnegativeModeKeepsFactorsNonnegativeEveryEpoch) {
  SynthSpec spec;
  spec.seed = 3;
  spec.noise = 0.05;
  const SynthData data = synth_generate(spec);
  const auto s = split_observed(data.tensor, 3);
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 4;
  config.nonnegative = true;
  config.learning_rate = 0.05;
  config.max_epochs = 30;
  config.tolerance = 0.0;
  Rng rng(3);
  // Start with negative entries so the projection has work to do.
  FactorModel init = random_signed(data.tensor.dims(), 4, rng);
  std::size_t seen = 0;
  double min_value = 0.0;
  const auto observe = [&](std::size_t, const FactorModel& m) {
    ++seen;
    for (const auto& g : m.groups())
      for (const double v : g.values) min_value = std::min(min_value, v);
  };
  cp_train(init, s.train, s.validation, config, observe);
  EXPECT_EQ(seen, 30u);
  EXPECT_GE(min_value, 0.0);
}

TEST(CpTrain, DivergenceReportsEpochAndLearningRate) {
  SynthSpec spec;
  spec.seed = 2;
  const SynthData data = synth_generate(spec);
  const auto s = split_observed(data.tensor, 2);
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 3;
  config.learning_rate = 50.0;
  config.tolerance = 0.0;
  try {
    cp_train(s.train, s.validation, data.tensor.dims(), config);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("epoch"), std::string::npos) << what;
    EXPECT_NE(what.find("learning rate 50"), std::string::npos) << what;
    EXPECT_EQ(e.trace().stop, StopReason::divergence);
  }
}

TEST(CpTrain, ReturnsBestValidationEpoch) {
  SynthSpec spec;
  spec.seed = 6;
  spec.noise = 0.1;
  spec.observed_fraction = 0.05;
  const SynthData data = synth_generate(spec);
  const auto s = split_observed(data.tensor, 6);
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 6;
  config.l2 = 0.0;
  config.learning_rate = 0.05;
  config.max_epochs = 300;
  config.tolerance = 0.0;
  const CpResult r = cp_train(s.train, s.validation, data.tensor.dims(), config);
  EXPECT_DOUBLE_EQ(cp_rmse(r.model, s.validation), r.trace.best_val_rmse);
  for (const double v : r.trace.val_rmse) EXPECT_GE(v, r.trace.best_val_rmse);
}

TEST(CpTrain, DeterministicUnderSeed) {
  SynthSpec spec;
  spec.seed = 7;
  const SynthData data = synth_generate(spec);
  const auto s = split_observed(data.tensor, 7);
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  config.rank = 3;
  config.max_epochs = 20;
  config.seed = 99;
  const CpResult a = cp_train(s.train, s.validation, data.tensor.dims(), config);
  const CpResult b = cp_train(s.train, s.validation, data.tensor.dims(), config);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.model, b.model);
}

TEST(CpTrain, EmptyTrainingSetRejected) {
  TrainConfig config = TrainConfig::defaults_for(ModelKind::cp);
  const std::vector<Entry> none;
  const std::vector<Entry> one{{0, 0, 0, 0.5}};
  EXPECT_THROW(cp_train(none, one, Dims{1, 1, 1}, config), ConfigError);
}

}  // namespace
}  // namespace nlrcnn
