#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fixtures.hpp"
#include "nlrcnn/error.hpp"
#include "nlrcnn/nlr.hpp"
#include "oracles.hpp"

namespace nlrcnn {
namespace {

TEST(SpatialChain, DefaultRankClosesAtOnePosition) {
  constexpr SpatialChain c = spatial_chain(10);
  EXPECT_EQ(c, (SpatialChain{10, 8, 4, 2, 1}));
  EXPECT_TRUE(c.valid());
  EXPECT_EQ(kMinimumRank, 10u);
}

TEST(SpatialChain, SmallerRanksCollapse) {
  for (std::size_t r = 1; r < 10; ++r) EXPECT_FALSE(spatial_chain(r).valid()) << r;
  // 7 -> 5 -> 2, and a 3x3 convolution no longer fits.
  EXPECT_EQ(spatial_chain(7).pool, 2u);
  EXPECT_EQ(spatial_chain(7).conv2, 0u);
  EXPECT_EQ(spatial_chain(12), (SpatialChain{12, 10, 5, 3, 2}));
}

TEST(InteractionCnn, RankBelowMinimumIsConfigError) {
  EXPECT_THROW(InteractionCNN::zeros(7, 2, 2, 2), ConfigError);
  EXPECT_THROW(InteractionCNN::zeros(9, 16, 8, 4), ConfigError);
  EXPECT_NO_THROW(InteractionCNN::zeros(10, 16, 8, 4));
  try {
    InteractionCNN::zeros(5, 16, 8, 4);
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "rank must be >= 10 for nlr-cnn");
  }
}

TEST(InteractionCnn, DefaultShapes) {
  const auto net = InteractionCNN::zeros(10, 16, 8, 4);
  EXPECT_EQ(net.conv3.weights.size(), 16u * 10 * 9);
  EXPECT_EQ(net.conv2.weights.size(), 8u * 16 * 9);
  EXPECT_EQ(net.conv1.weights.size(), 4u * 8 * 4);
  EXPECT_EQ(net.head_weights.size(), 4u);
}

TEST(TemporalEncode, IdentityTapPassesThrough) {
  Rng rng(1);
  Matrix v(6, 4);
  for (double& x : v.values()) x = rng.uniform();
  const auto enc = TemporalEncoder::identity(4, 3);
  for (std::size_t k = 0; k < 6; ++k) {
    const auto out = temporal_encode(v, k, enc);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(out[r], v(k, r));
  }
}

TEST(TemporalEncode, NegativePreactivationsFloorAtZero) {
  Matrix v(3, 2, 1.0);
  TemporalEncoder enc{Matrix(2, 2, 0.5), {-5.0, -2.0}};
  const auto out = temporal_encode(v, 2, enc);
  EXPECT_EQ(out, (std::vector<double>{0.0, 0.0}));
}

TEST(TemporalEncode, FirstSlotSeesOnlyLastTap) {
  Rng rng(3);
  Matrix v(5, 3);
  for (double& x : v.values()) x = rng.uniform();
  TemporalEncoder enc{Matrix(3, 3), {0.1, -0.2, 0.3}};
  for (double& w : enc.weights.values()) w = rng.uniform(-1, 1);
  const auto out = temporal_encode(v, 0, enc);
  for (std::size_t r = 0; r < 3; ++r) {
    // taps 0 and 1 would read rows -2 and -1
    const double expected = std::max(0.0, enc.weights(r, 2) * v(0, r) + enc.bias[r]);
    EXPECT_DOUBLE_EQ(out[r], expected);
  }
  const auto out1 = temporal_encode(v, 1, enc);
  for (std::size_t r = 0; r < 3; ++r) {
    const double expected = std::max(0.0, enc.weights(r, 1) * v(0, r) + enc.weights(r, 2) * v(1, r) + enc.bias[r]);
    EXPECT_DOUBLE_EQ(out1[r], expected);
  }
}

TEST(TemporalEncode, MatchesPaddedOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rank = 1 + rng.index(10);
    const std::size_t window = 1 + rng.index(5);
    const std::size_t slots = 1 + rng.index(8);
    Matrix v(slots, rank);
    for (double& x : v.values()) x = rng.uniform(-1, 1);
    TemporalEncoder enc{Matrix(rank, window), fixture::random_vector(rank, rng)};
    for (double& w : enc.weights.values()) w = rng.uniform(-1, 1);
    for (std::size_t k = 0; k < slots; ++k) {
      const auto got = temporal_encode(v, k, enc);
      const auto want = oracle::encode(v, k, enc);
      for (std::size_t r = 0; r < rank; ++r) {
        EXPECT_NEAR(got[r], want[r], 1e-12);
        EXPECT_GE(got[r], 0.0);
      }
    }
  }
}

TEST(TemporalEncode, OutOfRangeSlotThrows) {
  Matrix v(3, 2, 1.0);
  EXPECT_THROW(temporal_encode(v, 3, TemporalEncoder::identity(2, 3)), std::out_of_range);
}

TEST(TemporalEncode, IgnoresFutureRows) {
  Rng rng(5);
  Matrix v(10, 4);
  for (double& x : v.values()) x = rng.uniform(-1, 1);
  TemporalEncoder enc{Matrix(4, 3), fixture::random_vector(4, rng)};
  for (double& w : enc.weights.values()) w = rng.uniform(-1, 1);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto before = temporal_encode(v, k, enc);
    Matrix changed = v;
    for (std::size_t row = k + 1; row < 10; ++row)
      for (std::size_t r = 0; r < 4; ++r) changed(row, r) = rng.uniform(-100, 100);
    EXPECT_EQ(temporal_encode(changed, k, enc), before);
  }
}

TEST(Outer3, BasisVectors) {
  const std::vector<double> e1{1, 0, 0};
  const Cube h = outer3(e1, e1, e1);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(h(a, b, c), (a + b + c == 0) ? 1.0 : 0.0);
}

TEST(Outer3, DirectProduct) {
  const Cube h = outer3(std::vector<double>{1, 2}, std::vector<double>{3, 4}, std::vector<double>{5, 6});
  EXPECT_EQ(h(1, 0, 1), 36.0);
  EXPECT_EQ(h(0, 1, 0), 20.0);
}

TEST(Outer3, TotalSumFactorises) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = fixture::random_vector(10, rng);
    const auto u = fixture::random_vector(10, rng);
    const auto v = fixture::random_vector(10, rng);
    const Cube h = outer3(s, u, v);
    double total = 0.0;
    for (std::size_t a = 0; a < 10; ++a)
      for (std::size_t b = 0; b < 10; ++b)
        for (std::size_t c = 0; c < 10; ++c) total += h(a, b, c);
    const double product = std::accumulate(s.begin(), s.end(), 0.0) * std::accumulate(u.begin(), u.end(), 0.0) *
                           std::accumulate(v.begin(), v.end(), 0.0);
    EXPECT_NEAR(total, product, 1e-10);
  }
}

TEST(Outer3, LengthMismatchThrows) {
  EXPECT_THROW(outer3(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}),
               std::invalid_argument);
}

TEST(CnnForward, ZeroNetworkGivesHalf) {
  Rng rng(7);
  const auto net = InteractionCNN::zeros(10, 16, 8, 4);
  EXPECT_EQ(cnn_forward(fixture::random_cube(10, rng), net), 0.5);
}

TEST(CnnForward, MatchesNestedLoopOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rank = 10 + rng.index(3);
    const auto net = fixture::random_net(rank, 1 + rng.index(6), 1 + rng.index(5), 1 + rng.index(4), rng, 0.5);
    const Cube h = fixture::random_cube(rank, rng);
    EXPECT_NEAR(cnn_forward(h, net), oracle::cnn(h, net), 1e-10);
  }
}

TEST(CnnForward, OutputStrictlyInsideUnitInterval) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = trial % 2 ? 1e3 : 1.0;
    const auto net = fixture::random_net(10, 4, 3, 2, rng, trial % 4 < 2 ? 1.0 : 50.0);
    const double z = cnn_forward(fixture::random_cube(10, rng, scale), net);
    EXPECT_TRUE(std::isfinite(z));
    EXPECT_GT(z, 0.0);
    EXPECT_LT(z, 1.0);
  }
}

TEST(CnnForward, SaturatedLogitStaysOpen) {
  auto net = InteractionCNN::zeros(10, 2, 2, 2);
  net.head_bias = 1e6;
  EXPECT_LT(cnn_forward(Cube(10), net), 1.0);
  net.head_bias = -1e6;
  EXPECT_GT(cnn_forward(Cube(10), net), 0.0);
}

TEST(CnnForward, SideMismatchThrows) {
  const auto net = InteractionCNN::zeros(10, 2, 2, 2);
  EXPECT_THROW(cnn_forward(Cube(11), net), std::invalid_argument);
}

TEST(ModelPredict, ZeroNetworkIgnoresFactors) {
  Rng rng(10);
  NlrModel m = fixture::random_model({3, 4, 5}, 10, 3, 4, 3, 2, rng);
  m.net = InteractionCNN::zeros(10, 4, 3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(model_predict(m, i, 1, k), 0.5);
}

TEST(ModelPredict, IdentityEncoderReducesToPlainOuterProduct) {
  Rng rng(11);
  NlrModel m = fixture::random_model({3, 2, 6}, 10, 3, 4, 3, 2, rng, 0.0, 1.0);
  m.encoder = TemporalEncoder::identity(10, 3);
  for (std::size_t k = 0; k < 6; ++k) {
    const Cube h = outer3(m.factors.stations.row(2), m.factors.parameters.row(1), m.factors.times.row(k));
    EXPECT_NEAR(model_predict(m, 2, 1, k), cnn_forward(h, m.net), 1e-14);
  }
}

TEST(ModelPredict, MatchesCompositionOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims dims{1 + rng.index(4), 1 + rng.index(3), 1 + rng.index(6)};
    const NlrModel m = fixture::random_model(dims, 10, 1 + rng.index(3), 3, 2, 2, rng);
    const std::size_t i = rng.index(dims.stations);
    const std::size_t j = rng.index(dims.parameters);
    const std::size_t k = rng.index(dims.times);
    EXPECT_NEAR(model_predict(m, i, j, k), oracle::predict(m, i, j, k), 1e-10);
  }
}

TEST(ModelPredict, OutOfRangeThrows) {
  Rng rng(13);
  const NlrModel m = fixture::random_model({2, 2, 2}, 10, 2, 2, 2, 2, rng);
  EXPECT_THROW(model_predict(m, 0, 2, 0), std::out_of_range);
}

TEST(ModelPredict, CausalInTime) {
  Rng rng(14);
  for (int probe = 0; probe < 100; ++probe) {
    NlrModel m = fixture::random_model({2, 2, 8}, 10, 1 + rng.index(4), 3, 2, 2, rng);
    const std::size_t k = rng.index(8);
    const double before = model_predict(m, 1, 0, k);
    for (std::size_t row = k + 1; row < 8; ++row)
      for (std::size_t r = 0; r < 10; ++r) m.factors.times(row, r) = rng.uniform(-10, 10);
    EXPECT_EQ(model_predict(m, 1, 0, k), before);
  }
}

// The latent index of ṽ is the channel axis, so permuting it in V, the encoder,
// and the conv3 input channels together is a symmetry.
TEST(ModelPredict, ChannelPermutationEquivariance) {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const NlrModel m = fixture::random_model({2, 2, 5}, 10, 3, 4, 3, 2, rng);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    NlrModel p = m;
    for (std::size_t r = 0; r < 10; ++r) {
      for (std::size_t k = 0; k < 5; ++k) p.factors.times(k, r) = m.factors.times(k, perm[r]);
      for (std::size_t t = 0; t < 3; ++t) p.encoder.weights(r, t) = m.encoder.weights(perm[r], t);
      p.encoder.bias[r] = m.encoder.bias[perm[r]];
      for (std::size_t o = 0; o < 4; ++o)
        for (std::size_t a = 0; a < 3; ++a)
          for (std::size_t b = 0; b < 3; ++b) p.net.conv3.weight(o, r, a, b) = m.net.conv3.weight(o, perm[r], a, b);
    }
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(model_predict(p, i, 1, k), model_predict(m, i, 1, k), 1e-12);
  }
}

TEST(NlrModelGroups, NamesAndSizes) {
  Rng rng(16);
  const NlrModel m = fixture::random_model({3, 4, 5}, 10, 3, 16, 8, 4, rng);
  const auto groups = m.groups();
  std::vector<std::string> names;
  for (const auto& g : groups) names.push_back(g.name);
  EXPECT_EQ(names, (std::vector<std::string>{"S", "U", "V", "encoder.weights", "encoder.bias", "conv3.weights",
                                             "conv3.bias", "conv2.weights", "conv2.bias", "conv1.weights",
                                             "conv1.bias", "head.weights", "head.bias"}));
  EXPECT_EQ(m.parameter_count(), 120u + 30 + 10 + 1440 + 16 + 1152 + 8 + 128 + 4 + 4 + 1);
}

TEST(NlrModelValidate, RejectsNonFiniteAndMismatchedRanks) {
  Rng rng(17);
  NlrModel m = fixture::random_model({2, 2, 2}, 10, 2, 2, 2, 2, rng);
  EXPECT_NO_THROW(m.validate());
  NlrModel bad = m;
  bad.net.conv2.bias[0] = std::nan("");
  EXPECT_THROW(bad.validate(), NumericError);
  NlrModel wrong = m;
  wrong.encoder = TemporalEncoder::identity(11, 2);
  EXPECT_THROW(wrong.validate(), ConfigError);
}

}  // namespace
}  // namespace nlrcnn
