#include <gtest/gtest.h>

#include <cmath>

#include "pmnet/attention.hpp"

using namespace pmnet;

namespace {

const Network& trained_prior() {
  static const Network net = [] {
    TrainConfig cfg;
    cfg.recruit_min_gain = 0.005;
    return run_probability_matching(DistributionSpec::binomial(39, 0.5), cfg, 21).training.net;
  }();
  return net;
}

const Network& table_prior() {
  static const Network net =
      run_probability_matching(DistributionSpec::table({0.2, 0.4, 0.1, 0.3}), TrainConfig{}, 3).training.net;
  return net;
}

}  // namespace

TEST(Disrupt, UnitFactorLeavesWeights) {
  const auto& net = trained_prior();
  for (std::uint64_t t : {1u, 7u, 200u}) {
    const auto d = disrupt(net, 1.0, t);
    for (std::size_t i = 0; i < net.connections().size(); ++i) {
      EXPECT_EQ(d.connections()[i].weight, net.connections()[i].weight);
    }
  }
}

TEST(Disrupt, ZeroFactorFlattens) {
  const auto d = disrupt(trained_prior(), 0.0, 1);
  for (const auto& c : d.connections()) EXPECT_EQ(c.weight, 0.0);
  for (double x = -1.0; x <= 1.0; x += 0.25) EXPECT_DOUBLE_EQ(d.forward_scalar(x), 0.5);
}

TEST(Disrupt, ScalesEveryWeightIncludingFrozen) {
  const auto& net = trained_prior();
  ASSERT_GT(net.hidden_count(), 0u);
  const auto d = disrupt(net, 0.8, 2);
  for (std::size_t i = 0; i < net.connections().size(); ++i) {
    EXPECT_DOUBLE_EQ(d.connections()[i].weight, net.connections()[i].weight * 0.64);
    EXPECT_EQ(d.connections()[i].frozen, net.connections()[i].frozen);
  }
}

TEST(Disrupt, ExponentsAdd) {
  const auto& net = trained_prior();
  for (auto [a, b] : {std::pair<std::uint64_t, std::uint64_t>{1, 1}, {3, 4}, {10, 25}}) {
    const auto twice = disrupt(disrupt(net, 0.8, a), 0.8, b);
    const auto once = disrupt(net, 0.8, a + b);
    for (std::size_t i = 0; i < net.connections().size(); ++i) {
      EXPECT_EQ(twice.connections()[i].weight, once.connections()[i].weight);
    }
  }
}

TEST(Disrupt, RejectsFactorOutsideUnitInterval) {
  EXPECT_THROW(disrupt(trained_prior(), 1.5, 1), InvalidArgument);
  EXPECT_THROW(disrupt(trained_prior(), -0.1, 1), InvalidArgument);
}

TEST(NormalizedPrior, Cases) {
  const auto flat = normalized_prior(disrupt(trained_prior(), 0.0, 1), 40);
  for (double v : flat) EXPECT_NEAR(v, 1.0 / 40.0, 1e-15);
  EXPECT_EQ(normalized_prior(table_prior(), 1), (std::vector<double>{1.0}));
  const auto p = normalized_prior(table_prior(), 4);
  const double truth[] = {0.2, 0.4, 0.1, 0.3};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(p[i], truth[i], 0.05);
}

TEST(Entropy, KnownValues) {
  const std::vector<double> u400(400, 1.0 / 400.0);
  EXPECT_NEAR(entropy(u400), 8.6439, 5e-5);
  const std::vector<double> u2 = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(entropy(u2), 1.0);
  std::vector<double> point(10, 0.0);
  point[0] = 1.0;
  EXPECT_EQ(entropy(point), 0.0);
  const std::vector<double> negative = {1.2, -0.2};
  EXPECT_THROW(entropy(negative), InvalidArgument);
  EXPECT_NEAR(tv_distance_to_uniform(u2), 0.0, 1e-15);
  EXPECT_NEAR(tv_distance_to_uniform(point), 0.9, 1e-15);
}

TEST(Sweep, TimeZeroIsUndisrupted) {
  const auto sweep = neglect_sweep(trained_prior(), 0.8, 5, 40);
  ASSERT_EQ(sweep.readings.size(), 6u);
  EXPECT_EQ(sweep.readings[0].entropy_bits, entropy(normalized_prior(trained_prior(), 40)));
}

TEST(Sweep, UnitFactorIsConstant) {
  const auto sweep = neglect_sweep(trained_prior(), 1.0, 10, 40);
  for (const auto& r : sweep.readings) EXPECT_EQ(r.entropy_bits, sweep.readings[0].entropy_bits);
}

TEST(Sweep, ApproachesUniform) {
  const auto sweep = neglect_sweep(trained_prior(), 0.8, 60, 40);
  EXPECT_NEAR(sweep.readings.back().entropy_bits, std::log2(40.0), 0.01);
  EXPECT_GT(sweep.readings.back().entropy_bits, sweep.readings.front().entropy_bits);
  EXPECT_LT(sweep.readings.back().tv_to_uniform, sweep.readings.front().tv_to_uniform);
  EXPECT_EQ(sweep_table(sweep).rows().size(), 61u);
  EXPECT_EQ(prior_dump_table(sweep).rows().size(), 61u * 40u);
}

TEST(NeglectedPosterior, ZeroFactorUsesLikelihoodsOnly) {
  const double lik[] = {0.3, 0.05, 0.6, 0.2};
  const auto post = neglected_posterior(lik, table_prior(), {0.0, 1});
  const double total = 0.3 + 0.05 + 0.6 + 0.2;
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(post[i], lik[i] / total, 1e-12);
}

TEST(NeglectedPosterior, UnitFactorUsesLearnedPrior) {
  const double lik[] = {0.3, 0.05, 0.6, 0.2};
  const auto post = neglected_posterior(lik, table_prior(), {1.0, 3});
  const auto expected = exact_posterior(lik, normalized_prior(table_prior(), 4));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(post[i], expected[i]);
}

TEST(NeglectedPosterior, IntermediateFactorIsIntermediate) {
  const auto& net = trained_prior();
  const double learned = entropy(normalized_prior(net, 40));
  double prev = learned;
  for (double r : {0.95, 0.9, 0.8, 0.6, 0.3}) {
    const double h = entropy(normalized_prior(disrupt(net, r, 5), 40));
    EXPECT_GE(h, learned);
    EXPECT_LE(h, std::log2(40.0) + 1e-12);
    EXPECT_GE(h, prev - 1e-9) << r;
    prev = h;
  }
}
