#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pmnet/distribution.hpp"

using namespace pmnet;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

}  // namespace

TEST(Pmf, TableIsReturnedVerbatim) {
  const auto spec = DistributionSpec::table({0.2, 0.4, 0.1, 0.3});
  for (std::size_t epoch : {0u, 1u, 5000u}) {
    EXPECT_EQ(pmf(spec, epoch), (std::vector<double>{0.2, 0.4, 0.1, 0.3}));
  }
}

TEST(Pmf, ScheduleSwitchesAtEpoch) {
  auto spec = DistributionSpec::table({0.2, 0.8});
  DistributionParams swapped;
  swapped.probabilities = {0.8, 0.2};
  spec.switch_at(400, swapped);
  EXPECT_EQ(pmf(spec, 399), (std::vector<double>{0.2, 0.8}));
  EXPECT_EQ(pmf(spec, 400), (std::vector<double>{0.8, 0.2}));
}

TEST(Pmf, PartialScheduleOverridesKeepOtherParameters) {
  auto spec = DistributionSpec::gaussian(0.0, 0.5);
  DistributionParams shift;
  shift.values = {{"mean", 1.0}};
  spec.switch_at(10, shift);
  const auto moved = pmf(spec, 10);
  const auto expected = pmf(DistributionSpec::gaussian(1.0, 0.5), 0);
  for (std::size_t i = 0; i < moved.size(); ++i) EXPECT_DOUBLE_EQ(moved[i], expected[i]);
}

TEST(Pmf, GaussianIsSymmetricAndMatchesErf) {
  const Support s{-4.0, 4.0, 33};
  const auto p = pmf(DistributionSpec::gaussian(0.0, 1.0, s));
  ASSERT_EQ(p.size(), 33u);
  EXPECT_NEAR(sum(p), 1.0, 1e-12);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], p[p.size() - 1 - i], 1e-12);
  const double total = normal_cdf(4.0, 0, 1) - normal_cdf(-4.0, 0, 1);
  const double w = 8.0 / 33.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = -4.0 + w * i, b = -4.0 + w * (i + 1);
    EXPECT_NEAR(p[i], (normal_cdf(b, 0, 1) - normal_cdf(a, 0, 1)) / total, 1e-12);
  }
}

TEST(Pmf, BinomialMatchesLogGamma) {
  const auto p = pmf(DistributionSpec::binomial(399, 0.5));
  ASSERT_EQ(p.size(), 400u);
  EXPECT_NEAR(sum(p), 1.0, 1e-12);
  for (std::size_t k : {0u, 1u, 100u, 199u, 200u, 399u}) {
    const double lc = std::lgamma(400.0) - std::lgamma(k + 1.0) - std::lgamma(400.0 - k);
    EXPECT_NEAR(p[k], std::exp(lc + 399.0 * std::log(0.5)), 1e-12 + 1e-9 * p[k]);
  }
}

TEST(Pmf, PoissonGammaBeta) {
  DistributionSpec poisson;
  poisson.kind = DistributionKind::poisson;
  poisson.params.values = {{"lambda", 3.0}, {"count", 20.0}};
  const auto pp = pmf(poisson);
  ASSERT_EQ(pp.size(), 20u);
  double norm = 0.0;
  for (int k = 0; k < 20; ++k) norm += std::exp(-3.0 + k * std::log(3.0) - std::lgamma(k + 1.0));
  EXPECT_NEAR(pp[2], std::exp(-3.0) * 4.5 / norm, 1e-12);

  DistributionSpec gamma;
  gamma.kind = DistributionKind::gamma;
  gamma.params.values = {{"shape", 1.0}, {"scale", 2.0}};
  gamma.support = {0.0, 10.0, 10};
  const auto gp = pmf(gamma);
  // Exponential with mean 2: bin masses are geometric with ratio e^{-1/2}.
  for (std::size_t i = 1; i < gp.size(); ++i) EXPECT_NEAR(gp[i] / gp[i - 1], std::exp(-0.5), 1e-12);

  DistributionSpec beta;
  beta.kind = DistributionKind::beta;
  beta.params.values = {{"alpha", 1.0}, {"beta", 1.0}};
  beta.support = {0.0, 1.0, 8};
  for (double v : pmf(beta)) EXPECT_NEAR(v, 0.125, 1e-12);
}

TEST(Pmf, InvalidSpecsRejected) {
  EXPECT_THROW(pmf(DistributionSpec::table({0.5, 0.6})), InvalidArgument);
  EXPECT_THROW(pmf(DistributionSpec::table({-0.1, 1.1})), InvalidArgument);
  EXPECT_THROW(pmf(DistributionSpec::table({})), InvalidArgument);
  EXPECT_THROW(pmf(DistributionSpec::gaussian(0, -1)), InvalidArgument);
  EXPECT_THROW(pmf(DistributionSpec::binomial(5, 1.5)), InvalidArgument);
  auto spec = DistributionSpec::table({0.5, 0.5});
  DistributionParams p;
  p.probabilities = {0.5, 0.5};
  spec.switch_at(10, p).switch_at(10, p);
  EXPECT_THROW(validate(spec), InvalidArgument);
  auto resized = DistributionSpec::table({0.5, 0.5});
  DistributionParams three;
  three.probabilities = {0.2, 0.3, 0.5};
  resized.switch_at(5, three);
  EXPECT_THROW(validate(resized), InvalidArgument);
}

TEST(DistributionJson, RoundTrip) {
  auto spec = DistributionSpec::gaussian(0.0, 1.0, {-4.0, 4.0, 17});
  DistributionParams shift;
  shift.values = {{"mean", 1.0}, {"sd", 1.0}};
  spec.switch_at(800, shift);
  const auto back = distribution_from_json(to_json(spec));
  EXPECT_EQ(pmf(back, 0), pmf(spec, 0));
  EXPECT_EQ(pmf(back, 900), pmf(spec, 900));
  EXPECT_EQ(back.schedule.size(), 1u);
}

TEST(DistributionJson, FieldPathsInErrors) {
  const auto doc = nlohmann::json::parse(R"({"kind":"table","parameters":{"probabilities":[0.5,"x"]}})");
  try {
    distribution_from_json(doc);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "spec.parameters.probabilities[1]");
  }
  const auto unknown = nlohmann::json::parse(R"({"kind":"zipf","parameters":{}})");
  EXPECT_THROW(distribution_from_json(unknown), ParseError);
  const auto no_support = nlohmann::json::parse(R"({"kind":"gaussian","parameters":{"mean":0,"sd":1}})");
  EXPECT_THROW(distribution_from_json(no_support), ParseError);
}
