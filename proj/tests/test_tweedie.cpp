#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ebhb/npmle.hpp"
#include "ebhb/rng.hpp"
#include "ebhb/tweedie_f.hpp"
#include "oracles.hpp"

using namespace ebhb;

namespace {

NormalMeansData normal_sample(std::size_t n, double sd, std::uint64_t seed) {
  RngStream rng(seed, 0);
  NormalMeansData d;
  d.sigma = 1.0;
  for (std::size_t i = 0; i < n; ++i) d.x.push_back(rng.normal(0.0, sd));
  return d;
}

NormalMeansData bimodal_sample(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  NormalMeansData d;
  for (std::size_t i = 0; i < n; ++i) d.x.push_back(rng.normal(rng.uniform() < 0.5 ? -3.0 : 3.0, 1.0));
  return d;
}

}  // namespace

TEST(FitMarginal, RecoversGaussianDensity) {
  const auto data = normal_sample(10000, std::sqrt(2.0), 1);
  const auto fit = fit_marginal(data, 60, 5);
  double worst = 0.0;
  for (double x : linspace(-4.0, 4.0, 401))
    worst = std::max(worst, std::fabs(std::exp(fit.log_density(x)) - oracle::normal_pdf(x, 0.0, std::sqrt(2.0))));
  EXPECT_LT(worst, 0.02);
}

TEST(FitMarginal, DensityIsNormalized) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto fit = fit_marginal(bimodal_sample(2000, seed), 60, 7);
    const auto& s = fit.support();
    const double total = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double x) { return std::exp(fit.log_density(x)); }, s.lo, s.hi, 20, 1e-12);
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(FitMarginal, DevianceNeverIncreases) {
  const auto fit = fit_marginal(bimodal_sample(3000, 4), 60, 7);
  const auto& trace = fit.deviance_trace();
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]);
}

TEST(FitMarginal, RejectsDegenerateInput) {
  NormalMeansData same;
  same.x.assign(100, 1.5);
  EXPECT_THROW(fit_marginal(same, 60, 5), FitError);
  EXPECT_THROW(fit_marginal(normal_sample(100, 1.0, 2), 6, 5), FitError);
  EXPECT_THROW(fit_marginal(normal_sample(10, 1.0, 2), 60, 5), DomainError);
}

TEST(FitMarginal, BimodalDataGivesTwoModes) {
  const auto fit = fit_marginal(bimodal_sample(10000, 5), 60, 7);
  int maxima = 0;
  double prev = fit.score(fit.support().lo + 1.0).value;
  for (double x : linspace(fit.support().lo + 1.0, fit.support().hi - 1.0, 2000)) {
    const double s = fit.score(x).value;
    if (prev > 0.0 && s <= 0.0) ++maxima;
    prev = s;
  }
  EXPECT_EQ(maxima, 2);
  // The score changes sign across the antimode near 0.
  EXPECT_LT(fit.score(-1.0).value, 0.0);
  EXPECT_GT(fit.score(1.0).value, 0.0);
}

TEST(Score, MatchesFiniteDifferences) {
  const auto fit = fit_marginal(bimodal_sample(5000, 6), 60, 7);
  const double h = 1e-5;
  double worst = 0.0;
  for (double x : linspace(fit.support().lo + 0.5, fit.support().hi - 0.5, 300)) {
    const double fd = (fit.log_density(x + h) - fit.log_density(x - h)) / (2.0 * h);
    const double s = fit.score(x).value;
    if (std::fabs(s) < 1e-3) continue;
    worst = std::max(worst, std::fabs(fd - s) / std::fabs(s));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Score, FlagsExtrapolation) {
  const auto fit = fit_marginal(normal_sample(500, 1.0, 7), 60, 5);
  EXPECT_FALSE(fit.score(0.0).extrapolated);
  EXPECT_TRUE(fit.score(fit.support().hi + 1.0).extrapolated);
  const auto rule = tweedie_rule(fit, 1.0, {0.0, fit.support().hi + 1.0, fit.support().hi + 2.0});
  EXPECT_EQ(rule.extrapolated, (std::vector<std::size_t>{1, 2}));
}

TEST(Score, ExactGaussianMarginal) {
  const GaussianMarginal m{0.0, 2.0};
  EXPECT_DOUBLE_EQ(m.score(1.0).value, -0.5);
  EXPECT_DOUBLE_EQ(m.score(0.0).value, 0.0);
}

TEST(TweedieRule, ExactConjugateMarginal) {
  const auto grid = linspace(-5.0, 5.0, 101);
  const auto rule = tweedie_rule(GaussianMarginal{0.0, 2.0}, 1.0, grid);
  EXPECT_EQ(rule.method_tag, MethodTag::Exact);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(rule.values[i], grid[i] / 2.0, 1e-14);
  EXPECT_TRUE(monotonicity_diagnostic(rule).is_monotone);

  const auto zero = tweedie_rule(GaussianMarginal{0.0, 1.0}, 1.0, grid);
  for (double v : zero.values) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(TweedieRule, FittedMarginalApproachesConjugateRule) {
  const auto data = normal_sample(100000, std::sqrt(2.0), 8);
  const auto fit = fit_marginal(data, 60, 5);
  const auto rule = tweedie_rule(fit, 1.0, linspace(-3.0, 3.0, 301));
  EXPECT_EQ(rule.method_tag, MethodTag::FModel);
  double worst = 0.0;
  for (std::size_t i = 0; i < rule.grid.size(); ++i)
    worst = std::max(worst, std::fabs(rule.values[i] - rule.grid[i] / 2.0));
  EXPECT_LT(worst, 0.02);
}

TEST(TweedieRule, RejectsBadGrid) {
  EXPECT_THROW(tweedie_rule(GaussianMarginal{}, 1.0, {0.0, 0.0, 1.0}), DomainError);
  EXPECT_THROW(tweedie_rule(GaussianMarginal{}, -1.0, {0.0, 1.0}), DomainError);
}

TEST(TweedieRule, DiscretePriorConvolutionMatchesBayesRule) {
  RngStream rng(9, 0);
  for (int rep = 0; rep < 20; ++rep) {
    DiscretePrior prior;
    const std::size_t k = 1 + rng.uniform_index(8);
    double at = -6.0 + 2.0 * rng.uniform();
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      prior.atoms.push_back(at);
      prior.weights.push_back(0.05 + rng.uniform());
      total += prior.weights.back();
      at += 0.2 + 2.0 * rng.uniform();
    }
    for (double& w : prior.weights) w /= total;
    const double sigma = 0.5 + rng.uniform();
    const auto grid = linspace(-8.0, 14.0, 441);
    const auto via_score = tweedie_rule(MixtureMarginal(prior, sigma), sigma, grid);
    const auto bayes = bayes_rule_discrete(prior, sigma, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ASSERT_NEAR(via_score.values[i], bayes.values[i], 1e-6);
      ASSERT_NEAR(bayes.values[i], oracle::discrete_posterior_mean(prior.atoms, prior.weights, sigma, grid[i]), 1e-9);
    }
  }
}

TEST(MonotonicityDiagnostic, ConstructedRule) {
  ShrinkageRule rule{{0.0, 1.0, 2.0}, {0.0, 1.0, 0.5}, MethodTag::FModel, {}};
  const auto report = monotonicity_diagnostic(rule);
  EXPECT_FALSE(report.is_monotone);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0], (std::pair<std::size_t, std::size_t>{1, 2}));
  ShrinkageRule tiny{{0.0, 1.0}, {0.0, 1.0}, MethodTag::FModel, {}};
  EXPECT_THROW(monotonicity_diagnostic(tiny), DomainError);
}

TEST(MonotonicityDiagnostic, FlexibleFitOnSpikyDataViolates) {
  int violating = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 1);
    NormalMeansData d;
    for (int i = 0; i < 200; ++i) d.x.push_back(4.0 * (static_cast<double>(rng.uniform_index(3)) - 1.0) + rng.normal());
    const auto fit = fit_marginal(d, 60, 15);
    const auto [mn, mx] = std::minmax_element(d.x.begin(), d.x.end());
    violating += !monotonicity_diagnostic(tweedie_rule(fit, 1.0, linspace(*mn, *mx, 200))).is_monotone;
  }
  EXPECT_GT(violating, 0);
}
