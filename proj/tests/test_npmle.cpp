#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ebhb/npmle.hpp"
#include "ebhb/rng.hpp"
#include "oracles.hpp"

using namespace ebhb;

namespace {

NormalMeansData two_spikes(std::size_t n, double at, std::uint64_t seed) {
  RngStream rng(seed, 0);
  NormalMeansData d;
  for (std::size_t i = 0; i < n; ++i) d.x.push_back((i % 2 == 0 ? -at : at) + rng.normal());
  return d;
}

double direct_loglik(const DiscretePrior& p, const NormalMeansData& d) {
  double total = 0.0;
  for (double x : d.x) {
    double m = 0.0;
    for (std::size_t k = 0; k < p.atoms.size(); ++k) m += p.weights[k] * oracle::normal_pdf(x, p.atoms[k], d.sigma);
    total += std::log(m);
  }
  return total;
}

double mass_near(const DiscretePrior& p, double at, double radius) {
  double m = 0.0;
  for (std::size_t k = 0; k < p.atoms.size(); ++k)
    if (std::fabs(p.atoms[k] - at) <= radius) m += p.weights[k];
  return m;
}

std::size_t live_atoms(const DiscretePrior& p) {
  return static_cast<std::size_t>(std::count_if(p.weights.begin(), p.weights.end(), [](double w) { return w > 0.0; }));
}

}  // namespace

TEST(DiscretePrior, Validation) {
  EXPECT_NO_THROW((DiscretePrior{{0.0, 1.0}, {0.25, 0.75}}.validate()));
  EXPECT_THROW((DiscretePrior{{0.0, 1.0}, {0.5, 0.6}}.validate()), DomainError);
  EXPECT_THROW((DiscretePrior{{1.0, 0.0}, {0.5, 0.5}}.validate()), DomainError);
  EXPECT_THROW((DiscretePrior{{0.0}, {0.5, 0.5}}.validate()), DomainError);
  EXPECT_THROW((DiscretePrior{{0.0, 1.0}, {-0.5, 1.5}}.validate()), DomainError);
}

TEST(MarginalLoglik, KnownValues) {
  NormalMeansData d{{0.0}, 1.0};
  EXPECT_NEAR(marginal_loglik(DiscretePrior::point_mass(0.0), d), -0.9189385332046727, 1e-14);
  const double c = 1.7;
  EXPECT_NEAR(marginal_loglik(DiscretePrior{{-c, c}, {0.5, 0.5}}, d), std::log(oracle::normal_pdf(c, 0.0, 1.0)), 1e-14);
  const auto data = two_spikes(50, 2.0, 3);
  const DiscretePrior p{{-2.0, 0.0, 2.5}, {0.3, 0.3, 0.4}};
  EXPECT_NEAR(marginal_loglik(p, data), direct_loglik(p, data), 1e-10);
}

TEST(FitNpmle, SingleObservationConcentrates) {
  const NormalMeansData d{{5.0}, 1.0};
  const GridSpec grid = GridSpec::covering(d);
  const auto fit = fit_npmle(d, grid);
  const double step = (grid.hi - grid.lo) / static_cast<double>(grid.count - 1);
  EXPECT_GE(mass_near(fit.prior, 5.0, step), 0.99);
}

TEST(FitNpmle, TwoSpikeMixture) {
  RngStream rng(4, 0);
  NormalMeansData d;
  for (int i = 0; i < 1000; ++i) d.x.push_back((i < 500 ? -10.0 : 10.0) + rng.normal());
  const auto fit = fit_npmle(d, GridSpec::covering(d, 600));
  EXPECT_GE(mass_near(fit.prior, -10.0, 0.5) + mass_near(fit.prior, 10.0, 0.5), 0.95);
  // The oracle two-atom prior cannot beat the fit.
  EXPECT_GE(marginal_loglik(fit.prior, d), marginal_loglik(DiscretePrior{{-10.0, 10.0}, {0.5, 0.5}}, d) - 1e-9);
}

TEST(FitNpmle, NullSignalConcentratesAtZero) {
  RngStream rng(5, 0);
  NormalMeansData d;
  for (int i = 0; i < 1000; ++i) d.x.push_back(rng.normal());
  const auto fit = fit_npmle(d, GridSpec::covering(d, 600));
  EXPECT_GE(mass_near(fit.prior, 0.0, 0.25), 0.9);
  EXPECT_GE(marginal_loglik(fit.prior, d), marginal_loglik(DiscretePrior::point_mass(0.0), d) - 1e-9);
}

TEST(FitNpmle, LoglikNeverDecreases) {
  for (bool accelerate : {true, false}) {
    NpmleOptions opts;
    opts.accelerate = accelerate;
    const auto d = two_spikes(1000, 3.0, 6);
    const auto fit = fit_npmle(d, GridSpec::covering(d), opts);
    ASSERT_GE(fit.loglik_trace.size(), 2u);
    for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) ASSERT_GE(fit.loglik_trace[i], fit.loglik_trace[i - 1]);
    EXPECT_NEAR(fit.loglik_trace.back(), direct_loglik(fit.prior, d), 1e-6);
  }
}

TEST(FitNpmle, BeatsRandomGridPriors) {
  const auto d = two_spikes(500, 2.5, 7);
  const GridSpec grid = GridSpec::covering(d);
  const auto fit = fit_npmle(d, grid);
  const double best = marginal_loglik(fit.prior, d);
  const auto atoms = linspace(grid.lo, grid.hi, grid.count);
  RngStream rng(7, 1);
  for (int probe = 0; probe < 100; ++probe) {
    DiscretePrior p;
    p.atoms = atoms;
    p.weights.assign(atoms.size(), 0.0);
    // Alternate dense random priors and random few-atom priors.
    const std::size_t used = probe % 2 == 0 ? atoms.size() : 1 + rng.uniform_index(6);
    double total = 0.0;
    for (std::size_t j = 0; j < used; ++j) {
      const std::size_t k = used == atoms.size() ? j : rng.uniform_index(atoms.size());
      const double w = rng.exponential();
      p.weights[k] += w;
      total += w;
    }
    for (double& w : p.weights) w /= total;
    EXPECT_GE(best, marginal_loglik(p, d));
  }
}

TEST(FitNpmle, SatisfiesOptimalityConditions) {
  // At the NPMLE, the directional derivative toward any grid atom is <= 0:
  // (1/n) sum_i phi(x_i - a) / m(x_i) <= 1, with equality on the support.
  const auto d = two_spikes(1000, 2.0, 8);
  const GridSpec grid = GridSpec::covering(d);
  const auto fit = fit_npmle(d, grid);
  std::vector<double> mix;
  for (double x : d.x) {
    double m = 0.0;
    for (std::size_t k = 0; k < fit.prior.atoms.size(); ++k)
      m += fit.prior.weights[k] * oracle::normal_pdf(x, fit.prior.atoms[k], d.sigma);
    mix.push_back(m);
  }
  for (double a : fit.prior.atoms) {
    double g = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i) g += oracle::normal_pdf(d.x[i], a, d.sigma) / mix[i];
    EXPECT_LE(g / static_cast<double>(d.x.size()), 1.0 + 1e-4);
  }
}

TEST(FitNpmle, RejectsBadInput) {
  NormalMeansData empty;
  EXPECT_THROW(fit_npmle(empty, GridSpec{0.0, 1.0, 10}), DomainError);
  const NormalMeansData d{{0.0, 3.0}, 1.0};
  EXPECT_THROW(fit_npmle(d, GridSpec{0.0, 3.0, 50}), DomainError);
  EXPECT_THROW(fit_npmle(d, GridSpec{-2.0, 5.0, 1}), DomainError);
}

TEST(BayesRuleDiscrete, KnownValues) {
  const auto grid = linspace(-5.0, 5.0, 51);
  for (double v : bayes_rule_discrete(DiscretePrior::point_mass(1.3), 1.0, grid).values) EXPECT_DOUBLE_EQ(v, 1.3);
  const auto sym = bayes_rule_discrete(DiscretePrior{{-2.0, 2.0}, {0.5, 0.5}}, 1.0, {-1.0, 0.0, 1.0});
  EXPECT_NEAR(sym.values[1], 0.0, 1e-15);
  EXPECT_NEAR(sym.values[0], -sym.values[2], 1e-15);

  const auto two = bayes_rule_discrete(DiscretePrior{{0.0, 5.0}, {0.9, 0.1}}, 1.0, {2.5});
  const double f0 = 0.9 * std::exp(-0.5 * 2.5 * 2.5), f5 = 0.1 * std::exp(-0.5 * 2.5 * 2.5);
  EXPECT_NEAR(two.values[0], 5.0 * f5 / (f0 + f5), 1e-14);
  EXPECT_EQ(two.method_tag, MethodTag::NpmleG);
}

TEST(BayesRuleDiscrete, FittedRulesAreMonotone) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = two_spikes(300, 1.0 + 0.2 * static_cast<double>(seed), seed);
    const auto fit = fit_npmle(d, GridSpec::covering(d));
    const auto [mn, mx] = std::minmax_element(d.x.begin(), d.x.end());
    EXPECT_TRUE(monotonicity_diagnostic(bayes_rule_discrete(fit.prior, 1.0, linspace(*mn, *mx, 400))).is_monotone);
  }
}

TEST(SupportPrune, DropsSmallWeights) {
  const DiscretePrior p{{0.0, 1.0, 2.0}, {0.5, 0.5 - 1e-12, 1e-12}};
  const auto pruned = support_prune(p, 1e-6);
  ASSERT_EQ(pruned.atoms.size(), 2u);
  EXPECT_NEAR(pruned.weights[0], 0.5, 1e-11);
  EXPECT_NEAR(pruned.weights[1], 0.5, 1e-11);
  const DiscretePrior q{{0.0, 1.0}, {0.4, 0.6}};
  const auto same = support_prune(q, 1e-3);
  EXPECT_EQ(same.atoms, q.atoms);
  EXPECT_EQ(same.weights, q.weights);
  EXPECT_THROW(support_prune(q, 0.6), DomainError);
  EXPECT_THROW(support_prune(DiscretePrior{{0.0, 1.0, 2.0}, {0.2, 0.3, 0.5}}, 0.4), DomainError);
}

TEST(SupportPrune, LoglikChangeWithinBound) {
  const auto d = two_spikes(1000, 2.0, 9);
  const auto fit = fit_npmle(d, GridSpec::covering(d));
  const double eps = 1e-4;
  const auto pruned = support_prune(fit.prior, eps);
  std::size_t dropped = 0;
  for (double w : fit.prior.weights) dropped += (w < eps);
  const double change = std::fabs(marginal_loglik(pruned, d) - marginal_loglik(fit.prior, d));
  EXPECT_LE(change, prune_loglik_bound(d.x.size(), eps, dropped));
}

TEST(SupportPrune, FewSurvivingAtoms) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = two_spikes(1000, 3.0, 100 + seed);
    const auto fit = fit_npmle(d, GridSpec::covering(d));
    EXPECT_LE(support_prune(fit.prior, 1e-4).atoms.size(), 15u);
  }
}

TEST(SupportPrune, SupportGrowsSublinearly) {
  std::vector<double> ratio;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const auto d = two_spikes(n, 3.0, 42);
    const auto fit = fit_npmle(d, GridSpec::covering(d));
    const double count = static_cast<double>(support_prune(fit.prior, 1e-4).atoms.size());
    ratio.push_back(count / static_cast<double>(n));
    EXPECT_LE(live_atoms(support_prune(fit.prior, 1e-4)), 15u);
  }
  EXPECT_GT(ratio[0], ratio[1]);
  EXPECT_GT(ratio[1], ratio[2]);
}
