#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ebhb/mgps.hpp"
#include "ebhb/polya_gamma.hpp"
#include "ebhb/rng.hpp"
#include "oracles.hpp"

using namespace ebhb;

namespace {

const MgpsParams kSeparated{0.7, {2.0, 4.0}, {5.0, 1.0}};

DrugEventTable hand_table() {
  DrugEventTable t;
  t.cells = {{"d1", "e1", 0, 0.5}, {"d1", "e2", 3, 1.2}, {"d2", "e1", 12, 2.0}};
  return t;
}

double component_gm(const GammaParams& g) { return std::exp(oracle::digamma(g.shape) - std::log(g.rate)); }

HorseshoeConfig chain(std::uint64_t seed, std::size_t iter, std::size_t burn) {
  HorseshoeConfig cfg;
  cfg.n_iter = iter;
  cfg.burn_in = burn;
  cfg.seed = seed;
  return cfg;
}

// n ~ NB with mean e exp(intercept + x beta) and size r.
DrugEventTable nb_table(std::size_t cells, double intercept, double r, RngStream& rng,
                        const std::vector<double>* effect = nullptr) {
  DrugEventTable t;
  for (std::size_t i = 0; i < cells; ++i) {
    const double e = 0.5 + 4.5 * rng.uniform();
    const double shift = effect ? (*effect)[i] : 0.0;
    const double lambda = rng.gamma(r, r);
    t.cells.push_back({"d" + std::to_string(i), "e", rng.poisson(lambda * e * std::exp(intercept + shift)), e});
  }
  return t;
}

}  // namespace

TEST(MgpsLoglik, KnownValues) {
  DrugEventTable one;
  one.cells = {{"d", "e", 0, 1.0}};
  EXPECT_NEAR(marginal_loglik_mgps(MgpsParams{1.0, {1.0, 1.0}, {1.0, 1.0}}, one), std::log(0.5), 1e-14);

  const auto table = hand_table();
  const MgpsParams same{0.5, {1.5, 0.7}, {1.5, 0.7}};
  const MgpsParams single{1.0, {1.5, 0.7}, {9.0, 9.0}};
  EXPECT_NEAR(marginal_loglik_mgps(same, table), marginal_loglik_mgps(single, table), 1e-12);

  double direct = 0.0;
  for (const auto& c : table.cells) {
    const auto n = static_cast<std::uint64_t>(c.n);
    direct += std::log(kSeparated.w * std::exp(nb_logpmf(n, 2.0, 4.0 / (4.0 + c.e))) +
                       (1.0 - kSeparated.w) * std::exp(nb_logpmf(n, 5.0, 1.0 / (1.0 + c.e))));
  }
  EXPECT_NEAR(marginal_loglik_mgps(kSeparated, table), direct, 1e-12);
  double via_boost = 0.0;
  for (const auto& c : table.cells)
    via_boost += std::log(oracle::gamma_poisson_mixture_pmf(static_cast<unsigned>(c.n), c.e, 0.7, 2.0, 4.0, 5.0, 1.0));
  EXPECT_NEAR(marginal_loglik_mgps(kSeparated, table), via_boost, 1e-10);
}

TEST(MgpsParams, CanonicalOrderAndValidation) {
  const MgpsParams swapped{0.3, {5.0, 1.0}, {2.0, 4.0}};
  const MgpsParams c = swapped.canonical();
  EXPECT_DOUBLE_EQ(c.w, 0.7);
  EXPECT_DOUBLE_EQ(c.comp1.mean(), 0.5);
  EXPECT_THROW((MgpsParams{1.0, {1.0, 1.0}, {1.0, 1.0}}.validate()), DomainError);
  EXPECT_NO_THROW((MgpsParams{1.0, {1.0, 1.0}, {1.0, 1.0}}.validate(true)));
  DrugEventTable dup = hand_table();
  dup.cells.push_back(dup.cells.front());
  EXPECT_THROW(dup.validate(), DomainError);
}

TEST(CellPosterior, ConjugateUpdateAndWeights) {
  const auto cp = cell_posterior(0, 1.0, MgpsParams{1.0, {1.0, 1.0}, {1.0, 1.0}});
  EXPECT_EQ(cp.weight1, 1.0);
  EXPECT_EQ(cp.post1.shape, 1.0);
  EXPECT_EQ(cp.post1.rate, 2.0);

  EXPECT_NEAR(cell_posterior(4, 2.0, MgpsParams{0.5, {2.0, 1.0}, {2.0, 1.0}}).weight1, 0.5, 1e-15);

  const MgpsParams lo_hi{0.5, {1.0, 1.0}, {10.0, 1.0}};
  const auto high = cell_posterior(10, 1.0, lo_hi);
  EXPECT_GT(1.0 - high.weight1, 0.9);
  const double l1 = 0.5 * oracle::nb_pmf(10, 1.0, 0.5), l2 = 0.5 * oracle::nb_pmf(10, 10.0, 0.5);
  EXPECT_NEAR(high.weight1, l1 / (l1 + l2), 1e-12);
}

TEST(CellPosterior, ConjugacyOnRandomCells) {
  RngStream rng(2, 0);
  for (int i = 0; i < 1000; ++i) {
    const MgpsParams p{0.05 + 0.9 * rng.uniform(), {0.1 + 5 * rng.uniform(), 0.1 + 5 * rng.uniform()},
                       {0.1 + 5 * rng.uniform(), 0.1 + 5 * rng.uniform()}};
    const std::uint64_t n = rng.uniform_index(50);
    const double e = 0.01 + 20.0 * rng.uniform();
    const auto cp = cell_posterior(n, e, p);
    ASSERT_EQ(cp.post1.shape, p.comp1.shape + static_cast<double>(n));
    ASSERT_EQ(cp.post1.rate, p.comp1.rate + e);
    ASSERT_EQ(cp.post2.shape, p.comp2.shape + static_cast<double>(n));
    ASSERT_EQ(cp.post2.rate, p.comp2.rate + e);
    const double a = p.w * oracle::nb_pmf(static_cast<unsigned>(n), p.comp1.shape, p.comp1.rate / (p.comp1.rate + e));
    const double b = (1 - p.w) * oracle::nb_pmf(static_cast<unsigned>(n), p.comp2.shape, p.comp2.rate / (p.comp2.rate + e));
    ASSERT_NEAR(cp.weight1, a / (a + b), 1e-10);
  }
}

TEST(Ebgm, KnownValues) {
  const MgpsParams unit{1.0, {1.0, 1.0}, {1.0, 1.0}};
  EXPECT_NEAR(ebgm(0, 1.0, unit), std::exp(oracle::digamma(1.0) - std::log(2.0)), 1e-10);
  EXPECT_NEAR(ebgm(0, 1.0, unit), 0.2807, 5e-5);
  EXPECT_NEAR(ebgm(1000, 10.0, MgpsParams::default_init()) / 100.0, 1.0, 0.05);
  for (double w : {0.1, 0.5, 0.9})
    EXPECT_NEAR(ebgm(3, 2.0, MgpsParams{w, {1.5, 0.5}, {1.5, 0.5}}), ebgm(3, 2.0, MgpsParams{1.0, {1.5, 0.5}, {7.0, 7.0}}),
                1e-12);
}

TEST(Ebgm, SandwichBoundOnRandomCells) {
  RngStream rng(3, 0);
  for (int i = 0; i < 10000; ++i) {
    const MgpsParams p{0.01 + 0.98 * rng.uniform(), {0.05 + 10 * rng.uniform(), 0.05 + 10 * rng.uniform()},
                       {0.05 + 10 * rng.uniform(), 0.05 + 10 * rng.uniform()}};
    const std::uint64_t n = rng.uniform_index(200);
    const double e = 0.01 + 50.0 * rng.uniform();
    const auto cp = cell_posterior(n, e, p);
    const double g = ebgm(cp);
    const double a = component_gm(cp.post1), b = component_gm(cp.post2);
    ASSERT_GE(g, std::min(a, b) * (1 - 1e-12));
    ASSERT_LE(g, std::max(a, b) * (1 + 1e-12));
  }
}

TEST(Ebgm, ShrinksTowardPrior) {
  // Prior means 0.5 and 5; large ratios are pulled down, empty cells up.
  for (auto [n, e] : {std::pair<std::uint64_t, double>{40, 2.0}, {100, 5.0}, {30, 1.0}})
    EXPECT_LT(ebgm(n, e, kSeparated), static_cast<double>(n) / e);
  for (auto [n, e] : {std::pair<std::uint64_t, double>{0, 1.0}, {1, 5.0}, {2, 10.0}})
    EXPECT_GT(ebgm(n, e, kSeparated), static_cast<double>(n) / e);
}

TEST(Eb05, BelowEbgmAndMatchesSingleComponentQuantile) {
  const MgpsParams single{1.0, {2.0, 1.0}, {2.0, 1.0}};
  const auto cp = cell_posterior(3, 2.0, single);
  // Gamma(5, 3) 5% quantile.
  EXPECT_NEAR(posterior_quantile(cp, 0.05), 0.65671652268651, 1e-9);
  RngStream rng(4, 0);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t n = rng.uniform_index(30);
    const double e = 0.1 + 10 * rng.uniform();
    EXPECT_LT(eb05(n, e, kSeparated), ebgm(n, e, kSeparated));
  }
  EXPECT_THROW(posterior_quantile(cp, 1.0), DomainError);
}

TEST(FitType2Ml, RecoversSeparatedComponents) {
  RngStream rng(1, 0);
  const auto table = simulate_drug_event_table(kSeparated, 10000, 0.2, 20.0, rng);
  const auto fit = fit_type2_ml(table);
  EXPECT_NEAR(fit.params.comp1.mean() / kSeparated.comp1.mean(), 1.0, 0.15);
  EXPECT_NEAR(fit.params.comp2.mean() / kSeparated.comp2.mean(), 1.0, 0.15);
  EXPECT_GE(fit.loglik, marginal_loglik_mgps(kSeparated, table));
  EXPECT_FALSE(fit.degenerate);
}

TEST(FitType2Ml, StartingAtTruthNeverLowersLikelihood) {
  RngStream rng(2, 0);
  const auto table = simulate_drug_event_table(kSeparated, 2000, 0.2, 20.0, rng);
  const auto fit = fit_type2_ml(table, kSeparated);
  EXPECT_GE(fit.loglik, fit.init_loglik);
  EXPECT_NEAR(fit.init_loglik, marginal_loglik_mgps(kSeparated, table), 1e-8 * std::fabs(fit.init_loglik));
  EXPECT_NEAR(fit.loglik, marginal_loglik_mgps(fit.params, table), 1e-8 * std::fabs(fit.loglik));
  for (std::size_t i = 1; i < fit.trace.size(); ++i) EXPECT_GE(fit.trace[i], fit.trace[i - 1]);
}

TEST(FitType2Ml, AllZeroCountsAreDegenerate) {
  DrugEventTable t;
  for (int i = 0; i < 100; ++i) t.cells.push_back({"d" + std::to_string(i), "e", 0, 1e-3});
  EXPECT_TRUE(fit_type2_ml(t).degenerate);
  EXPECT_THROW(fit_type2_ml(DrugEventTable{}), DomainError);
}

TEST(PolyaGamma, MeanIdentity) {
  for (double b : {1.0, 2.0}) {
    for (double c : {0.0, 1.0, 3.0}) {
      RngStream rng(static_cast<std::uint64_t>(10 * b + c), 0);
      std::vector<double> v(100000);
      for (double& x : v) x = sample_polya_gamma(b, c, rng);
      const double se = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
      EXPECT_NEAR(sample_mean(v), oracle::pg_mean(b, c), 3.0 * se) << "b=" << b << " c=" << c;
      EXPECT_NEAR(polya_gamma_mean(b, c), oracle::pg_mean(b, c), 1e-12);
    }
  }
}

TEST(PolyaGamma, FractionalShapeAndBadInput) {
  RngStream rng(5, 0);
  std::vector<double> v(100000);
  for (double& x : v) x = sample_polya_gamma(2.5, 1.5, rng);
  EXPECT_NEAR(sample_mean(v), oracle::pg_mean(2.5, 1.5), 3.0 * std::sqrt(sample_variance(v) / 1e5));
  EXPECT_THROW(sample_polya_gamma(0.0, 1.0, rng), DomainError);
  EXPECT_THROW(sample_polya_gamma(1.0, NAN, rng), DomainError);
}

TEST(PgCovariateGibbs, InterceptOnlyRecovery) {
  RngStream rng(6, 0);
  const double intercept = 0.4;
  const auto table = nb_table(400, intercept, 1.0, rng);
  const auto res = pg_covariate_gibbs(table, Eigen::MatrixXd(400, 0), 1.0, chain(3, 4000, 500));
  const auto draws = res.draws.column("intercept");
  const double mcse = batch_means_se(draws);
  const double post_sd = std::sqrt(sample_variance(draws));
  EXPECT_NEAR(sample_mean(draws), intercept, 3.0 * std::hypot(mcse, post_sd));
  EXPECT_FALSE(res.rank_deficient);
}

TEST(PgCovariateGibbs, NullCovariateIntervalContainsZero) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(100 + seed, 0);
    const auto table = nb_table(200, 0.0, 1.0, rng);
    Eigen::MatrixXd x(200, 2);
    for (Eigen::Index i = 0; i < 200; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = 0.0;
    }
    const auto res = pg_covariate_gibbs(table, x, 1.0, chain(seed, 1500, 300));
    EXPECT_TRUE(res.rank_deficient);
    const auto ci = credible_intervals(res.draws, 0.95, "beta[2]");
    ASSERT_EQ(ci.size(), 1u);
    EXPECT_TRUE(ci[0].contains(0.0)) << "seed " << seed;
  }
}

TEST(PgCovariateGibbs, RecoversCovariateEffectAndIsDeterministic) {
  RngStream rng(7, 0);
  std::vector<double> xs(300), effect(300);
  for (std::size_t i = 0; i < 300; ++i) {
    xs[i] = rng.normal();
    effect[i] = 0.8 * xs[i];
  }
  const auto table = nb_table(300, 0.2, 1.0, rng, &effect);
  Eigen::MatrixXd x(300, 1);
  for (Eigen::Index i = 0; i < 300; ++i) x(i, 0) = xs[static_cast<std::size_t>(i)];
  const auto a = pg_covariate_gibbs(table, x, 1.0, chain(1, 3000, 500));
  const auto ci = credible_intervals(a.draws, 0.99, "beta[1]");
  EXPECT_TRUE(ci[0].contains(0.8));
  EXPECT_FALSE(ci[0].contains(0.0));
  const auto b = pg_covariate_gibbs(table, x, 1.0, chain(1, 3000, 500));
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_THROW(pg_covariate_gibbs(table, Eigen::MatrixXd(5, 1), 1.0, chain(1, 100, 10)), DomainError);
}
