#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ebhb/dist.hpp"
#include "ebhb/rng.hpp"
#include "oracles.hpp"

using namespace ebhb;

TEST(NormalLogpdf, KnownValues) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(normal_logpdf(0.0, 0.0, 1.0), -0.9189385332046727, 1e-15);
  EXPECT_NEAR(normal_logpdf(2.0, 0.0, 1.0), -2.0 - half_log_2pi, 1e-14);
  for (double mu : {-3.0, 0.5, 7.0})
    for (double s : {0.1, 1.0, 4.0}) EXPECT_NEAR(normal_logpdf(mu, mu, s), -std::log(s) - half_log_2pi, 1e-14);
}

TEST(NormalLogpdf, RejectsBadInput) {
  EXPECT_THROW(normal_logpdf(0.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(normal_logpdf(0.0, 0.0, -1.0), DomainError);
  EXPECT_THROW(normal_logpdf(NAN, 0.0, 1.0), DomainError);
}

TEST(NormalLogpdf, IntegratesToOne) {
  for (double s : {0.3, 1.0, 2.5}) {
    const double total = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [s](double x) { return std::exp(normal_logpdf(x, 1.0, s)); }, -INFINITY, INFINITY, 15, 1e-12);
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(Digamma, KnownValues) {
  EXPECT_NEAR(digamma(1.0), -0.57721566490153286, 1e-14);
  EXPECT_NEAR(digamma(2.0), 0.42278433509846714, 1e-14);
  double psi10 = digamma(1.0);
  for (int k = 1; k <= 9; ++k) psi10 += 1.0 / k;
  EXPECT_NEAR(digamma(10.0), psi10, 1e-13);
}

TEST(Digamma, MatchesReferenceAndRecurrence) {
  RngStream rng(11, 0);
  for (int i = 0; i < 1000; ++i) {
    const double z = 0.1 + 99.9 * rng.uniform();
    const double ref = oracle::digamma(z);
    EXPECT_NEAR(digamma(z), ref, 1e-12 * std::max(1.0, std::fabs(ref)));
    const double lhs = digamma(z + 1.0);
    const double rhs = digamma(z) + 1.0 / z;
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::fabs(lhs)));
  }
  EXPECT_THROW(digamma(0.0), DomainError);
  EXPECT_THROW(digamma(-1.5), DomainError);
}

TEST(NbLogpmf, KnownValues) {
  EXPECT_NEAR(nb_logpmf(0, 2.5, 0.3), 2.5 * std::log(0.3), 1e-14);
  EXPECT_NEAR(nb_logpmf(1, 1.0, 0.5), std::log(0.25), 1e-14);
  // Recursive pmf ratio: p(n+1)/p(n) = (n + a)/(n + 1) (1 - p).
  double logp = 2.5 * std::log(0.4);
  for (int n = 0; n < 3; ++n) logp += std::log((n + 2.5) / (n + 1.0) * 0.6);
  EXPECT_NEAR(nb_logpmf(3, 2.5, 0.4), logp, 1e-13);
  EXPECT_NEAR(nb_logpmf(3, 2.5, 0.4), std::log(oracle::nb_pmf(3, 2.5, 0.4)), 1e-13);
}

TEST(NbLogpmf, SumsToOne) {
  for (auto [a, p] : {std::pair{0.5, 0.3}, std::pair{3.0, 0.7}, std::pair{10.0, 0.2}}) {
    double total = 0.0;
    for (std::uint64_t n = 0; n < 5000; ++n) total += std::exp(nb_logpmf(n, a, p));
    EXPECT_GE(total, 1.0 - 1e-10);
    EXPECT_LE(total, 1.0 + 1e-10);
  }
  EXPECT_THROW(nb_logpmf(1, 1.0, 1.0), DomainError);
  EXPECT_THROW(nb_logpmf(1, 0.0, 0.5), DomainError);
}

TEST(HalfCauchy, KnownValuesAndNormalization) {
  EXPECT_NEAR(half_cauchy_logpdf(0.0, 1.0), std::log(2.0 / std::numbers::pi), 1e-15);
  EXPECT_NEAR(half_cauchy_logpdf(1.0, 1.0), std::log(1.0 / std::numbers::pi), 1e-15);
  for (double s : {0.2, 3.0}) EXPECT_NEAR(half_cauchy_logpdf(s, s), std::log(1.0 / (std::numbers::pi * s)), 1e-14);
  EXPECT_THROW(half_cauchy_logpdf(-0.1, 1.0), DomainError);
  const double total = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double x) { return std::exp(half_cauchy_logpdf(x, 2.0)); }, 0.0, INFINITY, 20, 1e-12);
  EXPECT_NEAR(total, 1.0, 1e-8);
}

TEST(GammaParams, Validation) {
  EXPECT_NO_THROW((GammaParams{1.0, 2.0}.validate()));
  EXPECT_THROW((GammaParams{0.0, 2.0}.validate()), DomainError);
  EXPECT_THROW((GammaParams{1.0, -1.0}.validate()), DomainError);
  EXPECT_DOUBLE_EQ((GammaParams{3.0, 2.0}.mean()), 1.5);
}

TEST(RngStream, ReproducibleStreams) {
  RngStream a(123, 4), b(123, 4);
  for (int i = 0; i < 1000000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctStreamsLookIndependent) {
  RngStream a(123, 0), b(123, 1);
  const int n = 200000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  int equal = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform() - 0.5, y = b.uniform() - 0.5;
    sa += x;
    sb += y;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
    equal += (x == y);
  }
  const double corr = (sab / n - sa / n * sb / n) / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::fabs(corr), 4.0 / std::sqrt(n));
  EXPECT_EQ(equal, 0);
}

TEST(RngStream, VariateMoments) {
  RngStream rng(5, 9);
  const int n = 200000;
  double sn = 0, sn2 = 0, sg = 0, sp = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sg += rng.gamma(2.5, 2.0);
    sp += static_cast<double>(rng.poisson(30.0));
  }
  EXPECT_NEAR(sn / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sg / n, 1.25, 4.0 * std::sqrt(2.5 / 4.0 / n));
  EXPECT_NEAR(sp / n, 30.0, 4.0 * std::sqrt(30.0 / n));
}

TEST(LogSumExp, StableForLargeMagnitudes) {
  const std::vector<double> v{-1000.0, -1000.0};
  EXPECT_NEAR(log_sum_exp(v), -1000.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(log_add_exp(800.0, 800.0), 800.0 + std::log(2.0), 1e-12);
}
