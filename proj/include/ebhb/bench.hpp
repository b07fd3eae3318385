#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ebhb/errors.hpp"
#include "ebhb/horseshoe.hpp"
#include "ebhb/mcmc.hpp"
#include "ebhb/normal_means.hpp"
#include "ebhb/npmle.hpp"
#include "ebhb/rng.hpp"
#include "ebhb/tweedie_f.hpp"

namespace ebhb {

/// Sparse normal-means design: ceil(sparsity n) coordinates equal `signal`,
/// the rest are 0, observed with N(0, sigma^2) noise.
struct SparseScenario {
  std::size_t n = 200;
  double sparsity = 0.05;
  double signal = 8.0;
  double sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    detail::require(n >= 1, "scenario size must be positive");
    detail::require(sparsity > 0.0 && sparsity <= 1.0, "sparsity must lie in (0, 1]");
    detail::require_finite(signal, "signal");
    detail::require_positive(sigma, "sigma");
  }

  std::string id() const {
    std::ostringstream os;
    os << "n" << n << "_s" << sparsity << "_a" << signal << "_sd" << sigma;
    return os.str();
  }

  std::size_t signal_count() const {
    const double raw = sparsity * static_cast<double>(n);
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
    return std::min(count, n);
  }
};

struct SparseSample {
  std::vector<double> theta;
  NormalMeansData data;
};

/// Draw (theta, x) for one replicate. Each replicate index has its own stream.
inline SparseSample simulate_sparse_means(const SparseScenario& scenario, std::uint64_t replicate = 0) {
  scenario.validate();
  RngStream rng(scenario.seed, replicate);
  std::vector<std::size_t> order(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) order[i] = i;
  rng.shuffle(order);
  SparseSample out;
  out.theta.assign(scenario.n, 0.0);
  for (std::size_t k = 0; k < scenario.signal_count(); ++k) out.theta[order[k]] = scenario.signal;
  out.data.sigma = scenario.sigma;
  out.data.x.resize(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) out.data.x[i] = out.theta[i] + scenario.sigma * rng.normal();
  return out;
}

/// FNV-1a over the bit patterns of sigma and x.
inline std::uint64_t dataset_hash(const NormalMeansData& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(data.sigma);
  for (double v : data.x) mix(v);
  return h;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct MethodOutput {
  std::vector<double> estimate;
  std::optional<std::vector<Interval>> intervals;
};

/// What a method may see besides the data. `truth` is only meant for
/// reference methods such as the oracle.
struct MethodContext {
  const std::vector<double>* truth = nullptr;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct Method {
  std::string name;
  std::function<MethodOutput(const NormalMeansData&, const MethodContext&)> fit;
};

struct BenchOptions {
  // Gibbs settings for the horseshoe methods; the seed is set per replicate.
  HorseshoeConfig gibbs;
  std::size_t fmodel_bins = 60;
  std::size_t fmodel_df = 5;
};

namespace detail {

inline std::vector<Interval> draw_intervals(const PosteriorDraws& draws, std::size_t n, double level) {
  const auto ci = credible_intervals(draws, level, "theta[");
  detail::require(ci.size() == n, "unexpected number of theta columns");
  std::vector<Interval> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {ci[i].lower, ci[i].upper};
  return out;
}

inline std::vector<double> draw_means(const PosteriorDraws& draws, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = draws.mean(i);
  return out;
}

inline MethodOutput horseshoe_output(const NormalMeansData& data, const MethodContext& ctx, HorseshoeConfig cfg,
                                     std::optional<double> tau) {
  cfg.seed = ctx.seed;
  cfg.tau_fixed = tau;
  const PosteriorDraws draws = gibbs_horseshoe(data, cfg);
  return {draw_means(draws, data.x.size()), draw_intervals(draws, data.x.size(), ctx.level)};
}

}  // namespace detail

/// Known method names: identity, oracle, fmodel, npmle, horseshoe,
/// horseshoe-plugin.
inline Method make_method(const std::string& name, const BenchOptions& opts = {}) {
  if (name == "identity") {
    return {name, [](const NormalMeansData& d, const MethodContext& ctx) {
              const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * ctx.level);
              MethodOutput out{d.x, std::vector<Interval>(d.x.size())};
              for (std::size_t i = 0; i < d.x.size(); ++i)
                (*out.intervals)[i] = {d.x[i] - z * d.sigma, d.x[i] + z * d.sigma};
              return out;
            }};
  }
  if (name == "oracle") {
    return {name, [](const NormalMeansData& d, const MethodContext& ctx) {
              detail::require(ctx.truth != nullptr && ctx.truth->size() == d.x.size(), "oracle needs the truth");
              MethodOutput out{*ctx.truth, std::vector<Interval>(d.x.size())};
              for (std::size_t i = 0; i < d.x.size(); ++i) (*out.intervals)[i] = {(*ctx.truth)[i], (*ctx.truth)[i]};
              return out;
            }};
  }
  if (name == "fmodel") {
    return {name, [opts](const NormalMeansData& d, const MethodContext&) {
              const MarginalFit m = fit_marginal(d, opts.fmodel_bins, opts.fmodel_df);
              MethodOutput out;
              out.estimate.reserve(d.x.size());
              for (double x : d.x) out.estimate.push_back(x + d.sigma * d.sigma * m.score(x).value);
              return out;
            }};
  }
  if (name == "npmle") {
    return {name, [](const NormalMeansData& d, const MethodContext&) {
              const NpmleFit fit = fit_npmle(d);
              const MixtureMarginal m(fit.prior, d.sigma);
              MethodOutput out;
              out.estimate.reserve(d.x.size());
              for (double x : d.x) out.estimate.push_back(m.posterior_mean(x));
              return out;
            }};
  }
  if (name == "horseshoe") {
    return {name, [opts](const NormalMeansData& d, const MethodContext& ctx) {
              return detail::horseshoe_output(d, ctx, opts.gibbs, std::nullopt);
            }};
  }
  if (name == "horseshoe-plugin") {
    return {name, [opts](const NormalMeansData& d, const MethodContext& ctx) {
              return detail::horseshoe_output(d, ctx, opts.gibbs, fit_tau_mml(d));
            }};
  }
  throw DomainError("unknown method: " + name);
}

struct RiskRow {
  std::string method;
  std::string scenario;
  double risk = 0.0;  // mean over replicates of |theta_hat - theta|^2 / n
  double se = 0.0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  std::vector<double> per_replicate;  // NaN where the method failed
};

struct RiskTable {
  std::vector<RiskRow> rows;
  std::vector<std::uint64_t> dataset_hashes;  // one per replicate
};

struct CoverageRow {
  std::string method;
  std::string scenario;
  double level = 0.95;
  double coverage = 0.0;    // over (coordinate, replicate) pairs
  double coverage_se = 0.0; // from the spread of per-replicate coverage
  double mean_width = 0.0;
  double width_se = 0.0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  std::vector<double> per_replicate_coverage;  // NaN where the method failed
  std::vector<double> per_replicate_width;
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
  std::vector<std::uint64_t> dataset_hashes;
};

namespace detail {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  double sum = 0.0;
  for (double x : v)
    if (!std::isnan(x)) {
      sum += x;
      ++out.count;
    }
  if (out.count == 0) return out;
  out.mean = sum / static_cast<double>(out.count);
  if (out.count > 1) {
    double ss = 0.0;
    for (double x : v)
      if (!std::isnan(x)) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(out.count - 1) / static_cast<double>(out.count));
  }
  return out;
}

// Runs every method on the replicate data and checks each saw the same bytes.
template <typename OnResult>
void run_replicates(const std::vector<Method>& methods, const SparseScenario& scenario, std::size_t replicates,
                    double level, std::vector<std::uint64_t>& hashes, OnResult&& on_result) {
  scenario.validate();
  detail::require(replicates >= 1, "replicates must be positive");
  detail::require(!methods.empty(), "no methods given");
  for (std::size_t r = 0; r < replicates; ++r) {
    const SparseSample sample = simulate_sparse_means(scenario, r);
    const std::uint64_t hash = dataset_hash(sample.data);
    hashes.push_back(hash);
    MethodContext ctx{&sample.theta, level, scenario.seed ^ (0x9e3779b97f4a7c15ULL * (r + 1))};
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (dataset_hash(sample.data) != hash) throw std::logic_error("dataset changed between method calls");
      std::optional<MethodOutput> out;
      try {
        out = methods[m].fit(sample.data, ctx);
        if (out->estimate.size() != sample.theta.size()) out.reset();
      } catch (const Error&) {
        out.reset();
      }
      on_result(r, m, sample, out);
    }
  }
}

}  // namespace detail

/// Mean squared error per coordinate for each method over seeded replicates.
/// A method that throws on a replicate is counted as a failure there.
inline RiskTable risk_bench(const std::vector<Method>& methods, const SparseScenario& scenario,
                            std::size_t replicates) {
  RiskTable table;
  table.rows.resize(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    table.rows[m].method = methods[m].name;
    table.rows[m].scenario = scenario.id();
    table.rows[m].per_replicate.assign(replicates, std::nan(""));
  }
  detail::run_replicates(methods, scenario, replicates, 0.95, table.dataset_hashes,
                         [&](std::size_t r, std::size_t m, const SparseSample& s, const std::optional<MethodOutput>& out) {
                           if (!out) return;
                           double loss = 0.0;
                           for (std::size_t i = 0; i < s.theta.size(); ++i) {
                             const double d = out->estimate[i] - s.theta[i];
                             loss += d * d;
                           }
                           table.rows[m].per_replicate[r] = loss / static_cast<double>(s.theta.size());
                         });
  for (auto& row : table.rows) {
    const auto ms = detail::mean_se(row.per_replicate);
    row.risk = ms.mean;
    row.se = ms.se;
    row.replicates = ms.count;
    row.failures = replicates - ms.count;
  }
  return table;
}

/// Empirical coverage and mean width of per-coordinate intervals at `level`.
inline CoverageTable coverage_bench(const std::vector<Method>& methods, const SparseScenario& scenario, double level,
                                    std::size_t replicates) {
  detail::require(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
  CoverageTable table;
  table.rows.resize(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    auto& row = table.rows[m];
    row.method = methods[m].name;
    row.scenario = scenario.id();
    row.level = level;
    row.per_replicate_coverage.assign(replicates, std::nan(""));
    row.per_replicate_width.assign(replicates, std::nan(""));
  }
  detail::run_replicates(methods, scenario, replicates, level, table.dataset_hashes,
                         [&](std::size_t r, std::size_t m, const SparseSample& s, const std::optional<MethodOutput>& out) {
                           if (!out || !out->intervals || out->intervals->size() != s.theta.size()) return;
                           double hit = 0.0, width = 0.0;
                           for (std::size_t i = 0; i < s.theta.size(); ++i) {
                             const Interval& iv = (*out->intervals)[i];
                             hit += (iv.lower <= s.theta[i] && s.theta[i] <= iv.upper) ? 1.0 : 0.0;
                             width += iv.upper - iv.lower;
                           }
                           const double n = static_cast<double>(s.theta.size());
                           table.rows[m].per_replicate_coverage[r] = hit / n;
                           table.rows[m].per_replicate_width[r] = width / n;
                         });
  for (auto& row : table.rows) {
    const auto cov = detail::mean_se(row.per_replicate_coverage);
    const auto wid = detail::mean_se(row.per_replicate_width);
    row.coverage = cov.mean;
    row.coverage_se = cov.se;
    row.mean_width = wid.mean;
    row.width_se = wid.se;
    row.replicates = cov.count;
    row.failures = replicates - cov.count;
  }
  return table;
}

}  // namespace ebhb
