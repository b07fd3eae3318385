#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ebhb/errors.hpp"

namespace ebhb {

/// Observations x_i ~ N(theta_i, sigma^2) with a common known sigma.
struct NormalMeansData {
  std::vector<double> x;
  double sigma = 1.0;

  void validate(std::size_t min_size = 1) const {
    detail::require_positive(sigma, "sigma");
    detail::require(x.size() >= min_size,
                    "need at least " + std::to_string(min_size) + " observations");
    for (double v : x) detail::require_finite(v, "observation");
  }
};

enum class MethodTag { FModel, NpmleG, Horseshoe, Exact };

inline std::string_view to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::FModel: return "FModel";
    case MethodTag::NpmleG: return "NpmleG";
    case MethodTag::Horseshoe: return "Horseshoe";
    case MethodTag::Exact: return "Exact";
  }
  return "Unknown";
}

/// Tabulated shrinkage map x -> estimate of E[theta | x].
struct ShrinkageRule {
  std::vector<double> grid;
  std::vector<double> values;
  MethodTag method_tag = MethodTag::Exact;
  // Grid points that fell outside the support of the fitted marginal.
  std::vector<std::size_t> extrapolated;

  void validate() const {
    detail::require(grid.size() == values.size(), "rule grid and values differ in length");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      detail::require_finite(grid[i], "rule grid point");
      if (!std::isfinite(values[i])) throw NumericError("rule value is not finite");
      if (i > 0 && !(grid[i] > grid[i - 1]))
        throw DomainError("rule grid must be strictly increasing");
    }
  }
};

inline void require_increasing_grid(const std::vector<double>& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::require_finite(grid[i], "grid point");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw DomainError("grid must be strictly increasing");
  }
}

/// Equispaced grid of `count` points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  detail::require(count >= 2, "linspace needs at least two points");
  detail::require(lo < hi, "linspace needs lo < hi");
  std::vector<double> g(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

struct DiagnosticReport {
  // Adjacent index pairs (i, i+1) where the rule decreases.
  std::vector<std::pair<std::size_t, std::size_t>> violations;
  bool is_monotone = true;
};

/// Under Gaussian noise every posterior mean is nondecreasing in x, so any
/// decrease certifies that the rule is not Bayes for any prior. A decrease
/// counts only when it exceeds `tol` (default: exact comparison).
inline DiagnosticReport monotonicity_diagnostic(const ShrinkageRule& rule, double tol = 0.0) {
  detail::require(rule.grid.size() == rule.values.size(), "rule grid and values differ in length");
  detail::require(rule.values.size() >= 3, "monotonicity diagnostic needs at least 3 grid points");
  detail::require(tol >= 0.0, "tolerance must be nonnegative");
  DiagnosticReport report;
  for (std::size_t i = 0; i + 1 < rule.values.size(); ++i)
    if (rule.values[i + 1] < rule.values[i] - tol) report.violations.emplace_back(i, i + 1);
  report.is_monotone = report.violations.empty();
  return report;
}

}  // namespace ebhb
