#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ebhb/errors.hpp"

namespace ebhb {

/// Retained MCMC draws, stored draw-major (row = draw, column = parameter).
class PosteriorDraws {
 public:
  PosteriorDraws() = default;
  PosteriorDraws(std::vector<std::string> names, std::size_t burn_in, std::size_t thin,
                 std::uint64_t seed)
      : names_(std::move(names)), burn_in_(burn_in), thin_(thin), seed_(seed) {}

  void reserve(std::size_t rows) { values_.reserve(rows * names_.size()); }

  template <typename Row>
  void push_row(const Row& row) {
    detail::require(row.size() == names_.size(), "draw row has the wrong width");
    for (double v : row) {
      if (!std::isfinite(v)) throw NumericError("sampler produced a non-finite draw");
      values_.push_back(v);
    }
    ++rows_;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  std::size_t burn_in() const { return burn_in_; }
  std::size_t thin() const { return thin_; }
  std::uint64_t seed() const { return seed_; }

  double at(std::size_t row, std::size_t col) const { return values_[row * names_.size() + col]; }
  const std::vector<double>& values() const { return values_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j)
      if (names_[j] == name) return j;
    return std::nullopt;
  }

  std::size_t require_index(std::string_view name) const {
    auto j = index_of(name);
    if (!j) throw DomainError("no parameter named " + std::string(name));
    return *j;
  }

  std::vector<double> column(std::size_t col) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, col);
    return out;
  }
  std::vector<double> column(std::string_view name) const { return column(require_index(name)); }

  double mean(std::size_t col) const {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += at(r, col);
    return s / static_cast<double>(rows_);
  }
  double mean(std::string_view name) const { return mean(require_index(name)); }

  friend bool operator==(const PosteriorDraws&, const PosteriorDraws&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::size_t rows_ = 0;
  std::size_t burn_in_ = 0;
  std::size_t thin_ = 1;
  std::uint64_t seed_ = 0;
};

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double sample_variance(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Quantile with linear interpolation between order statistics (type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Monte Carlo standard error of the chain mean by non-overlapping batch
/// means; default batch count is floor(sqrt(n)).
inline double batch_means_se(const std::vector<double>& chain, std::size_t batches = 0) {
  const std::size_t n = chain.size();
  detail::require(n >= 4, "batch means needs at least 4 draws");
  if (batches == 0) batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  batches = std::clamp<std::size_t>(batches, 2, n / 2);
  const std::size_t size = n / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) s += chain[i];
    means[b] = s / static_cast<double>(size);
  }
  return std::sqrt(sample_variance(means) / static_cast<double>(batches));
}

/// n * var / (n * se^2) with the batch-means standard error.
inline double effective_sample_size(const std::vector<double>& chain) {
  const double se = batch_means_se(chain);
  const double var = sample_variance(chain);
  if (se == 0.0) return static_cast<double>(chain.size());
  return var / (se * se);
}

struct CredibleInterval {
  std::string param;
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double v) const { return v >= lower && v <= upper; }
  double width() const { return upper - lower; }
};

/// Equal-tailed intervals from empirical chain quantiles, for every
/// parameter whose name starts with `param_prefix` (empty = all).
inline std::vector<CredibleInterval> credible_intervals(const PosteriorDraws& draws, double level,
                                                        std::string_view param_prefix = {}) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("credible level must lie in (0, 1)");
  detail::require(draws.rows() >= 100, "credible intervals need at least 100 retained draws");
  std::vector<CredibleInterval> out;
  const double tail = 0.5 * (1.0 - level);
  for (std::size_t j = 0; j < draws.cols(); ++j) {
    const std::string& name = draws.names()[j];
    if (!name.starts_with(param_prefix)) continue;
    std::vector<double> col = draws.column(j);
    std::sort(col.begin(), col.end());
    out.push_back({name, quantile_sorted(col, tail), quantile_sorted(col, 1.0 - tail)});
  }
  return out;
}

}  // namespace ebhb
