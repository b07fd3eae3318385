#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <variant>
#include <vector>

#include "ebhb/dist.hpp"
#include "ebhb/errors.hpp"
#include "ebhb/normal_means.hpp"
#include "ebhb/rng.hpp"

namespace ebhb {

struct NormalPopulation {
  double mean = 0.0;
  double sd = 1.0;
};

// Equal mixture of N(-c, sd^2) and N(c, sd^2).
struct TwoPointPopulation {
  double c = 1.0;
  double sd = 1.0;
};

// Resampling from a fixed sample.
struct CustomPopulation {
  std::vector<double> sample;
};

using Population = std::variant<NormalPopulation, TwoPointPopulation, CustomPopulation>;

struct PopulationSpec {
  Population population;
  std::size_t n = 1;           // observations per replicate dataset
  std::size_t replicates = 2;  // datasets drawn

  void validate() const {
    detail::require(n >= 1, "replicate size must be positive");
    detail::require(replicates >= 1, "replicates must be positive");
    std::visit(
        [](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, CustomPopulation>) {
            detail::require(!f.sample.empty(), "custom population needs a nonempty sample");
            for (double v : f.sample) detail::require_finite(v, "custom population value");
          } else {
            detail::require_positive(f.sd, "population sd");
            if constexpr (std::is_same_v<F, NormalPopulation>) detail::require_finite(f.mean, "population mean");
            else detail::require_finite(f.c, "two-point offset");
          }
        },
        population);
  }
};

inline double draw_population(const Population& pop, RngStream& rng) {
  return std::visit(
      [&rng](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, NormalPopulation>) {
          return rng.normal(f.mean, f.sd);
        } else if constexpr (std::is_same_v<F, TwoPointPopulation>) {
          const double centre = rng.uniform() < 0.5 ? -f.c : f.c;
          return rng.normal(centre, f.sd);
        } else {
          return f.sample[rng.uniform_index(f.sample.size())];
        }
      },
      pop);
}

/// Variance of a single draw from the population.
inline double population_variance(const Population& pop) {
  return std::visit(
      [](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, NormalPopulation>) {
          return f.sd * f.sd;
        } else if constexpr (std::is_same_v<F, TwoPointPopulation>) {
          return f.c * f.c + f.sd * f.sd;
        } else {
          double m = 0.0, s = 0.0;
          for (double v : f.sample) m += v;
          m /= static_cast<double>(f.sample.size());
          for (double v : f.sample) s += (v - m) * (v - m);
          return s / static_cast<double>(f.sample.size());
        }
      },
      pop);
}

struct NormalPrior {
  double mean = 0.0;
  double var = 1.0;
};

/// Replicate posteriors N(post_mean[r], post_var[r]) and their equal-weight
/// mixture (the population predictive) tabulated on a grid.
struct PopulationSummary {
  std::vector<double> post_mean;
  std::vector<double> post_var;
  std::vector<double> grid;
  std::vector<double> density;
};

inline constexpr std::size_t kPopulationGridSize = 512;

/// Monte-Carlo population predictive for theta ~ N(m0, v0), x_i | theta ~
/// N(theta, sigma^2): draw `replicates` datasets of size n from the
/// population, form each exact posterior and average them. The grid spans the
/// pooled mean +- 6 pooled sd.
inline PopulationSummary population_predictive_mc(const NormalPrior& prior, double sigma,
                                                  const PopulationSpec& spec, RngStream& rng) {
  detail::require_finite(prior.mean, "prior mean");
  detail::require_positive(prior.var, "prior variance");
  detail::require_positive(sigma, "sigma");
  spec.validate();

  const double dn = static_cast<double>(spec.n);
  const double prec = 1.0 / prior.var + dn / (sigma * sigma);
  PopulationSummary out;
  out.post_mean.reserve(spec.replicates);
  out.post_var.assign(spec.replicates, 1.0 / prec);
  for (std::size_t r = 0; r < spec.replicates; ++r) {
    double sum = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) sum += draw_population(spec.population, rng);
    out.post_mean.push_back((prior.mean / prior.var + sum / (sigma * sigma)) / prec);
  }

  double mean = 0.0, second = 0.0;
  for (std::size_t r = 0; r < spec.replicates; ++r) {
    mean += out.post_mean[r];
    second += out.post_var[r] + out.post_mean[r] * out.post_mean[r];
  }
  const double dr = static_cast<double>(spec.replicates);
  mean /= dr;
  const double sd = std::sqrt(std::max(second / dr - mean * mean, 1.0 / prec));
  out.grid = linspace(mean - 6.0 * sd, mean + 6.0 * sd, kPopulationGridSize);
  out.density.assign(kPopulationGridSize, 0.0);
  for (std::size_t g = 0; g < kPopulationGridSize; ++g) {
    double acc = 0.0;
    for (std::size_t r = 0; r < spec.replicates; ++r)
      acc += std::exp(normal_logpdf(out.grid[g], out.post_mean[r], std::sqrt(out.post_var[r])));
    out.density[g] = acc / dr;
  }
  return out;
}

struct VarianceDecomposition {
  double within = 0.0;   // average replicate posterior variance
  double between = 0.0;  // variance of the replicate posterior means
  double total = 0.0;    // within + between, the variance of the mixture
};

inline VarianceDecomposition variance_decomposition(const PopulationSummary& summary) {
  const std::size_t r = summary.post_mean.size();
  detail::require(r >= 1 && summary.post_var.size() == r, "summary has no replicates");
  const double dr = static_cast<double>(r);
  double mean = 0.0, within = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    mean += summary.post_mean[i];
    within += summary.post_var[i];
  }
  mean /= dr;
  double between = 0.0;
  for (double m : summary.post_mean) between += (m - mean) * (m - mean);
  VarianceDecomposition out;
  out.within = within / dr;
  out.between = between / dr;
  out.total = out.within + out.between;
  return out;
}

}  // namespace ebhb
