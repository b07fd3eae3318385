#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ebhb/errors.hpp"

namespace ebhb {

/// Nonnegative least squares min ||A x - y|| subject to x >= 0, by the
/// Lawson-Hanson active set method with QR solves on the passive columns.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, std::size_t max_outer = 0) {
  const Eigen::Index m = a.cols();
  detail::require(a.rows() == y.size(), "nnls: dimension mismatch");
  if (max_outer == 0) max_outer = static_cast<std::size_t>(3 * m + 10);
  const double tol = 1e-10 * std::max(1.0, (a.transpose() * y).cwiseAbs().maxCoeff());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  const auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < m; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(idx[c]);
    const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(y);
    z.setZero(m);
    for (std::size_t c = 0; c < idx.size(); ++c) z[idx[c]] = sol[static_cast<Eigen::Index>(c)];
  };

  Eigen::VectorXd z(m);
  for (std::size_t outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd dual = a.transpose() * (y - a * x);
    Eigen::Index pick = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && dual[j] > best) {
        best = dual[j];
        pick = j;
      }
    }
    if (pick < 0) break;
    passive[static_cast<std::size_t>(pick)] = true;
    for (Eigen::Index inner = 0; inner <= m; ++inner) {
      solve_passive(z);
      double step = 1.0;
      bool feasible = true;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          feasible = false;
          const double denom = x[j] - z[j];
          if (denom > 0.0) step = std::min(step, x[j] / denom);
        }
      }
      if (feasible) {
        x = z;
        break;
      }
      x += step * (z - x);
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= 0.0) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
  }
  return x;
}

struct NelderMeadOptions {
  double initial_step = 0.5;
  // Stop once every vertex is within this max-norm distance of the best one.
  double xtol = 1e-8;
  std::size_t max_evals = 20000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
  // Best objective value after each simplex update; nonincreasing.
  std::vector<double> best_trace;
};

/// Unconstrained minimization by the Nelder-Mead simplex method with the
/// standard reflection, expansion, contraction and shrink coefficients.
/// Non-finite objective values are treated as +infinity.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> start, const NelderMeadOptions& opts = {}) {
  const std::size_t d = start.size();
  detail::require(d >= 1, "nelder_mead: empty start");
  NelderMeadResult res;
  const auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> pts(d + 1, start);
  std::vector<double> vals(d + 1);
  for (std::size_t i = 0; i < d; ++i) pts[i + 1][i] += opts.initial_step;
  for (std::size_t i = 0; i <= d; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), trial(d), trial2(d);
  while (res.evaluations < opts.max_evals) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];

    res.best_trace.push_back(vals[best]);
    double spread = 0.0;
    for (std::size_t i = 0; i <= d; ++i)
      for (std::size_t j = 0; j < d; ++j) spread = std::max(spread, std::fabs(pts[i][j] - pts[best][j]));
    if (spread <= opts.xtol) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j] / static_cast<double>(d);

    const auto along = [&](double t, std::vector<double>& out) {
      for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + t * (pts[worst][j] - centroid[j]);
    };
    along(-1.0, trial);
    const double fr = eval(trial);
    if (fr < vals[best]) {
      along(-2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    along(outside ? -0.5 : 0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < d; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

}  // namespace ebhb
