#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "votesim/error.hpp"

namespace votesim {

using Point2 = std::array<double, 2>;

struct KernelParams {
  double gamma = 1.0;
};

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("rbf_kernel: dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] - y[i];
    d += t * t;
  }
  return d;
}

inline double rbf_kernel(std::span<const double> x, std::span<const double> y,
                         const KernelParams& params) {
  if (!(params.gamma > 0.0)) throw ConfigError("rbf_kernel: gamma must be positive");
  return std::exp(-params.gamma * squared_distance(x, y));
}

inline double rbf_kernel(const Point2& x, const Point2& y, const KernelParams& params) {
  return rbf_kernel(std::span<const double>(x), std::span<const double>(y), params);
}

struct OcSvmOptions {
  double tolerance = 1e-6;          // maximal KKT violation at termination
  std::size_t max_iterations = 100000;
};

// Trained one-class model. Only points with alpha > 0 are kept.
struct OcSvmModel {
  std::vector<Point2> support;
  std::vector<double> alpha;
  double rho = 0.0;
  double nu = 0.5;
  KernelParams kernel;
  std::size_t training_size = 0;
  std::size_t iterations = 0;
  double objective = 0.0;  // 0.5 * alpha' K alpha over the training set

  bool trained() const noexcept { return !support.empty(); }
  double upper_bound() const noexcept { return 1.0 / (nu * static_cast<double>(training_size)); }
};

// Sum_i alpha_i K(x_i, x); shared by training and scoring so that a training
// point reproduces its own gradient bit for bit.
inline double kernel_expansion(const OcSvmModel& model, const Point2& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.support.size(); ++i)
    s += model.alpha[i] * rbf_kernel(model.support[i], x, model.kernel);
  return s;
}

inline double decision(const OcSvmModel& model, const Point2& x) {
  if (!model.trained()) throw Error("decision: model is not trained");
  return kernel_expansion(model, x) - model.rho;
}

enum class Novelty { inlier, outlier };

inline Novelty predict(const OcSvmModel& model, const Point2& x) {
  return decision(model, x) >= 0.0 ? Novelty::inlier : Novelty::outlier;
}

// Solves min 0.5 a'Ka  s.t.  0 <= a_i <= 1/(nu n), sum a_i = 1 by pairwise
// updates on the maximal KKT-violating pair.
inline OcSvmModel fit_ocsvm(std::span<const Point2> points, double nu, const KernelParams& params,
                            const OcSvmOptions& opt = {}) {
  const std::size_t n = points.size();
  if (n == 0) throw ConfigError("fit_ocsvm: no training points");
  if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("fit_ocsvm: nu must be in (0, 1]");
  if (!(params.gamma > 0.0)) throw ConfigError("fit_ocsvm: gamma must be positive");
  const double upper = 1.0 / (nu * static_cast<double>(n));

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    K[i * n + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) K[i * n + j] = K[j * n + i] = rbf_kernel(points[i], points[j], params);
  }

  // Feasible start: as many coordinates at the bound as fit, remainder on the next.
  std::vector<double> a(n, 0.0);
  double left = 1.0;
  for (std::size_t i = 0; i < n && left > 0.0; ++i) {
    a[i] = std::min(upper, left);
    left -= a[i];
  }
  if (left > 0.0) a[n - 1] += left;  // rounding residue; nu * n <= n keeps this tiny

  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (a[i] != 0.0)
      for (std::size_t j = 0; j < n; ++j) g[j] += a[i] * K[i * n + j];

  auto can_grow = [&](std::size_t i) { return a[i] < upper; };
  auto can_shrink = [&](std::size_t i) { return a[i] > 0.0; };

  std::size_t it = 0;
  double violation = 0.0;
  for (;; ++it) {
    // grow: smallest gradient among a < C; shrink: largest among a > 0.
    std::size_t up = n, down = n;
    double gmin = std::numeric_limits<double>::infinity();
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (can_grow(i) && g[i] < gmin) {
        gmin = g[i];
        up = i;
      }
      if (can_shrink(i) && g[i] > gmax) {
        gmax = g[i];
        down = i;
      }
    }
    violation = (up == n || down == n) ? 0.0 : gmax - gmin;
    if (violation <= opt.tolerance) break;
    if (it >= opt.max_iterations) {
      std::ostringstream os;
      os << "fit_ocsvm: no convergence after " << it << " iterations (KKT violation " << violation
         << ")";
      throw ConvergenceError(os.str(), violation);
    }
    const double curvature =
        std::max(K[up * n + up] + K[down * n + down] - 2.0 * K[up * n + down], 1e-12);
    double step = (gmax - gmin) / curvature;
    step = std::min({step, upper - a[up], a[down]});
    const double old_up = a[up], old_down = a[down];
    a[up] += step;
    a[down] -= step;
    // Snap to the bounds to keep the active sets exact.
    if (upper - a[up] <= 1e-15 * upper) a[up] = upper;
    if (a[down] <= 1e-15 * upper) a[down] = 0.0;
    const double du = a[up] - old_up, dd = a[down] - old_down;
    for (std::size_t j = 0; j < n; ++j) g[j] += du * K[up * n + j] + dd * K[down * n + j];
  }

  OcSvmModel model;
  model.nu = nu;
  model.kernel = params;
  model.training_size = n;
  model.iterations = it;
  for (std::size_t i = 0; i < n; ++i)
    if (a[i] > 0.0) {
      model.support.push_back(points[i]);
      model.alpha.push_back(a[i]);
    }

  // Recompute gradients through the scoring path; rho is the mean over margin
  // support points, clamped to their range.
  double sum = 0.0, lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity(), bound_max = hi;
  std::size_t free_count = 0;
  double objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = kernel_expansion(model, points[i]);
    objective += 0.5 * a[i] * gi;
    if (a[i] > 0.0 && a[i] < upper) {
      sum += gi;
      lo = std::min(lo, gi);
      hi = std::max(hi, gi);
      ++free_count;
    } else if (a[i] > 0.0) {
      bound_max = std::max(bound_max, gi);
    }
  }
  model.rho = free_count ? std::clamp(sum / static_cast<double>(free_count), lo, hi) : bound_max;
  model.objective = objective;
  return model;
}

}  // namespace votesim
