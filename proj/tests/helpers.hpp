#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "votesim/votesim.hpp"

namespace testutil {

using namespace votesim;

inline AttributeDef categorical(std::string name, std::vector<std::string> labels, std::vector<double> p) {
  AttributeDef d;
  d.name = std::move(name);
  d.labels = std::move(labels);
  d.probabilities = std::move(p);
  return d;
}

// Two-attribute schema: colour x size, 3 x 2 cells.
inline AttributeSchema small_schema() {
  return AttributeSchema({categorical("colour", {"red", "green", "blue"}, {0.2, 0.3, 0.5}),
                          categorical("size", {"s", "l"}, {0.6, 0.4})});
}

inline ElectionConfig census_config() {
  return load_config(std::string(VOTESIM_CONFIG_DIR) + "/census2000.json");
}

// A compact election on the census schema.
inline ElectionConfig small_config(std::size_t regions = 60, std::size_t pop = 30000) {
  auto cfg = census_config();
  cfg.n_regions = regions;
  cfg.population = pop;
  return cfg;
}

// Projected-gradient (FISTA) oracle for the one-class dual
//   min 0.5 a'Ka  s.t.  0 <= a_i <= C, sum a = 1,
// with exact projection onto the capped simplex by bisection.
inline std::vector<double> project_capped_simplex(const std::vector<double>& v, double C) {
  double lo = *std::min_element(v.begin(), v.end()) - C - 1.0;
  double hi = *std::max_element(v.begin(), v.end()) + 1.0;
  auto mass = [&](double t) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - t, 0.0, C);
    return s;
  };
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] - t, 0.0, C);
  return out;
}

struct QpOracle {
  std::vector<double> alpha;
  double rho = 0.0;
  double objective = 0.0;
  std::vector<Point2> points;
  double gamma = 1.0;

  double expansion(const Point2& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += alpha[i] * rbf_kernel(points[i], x, {gamma});
    return s;
  }
  double decision(const Point2& x) const { return expansion(x) - rho; }
};

inline QpOracle qp_oracle(const std::vector<Point2>& pts, double nu, double gamma, int iterations = 200000) {
  const std::size_t n = pts.size();
  const double C = 1.0 / (nu * static_cast<double>(n));
  Eigen::MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) K(i, j) = rbf_kernel(pts[i], pts[j], {gamma});
  const double L = std::max(K.cwiseAbs().rowwise().sum().maxCoeff(), 1e-12);
  std::vector<double> a = project_capped_simplex(std::vector<double>(n, 1.0 / n), C), y = a, prev = a;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), n);
    const Eigen::VectorXd g = K * ym;
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = y[i] - g(i) / L;
    prev = a;
    a = project_capped_simplex(step, C);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + (t - 1.0) / tn * (a[i] - prev[i]);
    t = tn;
    double moved = 0.0;
    for (std::size_t i = 0; i < n; ++i) moved = std::max(moved, std::abs(a[i] - prev[i]));
    if (moved < 1e-15 && it > 1000) break;
  }
  QpOracle o;
  o.alpha = a;
  o.points = pts;
  o.gamma = gamma;
  Eigen::Map<const Eigen::VectorXd> am(a.data(), n);
  const Eigen::VectorXd g = K * am;
  o.objective = 0.5 * am.dot(g);
  // rho from the KKT conditions: free points sit on the margin; otherwise the
  // interval between bound classes is closed by taking its upper end.
  double sum = 0.0;
  std::size_t free = 0;
  const double tol = 1e-7 * C;
  double bound_max = -1e300;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] > tol && a[i] < C - tol) {
      sum += g(i);
      ++free;
    } else if (a[i] >= C - tol) {
      bound_max = std::max(bound_max, g(i));
    }
  }
  o.rho = free ? sum / static_cast<double>(free) : bound_max;
  return o;
}

}  // namespace testutil
