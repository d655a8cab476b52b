#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "votesim/detector.hpp"
#include "votesim/kmeans.hpp"
#include "votesim/regression.hpp"
#include "votesim/votecast.hpp"

namespace votesim {

// How eps is set per cluster when it is not given explicitly.
enum class EpsRule {
  k_distance,  // quantile of the distances to the (min_pts - 1)-th nearest neighbour
  median_nn,   // factor * median nearest-neighbour distance
};

struct DensityParams {
  std::optional<double> eps;  // unset: derived per cluster by `rule`
  std::size_t min_pts = 3;
  EpsRule rule = EpsRule::k_distance;
  double quantile = 0.95;
  double factor = 1.5;
};

inline const char* to_string(EpsRule r) { return r == EpsRule::k_distance ? "k_distance" : "median_nn"; }

inline EpsRule parse_eps_rule(const std::string& s) {
  if (s == "k_distance") return EpsRule::k_distance;
  if (s == "median_nn") return EpsRule::median_nn;
  throw ConfigError("unknown eps rule '" + s + "'");
}

// Density noise on a line: a point is core if at least min_pts values
// (itself included) lie within eps; noise is neither core nor within eps of
// a core point.
inline std::vector<bool> density_noise_1d(const std::vector<double>& values, double eps, std::size_t min_pts) {
  if (!(eps > 0.0)) throw ConfigError("density_noise_1d: eps must be positive");
  if (min_pts < 1) throw ConfigError("density_noise_1d: min_pts must be >= 1");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = values[order[i]];

  std::vector<char> core(n, 0);
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (v[i] - v[lo] > eps) ++lo;
    if (hi < i) hi = i;
    while (hi + 1 < n && v[hi + 1] - v[i] <= eps) ++hi;
    core[i] = (hi - lo + 1) >= min_pts;
  }
  // Nearest core on each side.
  std::vector<bool> noise(n, false);
  std::optional<double> last_core;
  std::vector<std::optional<double>> left(n), right(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) last_core = v[i];
    left[i] = last_core;
  }
  last_core.reset();
  for (std::size_t i = n; i-- > 0;) {
    if (core[i]) last_core = v[i];
    right[i] = last_core;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    const bool reach = (left[i] && v[i] - *left[i] <= eps) || (right[i] && *right[i] - v[i] <= eps);
    noise[order[i]] = !reach;
  }
  return noise;
}

inline double median_nn_distance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  std::vector<double> nn(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    if (i > 0) d = std::min(d, v[i] - v[i - 1]);
    if (i + 1 < v.size()) d = std::min(d, v[i + 1] - v[i]);
    nn[i] = d;
  }
  std::sort(nn.begin(), nn.end());
  const std::size_t m = nn.size();
  return m % 2 ? nn[m / 2] : 0.5 * (nn[m / 2 - 1] + nn[m / 2]);
}

// Distance from each value to its m-th nearest other value (m >= 1), taken
// at the given quantile (nearest rank). Fewer than m + 1 values give 0.
inline double k_distance_quantile(const std::vector<double>& values, std::size_t m, double q) {
  if (m < 1) throw ConfigError("k_distance_quantile: m must be >= 1");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("k_distance_quantile: quantile outside [0, 1]");
  const std::size_t n = values.size();
  if (n < m + 1) return 0.0;
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  std::vector<double> kd(n);
  for (std::size_t i = 0; i < n; ++i) {
    // the m nearest others form a contiguous window around i in sorted order
    std::size_t lo = i, hi = i;
    for (std::size_t t = 0; t < m; ++t) {
      const bool left = lo > 0, right = hi + 1 < n;
      if (left && (!right || v[i] - v[lo - 1] <= v[hi + 1] - v[i])) --lo;
      else ++hi;
    }
    kd[i] = std::max(v[i] - v[lo], v[hi] - v[i]);
  }
  std::sort(kd.begin(), kd.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  return kd[std::clamp<std::size_t>(rank, 1, n) - 1];
}

inline double default_eps(const std::vector<double>& values, const DensityParams& p) {
  const double e = p.rule == EpsRule::k_distance ? k_distance_quantile(values, std::max<std::size_t>(p.min_pts, 2) - 1, p.quantile)
                                                 : p.factor * median_nn_distance(values);
  return std::max(e, 1e-9);
}

struct Baseline1Report {
  std::vector<int> region_ids;
  std::vector<int> cluster;
  std::vector<double> actual;
  std::vector<bool> flagged;
  std::vector<double> eps;  // per cluster

  std::size_t flagged_count() const { return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true)); }
};

// k-means on the demographic design, then density-based noise detection on
// the actual A-shares inside each cluster. No poll input.
inline Baseline1Report run_baseline1(const DemographicMatrix& X, const std::vector<double>& actual,
                                     std::size_t k, const DensityParams& params, std::uint64_t seed,
                                     std::size_t restarts = 10, std::size_t min_cluster_size = 4) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (actual.size() != n) throw Error("run_baseline1: size mismatch");
  if (params.eps && !(*params.eps > 0.0)) throw ConfigError("run_baseline1: eps must be positive");
  if (params.min_pts < 1) throw ConfigError("run_baseline1: min_pts must be >= 1");
  if (!(params.quantile >= 0.0 && params.quantile <= 1.0)) throw ConfigError("run_baseline1: quantile outside [0, 1]");
  if (!(params.factor > 0.0)) throw ConfigError("run_baseline1: eps factor must be positive");

  std::vector<int> ids = X.region_ids;
  if (ids.size() != n) {
    ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  }
  const auto order = detail::canonical_order(ids);
  Eigen::MatrixXd Xs(X.values.rows(), X.values.cols());
  for (std::size_t i = 0; i < n; ++i) Xs.row(static_cast<Eigen::Index>(i)) = X.values.row(static_cast<Eigen::Index>(order[i]));

  auto clusters = merge_small_clusters(cluster_regions(Xs, std::min(std::max<std::size_t>(k, 1), n), restarts, seed), Xs,
                                       min_cluster_size);

  Baseline1Report out;
  out.region_ids = ids;
  out.actual = actual;
  out.cluster.assign(n, 0);
  out.flagged.assign(n, false);
  for (std::size_t c = 0; c < clusters.k; ++c) {
    std::vector<std::size_t> rows;
    std::vector<double> vals;
    for (std::size_t i = 0; i < n; ++i)
      if (clusters.assignment[i] == static_cast<int>(c)) {
        rows.push_back(order[i]);
        vals.push_back(actual[order[i]]);
      }
    const double eps = params.eps ? *params.eps : default_eps(vals, params);
    out.eps.push_back(eps);
    const auto noise = density_noise_1d(vals, eps, params.min_pts);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      out.cluster[rows[j]] = static_cast<int>(c);
      out.flagged[rows[j]] = noise[j];
    }
  }
  return out;
}

}  // namespace votesim
