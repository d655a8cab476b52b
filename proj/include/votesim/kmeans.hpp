#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "votesim/error.hpp"
#include "votesim/random.hpp"

namespace votesim {

struct ClusterModel {
  std::size_t k = 0;
  std::vector<int> assignment;  // region row -> cluster id in [0, k)
  Eigen::MatrixXd centroids;    // k x d
  double objective = 0.0;       // sum of squared distances to assigned centroids
  std::vector<double> objective_trace;
  std::size_t empty_cluster_events = 0;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (int a : assignment) ++s[static_cast<std::size_t>(a)];
    return s;
  }
};

namespace detail {

inline double sq_dist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::MatrixXd& C, Eigen::Index c) {
  return (X.row(i) - C.row(c)).squaredNorm();
}

inline double kmeans_objective(const Eigen::MatrixXd& X, const std::vector<int>& assign,
                               const Eigen::MatrixXd& C) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) s += sq_dist(X, i, C, assign[static_cast<std::size_t>(i)]);
  return s;
}

inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& X, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(X.rows());
  Eigen::MatrixXd C(static_cast<Eigen::Index>(k), X.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t pick = uniform_index(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    C.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(pick));
    taken[pick] = 1;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(X, static_cast<Eigen::Index>(i), C, static_cast<Eigen::Index>(c)));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      // All remaining mass is zero: duplicate points; choose an unused row.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) free.push_back(i);
      pick = free.empty() ? uniform_index(rng, n) : free[uniform_index(rng, free.size())];
    }
  }
  return C;
}

inline ClusterModel lloyd(const Eigen::MatrixXd& X, Eigen::MatrixXd C, std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto k = static_cast<std::size_t>(C.rows());
  ClusterModel m;
  m.k = k;
  m.assignment.assign(n, -1);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(X, static_cast<Eigen::Index>(i), C, static_cast<Eigen::Index>(c));
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      if (m.assignment[i] != best) {
        m.assignment[i] = best;
        changed = true;
      }
    }
    // Empty clusters take the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> count(k, 0);
      for (int a : m.assignment) ++count[static_cast<std::size_t>(a)];
      if (count[c] > 0) continue;
      std::size_t far = n;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[static_cast<std::size_t>(m.assignment[i])] < 2) continue;
        const double d = sq_dist(X, static_cast<Eigen::Index>(i), C, m.assignment[i]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      if (far == n) break;
      m.assignment[far] = static_cast<int>(c);
      C.row(static_cast<Eigen::Index>(c)) = X.row(static_cast<Eigen::Index>(far));
      ++m.empty_cluster_events;
      changed = true;
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(C.rows(), C.cols());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      next.row(m.assignment[i]) += X.row(static_cast<Eigen::Index>(i));
      ++count[static_cast<std::size_t>(m.assignment[i])];
    }
    for (std::size_t c = 0; c < k; ++c)
      next.row(static_cast<Eigen::Index>(c)) = count[c] ? Eigen::RowVectorXd(next.row(static_cast<Eigen::Index>(c)) / static_cast<double>(count[c]))
                                                         : Eigen::RowVectorXd(C.row(static_cast<Eigen::Index>(c)));
    C = next;
    m.objective_trace.push_back(kmeans_objective(X, m.assignment, C));
    if (!changed) break;
  }
  m.centroids = C;
  m.objective = kmeans_objective(X, m.assignment, C);
  return m;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeds; the best of `restarts` runs by
// objective is returned.
inline ClusterModel cluster_regions(const Eigen::MatrixXd& X, std::size_t k, std::size_t restarts,
                                    std::uint64_t seed, std::size_t max_iter = 300) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (k < 1 || k > n) throw ConfigError("cluster_regions: k must be in [1, n_regions]");
  restarts = std::max<std::size_t>(restarts, 1);
  ClusterModel best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = make_rng(seed, Stream::kmeans, {k, r});
    auto m = detail::lloyd(X, detail::kmeanspp_seed(X, k, rng), max_iter);
    if (m.objective < best.objective) best = std::move(m);
  }
  return best;
}

// Mean silhouette; singleton clusters contribute 0.
inline double mean_silhouette(const Eigen::MatrixXd& X, const std::vector<int>& assign, std::size_t k) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (k < 2 || n < 2) return 0.0;
  std::vector<std::size_t> size(k, 0);
  for (int a : assign) ++size[static_cast<std::size_t>(a)];
  double total = 0.0;
  std::vector<double> dsum(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dsum.begin(), dsum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        dsum[static_cast<std::size_t>(assign[j])] +=
            (X.row(static_cast<Eigen::Index>(i)) - X.row(static_cast<Eigen::Index>(j))).norm();
    const auto own = static_cast<std::size_t>(assign[i]);
    if (size[own] < 2) continue;
    const double a = dsum[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != own && size[c] > 0) b = std::min(b, dsum[c] / static_cast<double>(size[c]));
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

// k in [k_min, k_max] (capped at n - 1) maximizing the mean silhouette; ties
// keep the smaller k.
inline std::size_t choose_k(const Eigen::MatrixXd& X, std::size_t k_min, std::size_t k_max,
                            std::size_t restarts, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 3) return 1;
  k_max = std::min(k_max, n - 1);
  std::size_t best_k = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = std::max<std::size_t>(k_min, 2); k <= k_max; ++k) {
    const auto m = cluster_regions(X, k, restarts, seed);
    const double s = mean_silhouette(X, m.assignment, k);
    if (s > best) {
      best = s;
      best_k = k;
    }
  }
  return best_k;
}

// Folds clusters with fewer than `min_size` members into the cluster with the
// nearest centroid, smallest first, then relabels ids contiguously.
inline ClusterModel merge_small_clusters(ClusterModel m, const Eigen::MatrixXd& X, std::size_t min_size) {
  for (;;) {
    const auto sizes = m.sizes();
    std::size_t live = 0, small = m.k;
    for (std::size_t c = 0; c < m.k; ++c) {
      if (sizes[c] == 0) continue;
      ++live;
      if (sizes[c] < min_size && (small == m.k || sizes[c] < sizes[small])) small = c;
    }
    if (small == m.k || live < 2) break;
    std::size_t target = m.k;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m.k; ++c) {
      if (c == small || sizes[c] == 0) continue;
      const double d = (m.centroids.row(static_cast<Eigen::Index>(c)) - m.centroids.row(static_cast<Eigen::Index>(small))).squaredNorm();
      if (d < bd) {
        bd = d;
        target = c;
      }
    }
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(X.cols());
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < m.assignment.size(); ++i) {
      if (m.assignment[i] == static_cast<int>(small)) m.assignment[i] = static_cast<int>(target);
      if (m.assignment[i] == static_cast<int>(target)) {
        sum += X.row(static_cast<Eigen::Index>(i));
        ++cnt;
      }
    }
    m.centroids.row(static_cast<Eigen::Index>(target)) = sum / static_cast<double>(cnt);
  }
  // Relabel.
  std::map<int, int> remap;
  for (int a : m.assignment)
    if (!remap.count(a)) remap[a] = 0;
  int next = 0;
  for (auto& [old, id] : remap) id = next++;
  Eigen::MatrixXd C(next, m.centroids.cols());
  for (auto& [old, id] : remap) C.row(id) = m.centroids.row(old);
  for (int& a : m.assignment) a = remap[a];
  m.k = static_cast<std::size_t>(next);
  m.centroids = C;
  m.objective = detail::kmeans_objective(X, m.assignment, C);
  return m;
}

}  // namespace votesim
