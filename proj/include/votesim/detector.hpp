#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "votesim/error.hpp"
#include "votesim/kmeans.hpp"
#include "votesim/ocsvm.hpp"
#include "votesim/polling.hpp"
#include "votesim/population.hpp"
#include "votesim/regression.hpp"
#include "votesim/votecast.hpp"

namespace votesim {

// Category fractions per region, dropping the first category of each
// attribute as the reference level.
inline DemographicMatrix build_design_matrix(const Population& pop) {
  const auto& schema = pop.schema;
  std::size_t cols = 0;
  for (std::size_t a = 0; a < schema.size(); ++a) cols += schema.category_count(a) - 1;
  DemographicMatrix X;
  X.values.resize(static_cast<Eigen::Index>(pop.regions.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t a = 0; a < schema.size(); ++a)
    for (std::size_t c = 1; c < schema.category_count(a); ++c)
      X.names.push_back(schema.attribute(a).name + "=" + schema.attribute(a).labels[c]);
  for (std::size_t r = 0; r < pop.regions.size(); ++r) {
    const auto profile = region_demographics(pop.regions[r], schema);
    Eigen::Index j = 0;
    for (std::size_t a = 0; a < schema.size(); ++a)
      for (std::size_t c = 1; c < schema.category_count(a); ++c)
        X.values(static_cast<Eigen::Index>(r), j++) = profile.fractions[a][c];
    X.region_ids.push_back(pop.regions[r].region_id);
  }
  for (Eigen::Index j = 0; j < X.values.cols(); ++j) {
    const auto col = X.values.col(j);
    if (col.size() == 0 || (col.array() == col(0)).all()) X.constant_columns.push_back(static_cast<std::size_t>(j));
  }
  return X;
}

// Per-cell A-share of a poll. Cells without respondents take the share pooled
// over one attribute (last attribute tried first), else the global share.
struct PollCellShares {
  std::vector<double> share;
  std::size_t fallback_cells = 0;
};

inline PollCellShares poll_cell_shares(const PollTable& poll, const AttributeSchema& schema) {
  if (poll.cell_count() != schema.cell_count()) throw Error("extrapolate_poll: poll does not match schema");
  const double total = poll.total();
  if (!(total > 0.0)) throw Error("extrapolate_poll: poll is empty");
  const double global = poll.total_a() / total;
  PollCellShares out;
  out.share.resize(poll.cell_count());
  for (std::size_t cell = 0; cell < poll.cell_count(); ++cell) {
    const double n = poll.count_a[cell] + poll.count_b[cell];
    if (n > 0.0) {
      out.share[cell] = poll.count_a[cell] / n;
      continue;
    }
    ++out.fallback_cells;
    double s = global;
    const auto values = schema.cell_values(cell);
    for (std::size_t a = schema.size(); a-- > 0;) {
      double pa = 0.0, pn = 0.0;
      auto v = values;
      for (std::size_t c = 0; c < schema.category_count(a); ++c) {
        v[a] = c;
        const auto idx = schema.cell_index(v);
        pa += poll.count_a[idx];
        pn += poll.count_a[idx] + poll.count_b[idx];
      }
      if (pn > 0.0) {
        s = pa / pn;
        break;
      }
    }
    out.share[cell] = s;
  }
  return out;
}

// Independence extrapolation: z = sum over cells of (product of the region's
// marginal fractions) * (cell A-share).
inline double extrapolate_poll(const PollCellShares& shares, const DemographicProfile& profile,
                               const AttributeSchema& schema) {
  if (profile.fractions.size() != schema.size()) throw Error("extrapolate_poll: profile does not match schema");
  double z = 0.0;
  std::vector<std::size_t> v(schema.size(), 0);
  for (std::size_t cell = 0; cell < shares.share.size(); ++cell) {
    double w = 1.0;
    for (std::size_t a = 0; a < schema.size(); ++a) w *= profile.fractions[a][v[a]];
    z += w * shares.share[cell];
    for (std::size_t a = schema.size(); a-- > 0;) {
      if (++v[a] < schema.category_count(a)) break;
      v[a] = 0;
    }
  }
  return std::clamp(z, 0.0, 1.0);
}

inline double extrapolate_poll(const PollTable& poll, const DemographicProfile& profile,
                               const AttributeSchema& schema) {
  return extrapolate_poll(poll_cell_shares(poll, schema), profile, schema);
}

// Variance-scaled width: 1 / (2 * variance of all inputs).
inline KernelParams default_kernel(std::span<const Point2> points) {
  double mean = 0.0;
  for (const auto& p : points) mean += p[0] + p[1];
  mean /= 2.0 * static_cast<double>(points.size());
  double var = 0.0;
  for (const auto& p : points) var += (p[0] - mean) * (p[0] - mean) + (p[1] - mean) * (p[1] - mean);
  var /= 2.0 * static_cast<double>(points.size());
  return KernelParams{var > 0.0 ? 1.0 / (2.0 * var) : 1.0};
}

inline std::vector<OcSvmModel> train_cluster_svms(const std::vector<double>& y_hat,
                                                  const std::vector<double>& z_hat,
                                                  const ClusterModel& clusters, double nu,
                                                  std::optional<KernelParams> params,
                                                  const OcSvmOptions& opt = {}) {
  if (y_hat.size() != clusters.assignment.size() || z_hat.size() != clusters.assignment.size())
    throw Error("train_cluster_svms: input size mismatch");
  std::vector<OcSvmModel> models;
  for (std::size_t c = 0; c < clusters.k; ++c) {
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < y_hat.size(); ++i)
      if (clusters.assignment[i] == static_cast<int>(c)) pts.push_back({y_hat[i], z_hat[i]});
    if (pts.empty()) throw Error("train_cluster_svms: cluster " + std::to_string(c) + " is empty");
    try {
      models.push_back(fit_ocsvm(pts, nu, params ? *params : default_kernel(pts), opt));
    } catch (const Error& e) {
      throw Error("cluster " + std::to_string(c) + ": " + e.what());
    }
  }
  return models;
}

// Test-time embedding of a region's actual result.
enum class ObservationMode {
  yhat_actual,  // (y_hat, actual)
  zhat_actual,  // (z_hat, actual)
};

struct RegionDetection {
  int region_id = 0;
  int cluster = 0;
  double y_hat = 0.0;
  double z_hat = 0.0;
  double actual = 0.0;
  double decision = 0.0;
  bool flagged = false;
};

struct DetectionReport {
  std::vector<RegionDetection> regions;
  double nu = 0.0;
  std::vector<double> gammas;  // per cluster
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> selected;
  std::vector<double> beta;
  ObservationMode observation = ObservationMode::yhat_actual;
  std::size_t poll_fallback_cells = 0;
  std::size_t empty_cluster_events = 0;

  std::size_t flagged_count() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.flagged ? 1 : 0;
    return n;
  }
};

inline Point2 observation_point(ObservationMode mode, double y_hat, double z_hat, double actual) {
  return mode == ObservationMode::yhat_actual ? Point2{y_hat, actual} : Point2{z_hat, actual};
}

inline DetectionReport detect(const std::vector<OcSvmModel>& models, const ClusterModel& clusters,
                              const std::vector<int>& region_ids, const std::vector<double>& y_hat,
                              const std::vector<double>& z_hat, const std::vector<double>& actual,
                              ObservationMode mode = ObservationMode::yhat_actual) {
  const std::size_t n = clusters.assignment.size();
  if (region_ids.size() != n || y_hat.size() != n || z_hat.size() != n || actual.size() != n)
    throw Error("detect: input size mismatch");
  if (models.size() != clusters.k) throw Error("detect: models do not cover every cluster");
  DetectionReport report;
  report.k = clusters.k;
  report.observation = mode;
  for (const auto& m : models) report.gammas.push_back(m.kernel.gamma);
  if (!models.empty()) report.nu = models.front().nu;
  for (std::size_t i = 0; i < n; ++i) {
    RegionDetection d;
    d.region_id = region_ids[i];
    d.cluster = clusters.assignment[i];
    if (d.cluster < 0 || static_cast<std::size_t>(d.cluster) >= models.size())
      throw Error("detect: region without a cluster");
    d.y_hat = y_hat[i];
    d.z_hat = z_hat[i];
    d.actual = actual[i];
    d.decision = decision(models[static_cast<std::size_t>(d.cluster)], observation_point(mode, d.y_hat, d.z_hat, d.actual));
    d.flagged = d.decision < 0.0;
    report.regions.push_back(d);
  }
  return report;
}

// Default RBF width: 1 / (2 * variance of a uniform share on [0, 1]).
inline constexpr double default_share_gamma = 6.0;

struct DetectorParams {
  double nu = 0.01;
  double gamma = default_share_gamma;
  bool gamma_scale = false;      // per-cluster 1 / (2 * input variance) instead of `gamma`
  std::optional<std::size_t> k;  // unset: silhouette over [k_min, k_max]
  std::size_t k_min = 2;
  std::size_t k_max = 12;
  std::size_t min_regions_per_cluster = 40;  // caps the silhouette search at n / this
  std::size_t restarts = 10;
  std::size_t min_cluster_size = 4;
  std::uint64_t seed = 0;
  ObservationMode observation = ObservationMode::yhat_actual;
  bool per_cluster_regression = false;
  OcSvmOptions svm;
};

namespace detail {
template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

// Row order sorted by region id, so results do not depend on input order.
inline std::vector<std::size_t> canonical_order(const std::vector<int>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  return order;
}
}  // namespace detail

// The full detector: stepwise AIC selection and OLS on the actual shares,
// k-means on the selected variables, poll extrapolation, one one-class SVM
// per cluster on (y_hat, z_hat), and scoring of the actual results.
inline DetectionReport run_pipeline(const Population& pop, const RegionResults& actual,
                                    const PollTable& poll, const DetectorParams& params,
                                    std::vector<OcSvmModel>* models_out = nullptr) {
  if (actual.region_count() != pop.regions.size())
    throw PipelineError("input", "results do not match population");
  std::vector<int> ids;
  for (const auto& r : pop.regions) ids.push_back(r.region_id);
  const auto order = detail::canonical_order(ids);
  const std::size_t n = order.size();

  const auto full = detail::stage("design_matrix", [&] {
    auto X = build_design_matrix(pop);
    DemographicMatrix sorted;
    sorted.values.resize(X.values.rows(), X.values.cols());
    for (std::size_t i = 0; i < n; ++i) {
      sorted.values.row(static_cast<Eigen::Index>(i)) = X.values.row(static_cast<Eigen::Index>(order[i]));
      sorted.region_ids.push_back(X.region_ids[order[i]]);
    }
    sorted.names = X.names;
    sorted.constant_columns = X.constant_columns;
    return sorted;
  });
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = actual.share_a[order[i]];

  const auto selected = detail::stage("select_variables", [&] { return select_variables(full, y); });
  auto regression = detail::stage("fit_regression", [&] { return fit_regression(full, y, selected); });

  ClusterModel clusters = detail::stage("cluster_regions", [&] {
    // With nothing selected, cluster on every non-constant variable.
    std::vector<std::size_t> cols = selected;
    if (cols.empty())
      for (Eigen::Index j = 0; j < full.cols(); ++j)
        if (std::find(full.constant_columns.begin(), full.constant_columns.end(), static_cast<std::size_t>(j)) ==
            full.constant_columns.end())
          cols.push_back(static_cast<std::size_t>(j));
    const Eigen::MatrixXd Xc = cols.empty() ? Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1)
                                            : full.select(cols).values;
    const std::size_t k_cap = std::min(params.k_max, n / std::max<std::size_t>(params.min_regions_per_cluster, 1));
    const std::size_t k = params.k ? std::min(*params.k, n)
                          : k_cap < 2 ? 1
                                      : choose_k(Xc, params.k_min, k_cap, params.restarts, params.seed);
    auto m = cluster_regions(Xc, std::max<std::size_t>(k, 1), params.restarts, params.seed);
    return merge_small_clusters(std::move(m), Xc, params.min_cluster_size);
  });

  std::vector<double> y_hat(regression.fitted.data(), regression.fitted.data() + n);
  if (params.per_cluster_regression) {
    detail::stage("fit_regression", [&] {
      for (std::size_t c = 0; c < clusters.k; ++c) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
          if (clusters.assignment[i] == static_cast<int>(c)) rows.push_back(i);
        if (rows.size() <= selected.size() + 2) continue;
        DemographicMatrix Xs;
        Xs.values.resize(static_cast<Eigen::Index>(rows.size()), full.cols());
        Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t j = 0; j < rows.size(); ++j) {
          Xs.values.row(static_cast<Eigen::Index>(j)) = full.values.row(static_cast<Eigen::Index>(rows[j]));
          ys(static_cast<Eigen::Index>(j)) = y(static_cast<Eigen::Index>(rows[j]));
        }
        try {
          const auto local = fit_regression(Xs, ys, selected);
          for (std::size_t j = 0; j < rows.size(); ++j) y_hat[rows[j]] = local.fitted(static_cast<Eigen::Index>(j));
        } catch (const Error&) {
          // Collinear within the cluster: keep the global fit.
        }
      }
      return 0;
    });
  }

  std::size_t fallback = 0;
  const auto z_hat = detail::stage("extrapolate_poll", [&] {
    const auto shares = poll_cell_shares(poll, pop.schema);
    fallback = shares.fallback_cells;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i)
      z[i] = extrapolate_poll(shares, region_demographics(pop.regions[order[i]], pop.schema), pop.schema);
    return z;
  });

  const auto models = detail::stage("train_cluster_svms", [&] {
    std::optional<KernelParams> kp;
    if (!params.gamma_scale) kp = KernelParams{params.gamma};
    return train_cluster_svms(y_hat, z_hat, clusters, params.nu, kp, params.svm);
  });

  std::vector<double> act(n);
  std::vector<int> sorted_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    act[i] = actual.share_a[order[i]];
    sorted_ids[i] = ids[order[i]];
  }
  auto report = detail::stage("detect", [&] {
    return detect(models, clusters, sorted_ids, y_hat, z_hat, act, params.observation);
  });

  // Back to input order.
  std::vector<RegionDetection> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[order[i]] = report.regions[i];
  report.regions = std::move(rows);
  report.nu = params.nu;
  report.seed = params.seed;
  for (auto s : selected) report.selected.push_back(full.names[s]);
  report.beta.assign(regression.beta.data(), regression.beta.data() + regression.beta.size());
  report.poll_fallback_cells = fallback;
  report.empty_cluster_events = clusters.empty_cluster_events;
  if (models_out) *models_out = models;
  return report;
}

inline DetectionReport run_pipeline(const Population& pop, const Ballots& ballots, const PollTable& poll,
                                    const DetectorParams& params) {
  return run_pipeline(pop, tally(ballots, pop), poll, params);
}

}  // namespace votesim
