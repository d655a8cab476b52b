#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "votesim/error.hpp"

namespace votesim {

// Region-level design: one row per region, one column per variable.
struct DemographicMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> names;
  std::vector<int> region_ids;
  std::vector<std::size_t> constant_columns;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  DemographicMatrix select(const std::vector<std::size_t>& columns) const {
    DemographicMatrix out;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(columns[j]));
      out.names.push_back(names.empty() ? std::to_string(columns[j]) : names[columns[j]]);
    }
    out.region_ids = region_ids;
    return out;
  }
};

struct RegressionModel {
  std::vector<std::size_t> selected;  // columns of the full design matrix
  Eigen::VectorXd beta;               // intercept first
  Eigen::VectorXd fitted;
  double rss = 0.0;
};

namespace detail {

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd D(X.rows(), static_cast<Eigen::Index>(cols.size()) + 1);
  D.col(0).setOnes();
  for (std::size_t j = 0; j < cols.size(); ++j)
    D.col(static_cast<Eigen::Index>(j) + 1) = X.col(static_cast<Eigen::Index>(cols[j]));
  return D;
}

struct LeastSquares {
  Eigen::VectorXd beta;
  double rss = 0.0;
  bool full_rank = false;
};

inline LeastSquares least_squares(const Eigen::MatrixXd& D, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  LeastSquares out;
  out.full_rank = qr.rank() == D.cols();
  if (!out.full_rank) return out;
  out.beta = qr.solve(y);
  out.rss = (y - D * out.beta).squaredNorm();
  return out;
}

}  // namespace detail

// AIC = n ln(RSS / n) + 2 (p + 1). RSS is floored at a tiny fraction of the
// total sum of squares so exact fits do not reward roundoff.
inline double aic_score(double rss, double tss, std::size_t n, std::size_t p) {
  const double floor = std::max(tss, 1.0) * 1e-14;
  const double nn = static_cast<double>(n);
  return nn * std::log(std::max(rss, floor) / nn) + 2.0 * static_cast<double>(p + 1);
}

inline std::optional<double> subset_aic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const std::vector<std::size_t>& cols) {
  const auto fit = detail::least_squares(detail::with_intercept(X, cols), y);
  if (!fit.full_rank) return std::nullopt;
  const double tss = (y.array() - y.mean()).matrix().squaredNorm();
  return aic_score(fit.rss, tss, static_cast<std::size_t>(y.size()), cols.size());
}

// Forward-backward stepwise search from the intercept-only model. Each round
// applies the single addition or removal with the lowest AIC if it improves
// on the current model. Zero-variance columns are never considered.
inline std::vector<std::size_t> select_variables(const DemographicMatrix& X, const Eigen::VectorXd& y) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (static_cast<std::size_t>(y.size()) != n) throw Error("select_variables: size mismatch");
  if (n < 3) throw Error("select_variables: need at least three regions");
  std::vector<std::size_t> candidates;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto col = X.values.col(j);
    if ((col.array() - col.mean()).abs().maxCoeff() > 0.0) candidates.push_back(static_cast<std::size_t>(j));
  }

  std::vector<std::size_t> current;
  double best = *subset_aic(X.values, y, current);
  for (std::size_t round = 0; round < 4 * candidates.size() + 4; ++round) {
    std::optional<std::vector<std::size_t>> move;
    double move_aic = best;
    if (n > current.size() + 3) {
      for (auto c : candidates) {
        if (std::find(current.begin(), current.end(), c) != current.end()) continue;
        auto trial = current;
        trial.push_back(c);
        std::sort(trial.begin(), trial.end());
        const auto score = subset_aic(X.values, y, trial);
        if (score && *score < move_aic) {
          move_aic = *score;
          move = trial;
        }
      }
    }
    for (std::size_t i = 0; i < current.size(); ++i) {
      auto trial = current;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      const auto score = subset_aic(X.values, y, trial);
      if (score && *score < move_aic) {
        move_aic = *score;
        move = trial;
      }
    }
    if (!move) break;
    current = *move;
    best = move_aic;
  }
  return current;
}

inline RegressionModel fit_regression(const DemographicMatrix& X, const Eigen::VectorXd& y,
                                      const std::vector<std::size_t>& selected) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (static_cast<std::size_t>(y.size()) != n) throw Error("fit_regression: size mismatch");
  if (n <= selected.size() + 1) throw Error("fit_regression: too few regions for the selected variables");
  const auto D = detail::with_intercept(X.values, selected);
  const auto fit = detail::least_squares(D, y);
  if (!fit.full_rank) throw Error("fit_regression: singular design");
  RegressionModel model;
  model.selected = selected;
  model.beta = fit.beta;
  model.fitted = D * fit.beta;
  model.rss = fit.rss;
  return model;
}

}  // namespace votesim
