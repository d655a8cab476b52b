#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "votesim/baseline1.hpp"
#include "votesim/detector.hpp"
#include "votesim/error.hpp"
#include "votesim/fraud.hpp"

namespace votesim {

struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision;  // undefined without flags
  std::optional<double> recall;     // undefined without fraudulent regions
  std::optional<double> f1;         // 2TP / (2TP + FP + FN); undefined when that is 0/0
  double accuracy = 0.0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

inline Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m{tp, fp, fn, tn, {}, {}, {}, 0.0};
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (2 * tp + fp + fn > 0) m.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  const auto n = m.total();
  m.accuracy = n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
  return m;
}

// Confusion counts of per-region flags against ground truth, matched by
// region id.
inline Metrics evaluate(const std::vector<int>& region_ids, const std::vector<bool>& flagged,
                        const FraudLabels& labels) {
  if (region_ids.size() != flagged.size() || region_ids.size() != labels.regions.size())
    throw Error("evaluate: report and labels cover different regions");
  std::map<int, bool> truth;
  for (const auto& l : labels.regions) truth[l.region_id] = l.fraudulent;
  if (truth.size() != labels.regions.size()) throw Error("evaluate: duplicate region ids in labels");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::map<int, bool> seen;
  for (std::size_t i = 0; i < region_ids.size(); ++i) {
    const auto it = truth.find(region_ids[i]);
    if (it == truth.end() || !seen.emplace(region_ids[i], true).second)
      throw Error("evaluate: report and labels cover different regions");
    const bool f = flagged[i], t = it->second;
    tp += f && t;
    fp += f && !t;
    fn += !f && t;
    tn += !f && !t;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

inline Metrics evaluate(const DetectionReport& report, const FraudLabels& labels) {
  std::vector<int> ids;
  std::vector<bool> flags;
  for (const auto& r : report.regions) {
    ids.push_back(r.region_id);
    flags.push_back(r.flagged);
  }
  return evaluate(ids, flags, labels);
}

inline Metrics evaluate(const Baseline1Report& report, const FraudLabels& labels) {
  return evaluate(report.region_ids, report.flagged, labels);
}

}  // namespace votesim
