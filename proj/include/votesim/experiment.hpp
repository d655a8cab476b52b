#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "votesim/baseline1.hpp"
#include "votesim/csv.hpp"
#include "votesim/detector.hpp"
#include "votesim/fraud.hpp"
#include "votesim/metrics.hpp"
#include "votesim/simulation.hpp"

namespace votesim {

// Axes of the fraud-detection grid. Levels and region shares are percentages;
// level 0 is a clean run.
struct ExperimentGrid {
  std::vector<double> levels{5.0, 12.5, 20.0};
  std::vector<double> region_percents{4.0, 10.0, 16.0};
  std::vector<FraudMode> modes{FraudMode::switching};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  Candidate favored = Candidate::A;
  bool baseline = true;

  void validate() const {
    if (levels.empty() || region_percents.empty() || modes.empty() || seeds.empty())
      throw ConfigError("experiment grid: every axis needs at least one value");
    for (double l : levels)
      if (!(l >= 0.0 && l <= 100.0)) throw ConfigError("experiment grid: level outside [0, 100]");
    for (double p : region_percents)
      if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("experiment grid: region share outside [0, 100]");
  }
};

struct ExperimentCell {
  double level = 0.0;
  double region_percent = 0.0;
  FraudMode mode = FraudMode::switching;
};

struct RunRecord {
  ExperimentCell cell;
  std::uint64_t seed = 0;
  std::size_t n_fraud_regions = 0;
  double probability = 0.0;
  double realized_level = 0.0;  // percent of votes in fraudulent regions actually affected
  std::size_t k = 0;
  std::size_t flags = 0;
  Metrics detector;
  std::size_t baseline_flags = 0;
  Metrics baseline;
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

struct MeanMetric {
  double mean = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // undefined values left out of the mean

  void add(const std::optional<double>& v) {
    if (!v) {
      ++excluded;
      return;
    }
    mean += (*v - mean) / static_cast<double>(++used);
  }
  std::optional<double> value() const { return used ? std::optional<double>(mean) : std::nullopt; }
};

struct MethodSummary {
  MeanMetric precision, recall, accuracy, f1;
  MeanMetric flagged_percent;        // flagged regions as % of all regions
  MeanMetric true_detected_percent;  // correctly flagged regions as % of all regions
};

struct CellSummary {
  ExperimentCell cell;
  std::size_t runs = 0;
  std::size_t failures = 0;
  MeanMetric realized_level;
  MethodSummary detector;
  MethodSummary baseline;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;  // cell-major, then seed order
  std::vector<CellSummary> cells;
};

inline std::vector<ExperimentCell> grid_cells(const ExperimentGrid& grid) {
  std::vector<ExperimentCell> cells;
  for (auto mode : grid.modes)
    for (double level : grid.levels)
      for (double pct : grid.region_percents) cells.push_back({level, pct, mode});
  return cells;
}

// Per-individual probability realizing `level` percent of affected votes in
// the fraudulent regions, given the pre-fraud favored share.
inline double fraud_probability(double level_percent, FraudMode mode, double favored_share) {
  const double level = level_percent / 100.0;
  if (mode == FraudMode::addition) return std::min(1.0, level);
  const double eligible = 1.0 - favored_share;
  if (!(eligible > 0.0)) return 0.0;
  return std::min(1.0, level / eligible);
}

inline std::uint64_t cell_seed(std::uint64_t seed, const ExperimentCell& c) {
  return derive_seed(seed, Stream::fraud_regions,
                     {std::bit_cast<std::uint64_t>(c.level), std::bit_cast<std::uint64_t>(c.region_percent),
                      static_cast<std::uint64_t>(c.mode)});
}

namespace detail {
inline void summarize(MethodSummary& s, const Metrics& m) {
  s.precision.add(m.precision);
  s.recall.add(m.recall);
  s.accuracy.add(m.accuracy);
  s.f1.add(m.f1);
  const double n = static_cast<double>(m.total());
  s.flagged_percent.add(100.0 * static_cast<double>(m.tp + m.fp) / n);
  s.true_detected_percent.add(100.0 * static_cast<double>(m.tp) / n);
}
}  // namespace detail

// One fraud cell on a prepared clean election; failures are recorded in the
// returned record.
inline RunRecord run_cell(const ElectionConfig& cfg, const Election& clean, const PollTable& poll,
                          const ExperimentCell& cell, std::uint64_t seed, Candidate favored, bool with_baseline) {
  RunRecord rec;
  rec.cell = cell;
  rec.seed = seed;
  try {
    const std::size_t nr = clean.population.region_count();
    rec.n_fraud_regions = static_cast<std::size_t>(std::llround(cell.region_percent / 100.0 * static_cast<double>(nr)));
    const double fav_share =
        favored == Candidate::A ? clean.results.global_share_a : 1.0 - clean.results.global_share_a;
    rec.probability = cell.level > 0.0 ? fraud_probability(cell.level, cell.mode, fav_share) : 0.0;
    FraudSpec spec{cell.mode, rec.n_fraud_regions, rec.probability, favored, cell_seed(seed, cell)};
    auto [ballots, labels] = inject_fraud(clean.ballots, clean.population, spec);
    std::uint64_t affected = 0, base_votes = 0;
    for (std::size_t r = 0; r < nr; ++r)
      if (labels.regions[r].fraudulent) {
        affected += labels.regions[r].affected_votes;
        base_votes += clean.results.total[r];
      }
    rec.realized_level = base_votes ? 100.0 * static_cast<double>(affected) / static_cast<double>(base_votes) : 0.0;

    const auto results = tally(ballots, clean.population);
    DetectorParams params = cfg.detector;
    params.seed = seed;
    const auto report = run_pipeline(clean.population, results, poll, params);
    rec.k = report.k;
    rec.flags = report.flagged_count();
    rec.detector = evaluate(report, labels);
    if (with_baseline) {
      const auto X = build_design_matrix(clean.population);
      const auto b = run_baseline1(X, results.share_a, cfg.baseline_k.value_or(report.k), cfg.baseline, seed,
                                   cfg.detector.restarts, cfg.detector.min_cluster_size);
      rec.baseline_flags = b.flagged_count();
      rec.baseline = evaluate(b, labels);
    }
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

// For every seed: simulate and poll one clean election, then run every cell
// on it. Seeds run concurrently; output order is fixed by the grid.
inline ExperimentResult run_experiment(const ExperimentGrid& grid, const ElectionConfig& cfg,
                                       unsigned threads = 1) {
  grid.validate();
  const auto cells = grid_cells(grid);
  std::vector<std::vector<RunRecord>> by_seed(grid.seeds.size());
  ElectionConfig inner = cfg;
  inner.threads = 1;
  parallel_for(grid.seeds.size(), threads, [&](std::size_t s) {
    const auto seed = grid.seeds[s];
    auto& out = by_seed[s];
    try {
      const auto clean = simulate_election(inner, seed);
      const auto poll = conduct_poll(inner, clean, seed);
      for (const auto& cell : cells) out.push_back(run_cell(inner, clean, poll, cell, seed, grid.favored, grid.baseline));
    } catch (const std::exception& e) {
      out.clear();
      for (const auto& cell : cells) {
        RunRecord rec;
        rec.cell = cell;
        rec.seed = seed;
        rec.error = std::string("simulation: ") + e.what();
        out.push_back(rec);
      }
    }
  });

  ExperimentResult res;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary sum;
    sum.cell = cells[c];
    for (std::size_t s = 0; s < grid.seeds.size(); ++s) {
      const auto& rec = by_seed[s][c];
      res.runs.push_back(rec);
      ++sum.runs;
      if (!rec.ok()) {
        ++sum.failures;
        continue;
      }
      sum.realized_level.add(rec.realized_level);
      detail::summarize(sum.detector, rec.detector);
      if (grid.baseline) detail::summarize(sum.baseline, rec.baseline);
    }
    res.cells.push_back(sum);
  }
  return res;
}

inline void write_runs_csv(std::ostream& out, const ExperimentResult& res) {
  out << "mode,level,region_percent,seed,n_fraud_regions,probability,realized_level,k,"
         "flags,tp,fp,fn,tn,precision,recall,accuracy,f1,"
         "b1_flags,b1_tp,b1_fp,b1_fn,b1_tn,b1_precision,b1_recall,b1_accuracy,b1_f1,error\n";
  for (const auto& r : res.runs) {
    out << to_string(r.cell.mode) << ',' << csv::fixed(r.cell.level, 3) << ',' << csv::fixed(r.cell.region_percent, 3)
        << ',' << r.seed << ',' << r.n_fraud_regions << ',' << csv::fixed(r.probability, 8) << ','
        << csv::fixed(r.realized_level, 6) << ',' << r.k << ',' << r.flags;
    for (const Metrics* m : {&r.detector, &r.baseline}) {
      if (m == &r.baseline) out << ',' << r.baseline_flags;
      out << ',' << m->tp << ',' << m->fp << ',' << m->fn << ',' << m->tn << ',' << csv::opt(m->precision) << ','
          << csv::opt(m->recall) << ',' << csv::fixed(m->accuracy) << ',' << csv::opt(m->f1);
    }
    std::string err = r.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    out << ',' << err << '\n';
  }
}

// Per-cell means, in percent. "flagged/true" is the total-errors-detected /
// true-fraudulent-regions-detected pair, both as % of all regions.
inline void write_cells_csv(std::ostream& out, const ExperimentResult& res) {
  out << "mode,level,region_percent,runs,failures,realized_level,"
         "flagged_pct,true_detected_pct,precision,precision_excluded,recall,accuracy,f1,"
         "b1_flagged_pct,b1_true_detected_pct,b1_precision,b1_precision_excluded,b1_recall,b1_accuracy,b1_f1\n";
  auto pct = [](const MeanMetric& m) {
    auto v = m.value();
    return v ? csv::fixed(100.0 * *v, 4) : std::string("n/a");
  };
  for (const auto& c : res.cells) {
    out << to_string(c.cell.mode) << ',' << csv::fixed(c.cell.level, 3) << ',' << csv::fixed(c.cell.region_percent, 3)
        << ',' << c.runs << ',' << c.failures << ',' << csv::opt(c.realized_level.value(), 4);
    for (const MethodSummary* m : {&c.detector, &c.baseline})
      out << ',' << csv::opt(m->flagged_percent.value(), 4) << ',' << csv::opt(m->true_detected_percent.value(), 4)
          << ',' << pct(m->precision) << ',' << m->precision.excluded << ',' << pct(m->recall) << ','
          << pct(m->accuracy) << ',' << pct(m->f1);
    out << '\n';
  }
}

struct GridBounds {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
};

struct GridValue {
  double x, y, decision;
};

// Decision values on a resolution x resolution lattice including the bounds.
inline std::vector<GridValue> export_boundary_grid(const OcSvmModel& model, const GridBounds& b,
                                                   std::size_t resolution) {
  if (resolution == 0) throw ConfigError("export_boundary_grid: zero resolution");
  if (!model.trained()) throw Error("export_boundary_grid: model is not trained");
  auto coord = [resolution](double lo, double hi, std::size_t i) {
    return resolution == 1 ? 0.5 * (lo + hi)
                           : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
  };
  std::vector<GridValue> out;
  out.reserve(resolution * resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    for (std::size_t j = 0; j < resolution; ++j) {
      const double x = coord(b.x_min, b.x_max, i), y = coord(b.y_min, b.y_max, j);
      out.push_back({x, y, decision(model, {x, y})});
    }
  return out;
}

inline void write_boundary_csv(std::ostream& out, const std::vector<GridValue>& grid) {
  out << "x,y,decision\n";
  for (const auto& g : grid) out << csv::num(g.x) << ',' << csv::num(g.y) << ',' << csv::num(g.decision) << '\n';
}

inline ExperimentGrid grid_from_json(const json& root) {
  ExperimentGrid g;
  if (!root.contains("experiment")) return g;
  const auto& j = root.at("experiment");
  try {
    detail::read_opt(j, "levels", g.levels);
    detail::read_opt(j, "region_percents", g.region_percents);
    detail::read_opt(j, "seeds", g.seeds);
    detail::read_opt(j, "baseline", g.baseline);
    if (j.contains("modes")) {
      g.modes.clear();
      for (const auto& m : j.at("modes")) g.modes.push_back(parse_fraud_mode(m.get<std::string>()));
    }
    if (j.contains("favored")) {
      const auto f = j.at("favored").get<std::string>();
      if (f != "A" && f != "B") throw ConfigError("experiment grid: favored must be A or B");
      g.favored = f == "B" ? Candidate::B : Candidate::A;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment block: ") + e.what());
  }
  return g;
}

inline json grid_to_json(const ExperimentGrid& g) {
  json modes = json::array();
  for (auto m : g.modes) modes.push_back(to_string(m));
  return {{"levels", g.levels},     {"region_percents", g.region_percents},
          {"modes", modes},         {"seeds", g.seeds},
          {"favored", g.favored == Candidate::A ? "A" : "B"}, {"baseline", g.baseline}};
}

}  // namespace votesim
