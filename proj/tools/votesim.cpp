// votesim command line: generate, poll, fraud, detect, baseline1, evaluate,
// experiment, boundary. Each run writes <out>/manifest_<command>.json.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "votesim/votesim.hpp"

namespace fs = std::filesystem;
using namespace votesim;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = ".";
  std::string in;  // defaults to out
  unsigned threads = 1;

  std::string input(const std::string& file) const { return io::join(in.empty() ? out : in, file); }
  std::string output(const std::string& file) const { return io::join(out, file); }
};

// A config file, or a previous run manifest (its "config" block is used).
ElectionConfig read_config(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  auto root = read_json_file(c.config);
  if (root.contains("config") && !root.contains("attributes")) root = root.at("config");
  return config_from_json(root);
}

json read_config_json(const Common& c) {
  auto root = read_json_file(c.config);
  if (root.contains("config") && !root.contains("attributes")) root = root.at("config");
  return root;
}

void write_manifest(const Common& c, const std::string& command, const ElectionConfig& cfg, json extra) {
  json m{{"command", command},
         {"seed", c.seed},
         {"threads", c.threads},
         {"config", config_to_json(cfg)},
         {"config_path", c.config},
         {"input_dir", c.in.empty() ? c.out : c.in},
         {"output_dir", c.out}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  io::write_json(c.output("manifest_" + command + ".json"), m);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config or earlier manifest");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--in", c.in, "input directory (default: --out)");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

Population load_population(const Common& c, const AttributeSchema& schema) {
  return io::read_population_csv(c.input("population.csv"), schema);
}

void add_detector_flags(CLI::App* app, std::optional<double>& nu, std::optional<std::string>& gamma,
                        std::optional<std::size_t>& k, std::optional<std::size_t>& restarts) {
  app->add_option("--nu", nu, "one-class SVM nu")->check(CLI::Range(1e-9, 1.0));
  app->add_option("--gamma", gamma, "RBF gamma, or 'scale'");
  app->add_option("--k", k, "number of clusters (default: silhouette)")->check(CLI::PositiveNumber);
  app->add_option("--restarts", restarts, "k-means restarts")->check(CLI::PositiveNumber);
}

void apply_detector_flags(DetectorParams& d, const std::optional<double>& nu, const std::optional<std::string>& gamma,
                          const std::optional<std::size_t>& k, const std::optional<std::size_t>& restarts) {
  if (nu) d.nu = *nu;
  if (gamma) {
    if (*gamma == "scale") {
      d.gamma_scale = true;
    } else {
      try {
        d.gamma = std::stod(*gamma);
        d.gamma_scale = false;
      } catch (const std::exception&) {
        throw ConfigError("--gamma must be a number or 'scale'");
      }
      if (!(d.gamma > 0.0)) throw ConfigError("--gamma must be positive");
    }
  }
  if (k) d.k = *k;
  if (restarts) d.restarts = *restarts;
}

// Post-fraud results if a fraud run exists in the input dir, else the clean ones.
std::string default_results(const Common& c) {
  const auto fraud = c.input("results_fraud.csv");
  return fs::exists(fraud) ? fraud : c.input("results.csv");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic election simulator and fraud detector"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("generate", "simulate a clean election");
  add_common(gen, c);

  auto* poll = app.add_subcommand("poll", "draw a noisy joint-frequency poll");
  add_common(poll, c);
  std::optional<double> poll_rate, poll_err;
  poll->add_option("--rate", poll_rate, "sampling rate")->check(CLI::Range(0.0, 1.0));
  poll->add_option("--error", poll_err, "target absolute poll error")->check(CLI::Range(0.0, 1.0));

  auto* fraud = app.add_subcommand("fraud", "inject labelled fraud into the ballots");
  add_common(fraud, c);
  std::string mode = "switching", favored = "A";
  std::size_t fraud_regions = 0;
  double prob = 0.0;
  fraud->add_option("--mode", mode, "switching | deletion | addition | none");
  fraud->add_option("--regions", fraud_regions, "number of fraudulent regions");
  fraud->add_option("--prob", prob, "per-individual fraud probability")->check(CLI::Range(0.0, 1.0));
  fraud->add_option("--favored", favored, "favored candidate")->check(CLI::IsMember({"A", "B"}));

  std::optional<double> nu;
  std::optional<std::string> gamma;
  std::optional<std::size_t> k, restarts;
  std::string results_path;

  auto* det = app.add_subcommand("detect", "run the detector on results, demographics and poll");
  add_common(det, c);
  add_detector_flags(det, nu, gamma, k, restarts);
  det->add_option("--results", results_path, "results CSV (default: fraud results if present)");

  auto* base = app.add_subcommand("baseline1", "per-cluster density outlier baseline");
  add_common(base, c);
  base->add_option("--k", k, "number of clusters")->check(CLI::PositiveNumber);
  base->add_option("--restarts", restarts, "k-means restarts")->check(CLI::PositiveNumber);
  base->add_option("--results", results_path, "results CSV (default: fraud results if present)");

  auto* eval = app.add_subcommand("evaluate", "score a report against fraud labels");
  add_common(eval, c);
  std::string report_name = "report.csv";
  eval->add_option("--report", report_name, "report file in the input dir");

  auto* exp = app.add_subcommand("experiment", "run the fraud grid over seeds");
  add_common(exp, c);
  add_detector_flags(exp, nu, gamma, k, restarts);

  auto* bound = app.add_subcommand("boundary", "export a cluster's decision values on a grid");
  add_common(bound, c);
  std::size_t cluster = 0, resolution = 101;
  GridBounds bounds;
  bound->add_option("--cluster", cluster, "cluster id");
  bound->add_option("--resolution", resolution, "points per axis")->check(CLI::PositiveNumber);
  bound->add_option("--x-min", bounds.x_min);
  bound->add_option("--x-max", bounds.x_max);
  bound->add_option("--y-min", bounds.y_min);
  bound->add_option("--y-max", bounds.y_max);

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(c.out);
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (gen->parsed()) {
      auto cfg = read_config(c);
      cfg.threads = c.threads;
      const auto e = simulate_election(cfg, c.seed);
      io::write_population_csv(c.output("population.csv"), e.population);
      io::write_json(c.output("population.json"),
                     {{"schema", schema_to_json(cfg.schema)}, {"seed", c.seed}, {"config", config_to_json(cfg)}});
      io::write_ballots_csv(c.output("ballots.csv"), e.ballots, e.population);
      io::write_results_csv(c.output("results.csv"), e.results, e.population);
      write_manifest(c, "generate", cfg,
                     {{"global_share_a", e.results.global_share_a},
                      {"threshold", e.ballots.threshold},
                      {"noise_halfwidth", e.cast.noise_halfwidth},
                      {"population", e.population.size()},
                      {"outputs", {"population.csv", "population.json", "ballots.csv", "results.csv"}}});
      std::printf("generated %zu individuals in %zu regions, ER = %.4f (%.2fs)\n", e.population.size(),
                  e.population.region_count(), e.results.global_share_a, elapsed());
    } else if (poll->parsed()) {
      auto cfg = read_config(c);
      if (poll_rate) cfg.poll_rate = *poll_rate;
      if (poll_err) cfg.poll_error = *poll_err;
      const auto pop = load_population(c, cfg.schema);
      const auto ballots = io::read_ballots_csv(c.input("ballots.csv"), pop);
      auto table = draw_poll(pop, ballots, cfg.poll_rate, c.seed);
      table = inject_poll_noise(std::move(table), cfg.poll_error, c.seed, cfg.poll_scope);
      const auto err = votesim::poll_error(table, tally(ballots, pop));
      io::write_poll_csv(c.output("poll.csv"), table, cfg.schema);
      io::write_json(c.output("poll.json"), io::poll_sidecar(table));
      write_manifest(c, "poll", cfg, {{"poll_error", err}, {"outputs", {"poll.csv", "poll.json"}}});
      std::printf("poll of %zu respondents, share A = %.4f, error = %.4f\n", table.respondents, table.share_a(), err);
    } else if (fraud->parsed()) {
      auto cfg = read_config(c);
      const auto pop = load_population(c, cfg.schema);
      const auto clean = io::read_ballots_csv(c.input("ballots.csv"), pop);
      FraudSpec spec{parse_fraud_mode(mode), fraud_regions, prob, favored == "A" ? Candidate::A : Candidate::B,
                     derive_seed(c.seed, Stream::fraud_regions, {})};
      auto [ballots, labels] = inject_fraud(clean, pop, spec);
      const auto results = tally(ballots, pop);
      io::write_ballots_csv(c.output("ballots_fraud.csv"), ballots, pop);
      io::write_results_csv(c.output("results_fraud.csv"), results, pop);
      io::write_labels_csv(c.output("labels.csv"), labels);
      write_manifest(c, "fraud", cfg,
                     {{"fraud",
                       {{"mode", mode}, {"regions", fraud_regions}, {"prob", prob}, {"favored", favored}}},
                      {"pre_share_a", labels.pre_share_a},
                      {"post_share_a", labels.post_share_a},
                      {"outputs", {"ballots_fraud.csv", "results_fraud.csv", "labels.csv"}}});
      std::printf("fraud in %zu regions, ER %.4f -> %.4f\n", labels.fraud_region_count(), labels.pre_share_a,
                  labels.post_share_a);
    } else if (det->parsed()) {
      auto cfg = read_config(c);
      apply_detector_flags(cfg.detector, nu, gamma, k, restarts);
      cfg.detector.seed = c.seed;
      const auto pop = load_population(c, cfg.schema);
      const auto rpath = results_path.empty() ? default_results(c) : results_path;
      const auto results = io::read_results_csv(rpath, pop);
      const auto table =
          io::read_poll_csv(c.input("poll.csv"), cfg.schema,
                            fs::exists(c.input("poll.json")) ? read_json_file(c.input("poll.json")) : json{});
      std::vector<OcSvmModel> models;
      const auto report = run_pipeline(pop, results, table, cfg.detector, &models);
      io::write_report_csv(c.output("report.csv"), report);
      io::write_json(c.output("report.json"), io::report_sidecar(report));
      io::write_json(c.output("models.json"), io::models_to_json(models));
      write_manifest(c, "detect", cfg,
                     {{"results", rpath}, {"outputs", {"report.csv", "report.json", "models.json"}}});
      std::printf("k = %zu, flagged %zu of %zu regions (%.2fs)\n", report.k, report.flagged_count(),
                  report.regions.size(), elapsed());
    } else if (base->parsed()) {
      auto cfg = read_config(c);
      if (restarts) cfg.detector.restarts = *restarts;
      if (k) cfg.baseline_k = *k;
      const auto pop = load_population(c, cfg.schema);
      const auto rpath = results_path.empty() ? default_results(c) : results_path;
      const auto results = io::read_results_csv(rpath, pop);
      std::size_t use_k = 0;
      if (cfg.baseline_k) {
        use_k = *cfg.baseline_k;
      } else if (fs::exists(c.input("report.json"))) {
        use_k = read_json_file(c.input("report.json")).at("k").get<std::size_t>();
      } else {
        throw ConfigError("baseline1 needs --k or a detector report.json in the input dir");
      }
      const auto X = build_design_matrix(pop);
      const auto report = run_baseline1(X, results.share_a, use_k, cfg.baseline, c.seed, cfg.detector.restarts,
                                        cfg.detector.min_cluster_size);
      io::write_baseline_csv(c.output("baseline1.csv"), report);
      write_manifest(c, "baseline1", cfg,
                     {{"results", rpath}, {"k", use_k}, {"eps", report.eps}, {"outputs", {"baseline1.csv"}}});
      std::printf("baseline1: k = %zu, flagged %zu regions\n", use_k, report.flagged_count());
    } else if (eval->parsed()) {
      const auto flags = io::read_flags_csv(c.input(report_name));
      const auto labels = io::read_labels_csv(c.input("labels.csv"));
      const auto m = evaluate(flags.region_ids, flags.flagged, labels);
      auto optj = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
      const json out{{"report", report_name}, {"tp", m.tp},       {"fp", m.fp},
                     {"fn", m.fn},            {"tn", m.tn},       {"precision", optj(m.precision)},
                     {"recall", optj(m.recall)}, {"f1", optj(m.f1)}, {"accuracy", m.accuracy}};
      io::write_json(c.output("metrics.json"), out);
      json manifest{{"command", "evaluate"}, {"seed", c.seed}, {"input_dir", c.in.empty() ? c.out : c.in},
                    {"report", report_name}, {"outputs", {"metrics.json"}}};
      io::write_json(c.output("manifest_evaluate.json"), manifest);
      std::printf("tp %zu fp %zu fn %zu tn %zu  precision %s recall %s f1 %s accuracy %.4f\n", m.tp, m.fp, m.fn, m.tn,
                  csv::opt(m.precision, 4).c_str(), csv::opt(m.recall, 4).c_str(), csv::opt(m.f1, 4).c_str(),
                  m.accuracy);
    } else if (exp->parsed()) {
      auto cfg = read_config(c);
      apply_detector_flags(cfg.detector, nu, gamma, k, restarts);
      // A manifest keeps the grid at its top level.
      const auto raw = read_json_file(c.config);
      const auto grid = grid_from_json(raw.contains("experiment") ? raw : read_config_json(c));
      const auto res = run_experiment(grid, cfg, c.threads);
      {
        auto out = csv::open_out(c.output("runs.csv"));
        write_runs_csv(out, res);
      }
      {
        auto out = csv::open_out(c.output("cells.csv"));
        write_cells_csv(out, res);
      }
      std::size_t failures = 0;
      for (const auto& cell : res.cells) failures += cell.failures;
      write_manifest(c, "experiment", cfg,
                     {{"experiment", grid_to_json(grid)}, {"failures", failures}, {"outputs", {"runs.csv", "cells.csv"}}});
      std::printf("%zu runs over %zu cells, %zu failures (%.2fs)\n", res.runs.size(), res.cells.size(), failures,
                  elapsed());
    } else if (bound->parsed()) {
      const auto models = io::models_from_json(read_json_file(c.input("models.json")));
      if (cluster >= models.size()) throw ConfigError("--cluster out of range");
      const auto grid = export_boundary_grid(models[cluster], bounds, resolution);
      {
        auto out = csv::open_out(c.output("boundary.csv"));
        write_boundary_csv(out, grid);
      }
      json manifest{{"command", "boundary"},
                    {"input_dir", c.in.empty() ? c.out : c.in},
                    {"cluster", cluster},
                    {"resolution", resolution},
                    {"bounds", {bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max}},
                    {"outputs", {"boundary.csv"}}};
      io::write_json(c.output("manifest_boundary.json"), manifest);
      std::printf("wrote %zu grid points\n", grid.size());
    }
  } catch (const PipelineError& e) {
    std::fprintf(stderr, "error in %s: %s\n", e.stage().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
