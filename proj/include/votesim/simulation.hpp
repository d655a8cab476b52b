#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "votesim/baseline1.hpp"
#include "votesim/detector.hpp"
#include "votesim/fraud.hpp"
#include "votesim/polling.hpp"
#include "votesim/population.hpp"
#include "votesim/schema.hpp"
#include "votesim/votecast.hpp"

namespace votesim {

// Everything needed to generate, poll and analyse one election.
struct ElectionConfig {
  AttributeSchema schema;
  std::size_t n_regions = 250;
  std::size_t population = 500000;

  DesirabilityPrior desirability;
  double redistribution_fraction = 0.3;
  double cap_factor = 1.5;

  double mail_in_fraction = 0.5;
  MailInWeights mail_in;

  double dropout = 0.1;
  Activation activation = Activation::identity;
  double target_share = 0.5;
  std::optional<double> noise_halfwidth;

  double poll_rate = 0.05;
  double poll_error = 0.029;
  PollNoiseScope poll_scope = PollNoiseScope::table;

  DetectorParams detector;
  DensityParams baseline;
  std::optional<std::size_t> baseline_k;  // unset: same k as the detector picks

  unsigned threads = 1;
};

struct Election {
  Population population;
  VoteNetwork network;
  Ballots ballots;
  RegionResults results;
  CastDiagnostics cast;
};

// generate -> desirability -> redistribute -> mail-in -> votes -> tally.
inline Election simulate_election(const ElectionConfig& cfg, std::uint64_t seed) {
  Election e;
  auto pop = generate_population(cfg.schema, cfg.n_regions, cfg.population, seed, cfg.threads);
  pop = assign_desirability(std::move(pop), cfg.desirability, seed);
  pop = redistribute(std::move(pop), cfg.redistribution_fraction, cfg.cap_factor, seed);
  e.population = assign_mail_in(std::move(pop), cfg.mail_in_fraction, cfg.mail_in, seed);
  e.network = init_vote_network(cfg.schema, cfg.dropout, seed, cfg.activation);
  CastOptions opt;
  opt.target_share = cfg.target_share;
  opt.noise_halfwidth = cfg.noise_halfwidth;
  opt.threads = cfg.threads;
  e.ballots = cast_votes(e.population, e.network, opt, seed, &e.cast);
  e.results = tally(e.ballots, e.population);
  return e;
}

inline PollTable conduct_poll(const ElectionConfig& cfg, const Election& e, std::uint64_t seed) {
  auto poll = draw_poll(e.population, e.ballots, cfg.poll_rate, seed);
  return inject_poll_noise(std::move(poll), cfg.poll_error, seed, cfg.poll_scope);
}

namespace detail {
template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace detail

// Reads the optional "election", "polling", "detector" and "baseline1"
// blocks; absent keys keep their defaults.
inline ElectionConfig config_from_json(const json& root) {
  ElectionConfig cfg;
  cfg.schema = schema_from_json(root);
  try {
    if (root.contains("election")) {
      const auto& j = root.at("election");
      detail::read_opt(j, "regions", cfg.n_regions);
      detail::read_opt(j, "population", cfg.population);
      detail::read_opt(j, "redistribution_fraction", cfg.redistribution_fraction);
      detail::read_opt(j, "cap_factor", cfg.cap_factor);
      detail::read_opt(j, "mail_in_fraction", cfg.mail_in_fraction);
      detail::read_opt(j, "dropout", cfg.dropout);
      detail::read_opt(j, "target_share", cfg.target_share);
      if (j.contains("noise_halfwidth") && !j.at("noise_halfwidth").is_null())
        cfg.noise_halfwidth = j.at("noise_halfwidth").get<double>();
      if (j.contains("activation")) {
        const auto act = j.at("activation").get<std::string>();
        if (act == "identity") cfg.activation = Activation::identity;
        else if (act == "tanh") cfg.activation = Activation::tanh;
        else throw ConfigError("unknown activation '" + act + "'");
      }
      if (j.contains("desirability")) {
        const auto& d = j.at("desirability");
        detail::read_opt(d, "a", cfg.desirability.a);
        detail::read_opt(d, "b", cfg.desirability.b);
        if (d.contains("fixed") && !d.at("fixed").is_null()) cfg.desirability.fixed = d.at("fixed").get<double>();
      }
      if (j.contains("mail_in_weights")) {
        const auto& m = j.at("mail_in_weights");
        detail::read_opt(m, "bias", cfg.mail_in.bias);
        cfg.mail_in.weights.assign(cfg.schema.size(), {});
        for (std::size_t a = 0; a < cfg.schema.size(); ++a) {
          cfg.mail_in.weights[a].assign(cfg.schema.category_count(a), 0.0);
          const auto& name = cfg.schema.attribute(a).name;
          if (!m.contains(name)) continue;
          for (const auto& [label, w] : m.at(name).items())
            cfg.mail_in.weights[a][cfg.schema.find_label(a, label)] = w.get<double>();
        }
      }
      detail::read_opt(j, "threads", cfg.threads);
    }
    if (root.contains("polling")) {
      const auto& j = root.at("polling");
      detail::read_opt(j, "rate", cfg.poll_rate);
      detail::read_opt(j, "target_error", cfg.poll_error);
      if (j.contains("scope")) {
        const auto s = j.at("scope").get<std::string>();
        if (s == "table") cfg.poll_scope = PollNoiseScope::table;
        else if (s == "cell") cfg.poll_scope = PollNoiseScope::cell;
        else throw ConfigError("unknown poll noise scope '" + s + "'");
      }
    }
    if (root.contains("detector")) {
      const auto& j = root.at("detector");
      auto& d = cfg.detector;
      detail::read_opt(j, "nu", d.nu);
      if (j.contains("gamma")) {
        if (j.at("gamma").is_string() && j.at("gamma").get<std::string>() == "scale") d.gamma_scale = true;
        else d.gamma = j.at("gamma").get<double>();
      }
      detail::read_opt(j, "min_regions_per_cluster", d.min_regions_per_cluster);
      if (j.contains("k") && !j.at("k").is_null()) d.k = j.at("k").get<std::size_t>();
      detail::read_opt(j, "k_min", d.k_min);
      detail::read_opt(j, "k_max", d.k_max);
      detail::read_opt(j, "restarts", d.restarts);
      detail::read_opt(j, "min_cluster_size", d.min_cluster_size);
      detail::read_opt(j, "per_cluster_regression", d.per_cluster_regression);
      if (j.contains("observation")) {
        const auto o = j.at("observation").get<std::string>();
        if (o == "yhat_actual") d.observation = ObservationMode::yhat_actual;
        else if (o == "zhat_actual") d.observation = ObservationMode::zhat_actual;
        else throw ConfigError("unknown observation mode '" + o + "'");
      }
    }
    if (root.contains("baseline1")) {
      const auto& j = root.at("baseline1");
      if (j.contains("eps") && !j.at("eps").is_null()) cfg.baseline.eps = j.at("eps").get<double>();
      detail::read_opt(j, "min_pts", cfg.baseline.min_pts);
      if (j.contains("eps_rule")) cfg.baseline.rule = parse_eps_rule(j.at("eps_rule").get<std::string>());
      detail::read_opt(j, "eps_quantile", cfg.baseline.quantile);
      detail::read_opt(j, "eps_factor", cfg.baseline.factor);
      if (j.contains("k") && !j.at("k").is_null()) cfg.baseline_k = j.at("k").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

inline ElectionConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

inline const char* to_string(ObservationMode m) {
  return m == ObservationMode::yhat_actual ? "yhat_actual" : "zhat_actual";
}

// Full parameter record for run manifests.
inline json config_to_json(const ElectionConfig& cfg) {
  json j = schema_to_json(cfg.schema);
  j["election"] = {
      {"regions", cfg.n_regions},
      {"population", cfg.population},
      {"redistribution_fraction", cfg.redistribution_fraction},
      {"cap_factor", cfg.cap_factor},
      {"mail_in_fraction", cfg.mail_in_fraction},
      {"dropout", cfg.dropout},
      {"activation", cfg.activation == Activation::identity ? "identity" : "tanh"},
      {"target_share", cfg.target_share},
      {"noise_halfwidth", cfg.noise_halfwidth ? json(*cfg.noise_halfwidth) : json(nullptr)},
      {"desirability",
       {{"a", cfg.desirability.a},
        {"b", cfg.desirability.b},
        {"fixed", cfg.desirability.fixed ? json(*cfg.desirability.fixed) : json(nullptr)}}},
  };
  if (!cfg.mail_in.weights.empty()) {
    json w{{"bias", cfg.mail_in.bias}};
    for (std::size_t a = 0; a < cfg.schema.size(); ++a) {
      json per;
      for (std::size_t c = 0; c < cfg.schema.category_count(a); ++c)
        per[cfg.schema.attribute(a).labels[c]] = cfg.mail_in.weights[a][c];
      w[cfg.schema.attribute(a).name] = per;
    }
    j["election"]["mail_in_weights"] = w;
  } else {
    j["election"]["mail_in_weights"] = {{"bias", cfg.mail_in.bias}};
  }
  j["polling"] = {{"rate", cfg.poll_rate},
                  {"target_error", cfg.poll_error},
                  {"scope", cfg.poll_scope == PollNoiseScope::table ? "table" : "cell"}};
  const auto& d = cfg.detector;
  j["detector"] = {{"nu", d.nu},
                   {"gamma", d.gamma_scale ? json("scale") : json(d.gamma)},
                   {"min_regions_per_cluster", d.min_regions_per_cluster},
                   {"k", d.k ? json(*d.k) : json(nullptr)},
                   {"k_min", d.k_min},
                   {"k_max", d.k_max},
                   {"restarts", d.restarts},
                   {"min_cluster_size", d.min_cluster_size},
                   {"per_cluster_regression", d.per_cluster_regression},
                   {"observation", to_string(d.observation)}};
  j["baseline1"] = {{"eps", cfg.baseline.eps ? json(*cfg.baseline.eps) : json(nullptr)},
                    {"min_pts", cfg.baseline.min_pts},
                    {"eps_rule", to_string(cfg.baseline.rule)},
                    {"eps_quantile", cfg.baseline.quantile},
                    {"eps_factor", cfg.baseline.factor},
                    {"k", cfg.baseline_k ? json(*cfg.baseline_k) : json(nullptr)}};
  return j;
}

}  // namespace votesim
