#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "votesim/baseline1.hpp"
#include "votesim/csv.hpp"
#include "votesim/detector.hpp"
#include "votesim/fraud.hpp"
#include "votesim/ocsvm.hpp"
#include "votesim/polling.hpp"
#include "votesim/population.hpp"
#include "votesim/schema.hpp"
#include "votesim/votecast.hpp"

namespace votesim::io {

inline void write_json(const std::string& path, const json& j) {
  auto out = csv::open_out(path);
  out << j.dump(2) << '\n';
}

// region_id, <attribute labels...>, mail_in
inline void write_population_csv(const std::string& path, const Population& pop) {
  auto out = csv::open_out(path);
  out << "region_id";
  for (const auto& a : pop.schema.attributes()) out << ',' << a.name;
  out << ",mail_in\n";
  for (const auto& r : pop.regions)
    for (const auto& ind : r.individuals) {
      out << r.region_id;
      for (std::size_t a = 0; a < pop.schema.size(); ++a) out << ',' << pop.schema.attribute(a).labels[ind.values[a]];
      out << ',' << (ind.mail_in ? 1 : 0) << '\n';
    }
}

// Regions are ordered by id; individuals keep file order.
inline Population read_population_csv(const std::string& path, const AttributeSchema& schema) {
  const auto t = csv::read(path);
  const auto rcol = t.column("region_id");
  const auto mcol = t.column("mail_in");
  std::vector<std::size_t> acol;
  for (const auto& a : schema.attributes()) acol.push_back(t.column(a.name));
  std::vector<std::map<std::string, Category>> lookup(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a)
    for (std::size_t c = 0; c < schema.category_count(a); ++c)
      lookup[a][schema.attribute(a).labels[c]] = static_cast<Category>(c);
  std::map<int, Region> regions;
  for (const auto& row : t.rows) {
    Individual ind;
    ind.region_id = std::stoi(row[rcol]);
    ind.mail_in = row[mcol] == "1";
    for (std::size_t a = 0; a < schema.size(); ++a) {
      const auto it = lookup[a].find(row[acol[a]]);
      if (it == lookup[a].end())
        throw Error(path + ": unknown category '" + row[acol[a]] + "' for " + schema.attribute(a).name);
      ind.values.push_back(it->second);
    }
    auto& region = regions[ind.region_id];
    region.region_id = ind.region_id;
    region.individuals.push_back(std::move(ind));
  }
  Population pop;
  pop.schema = schema;
  for (auto& [id, r] : regions) pop.regions.push_back(std::move(r));
  return pop;
}

// region_id, individual, mail_in, vote, synthetic. Voided ballots are
// omitted; synthetic ballots use indices past the region's individuals.
inline void write_ballots_csv(const std::string& path, const Ballots& ballots, const Population& pop) {
  auto out = csv::open_out(path);
  out << "region_id,individual,mail_in,vote,synthetic\n";
  for (std::size_t r = 0; r < pop.regions.size(); ++r) {
    const auto& region = pop.regions[r];
    for (std::size_t i = 0; i < region.size(); ++i) {
      const Vote v = ballots.votes[r][i];
      if (v == Vote::Void) continue;
      out << region.region_id << ',' << i << ',' << (region.individuals[i].mail_in ? 1 : 0) << ','
          << (v == Vote::A ? 'A' : 'B') << ",0\n";
    }
    std::size_t next = region.size();
    const std::uint64_t add_a = ballots.added_a.empty() ? 0 : ballots.added_a[r];
    const std::uint64_t add_b = ballots.added_b.empty() ? 0 : ballots.added_b[r];
    for (std::uint64_t j = 0; j < add_a; ++j) out << region.region_id << ',' << next++ << ",0,A,1\n";
    for (std::uint64_t j = 0; j < add_b; ++j) out << region.region_id << ',' << next++ << ",0,B,1\n";
  }
}

inline Ballots read_ballots_csv(const std::string& path, const Population& pop) {
  const auto t = csv::read(path);
  const auto rc = t.column("region_id"), ic = t.column("individual"), vc = t.column("vote"),
             sc = t.column("synthetic");
  std::map<int, std::size_t> index;
  for (std::size_t r = 0; r < pop.regions.size(); ++r) index[pop.regions[r].region_id] = r;
  Ballots b;
  b.votes.resize(pop.regions.size());
  for (std::size_t r = 0; r < pop.regions.size(); ++r) b.votes[r].assign(pop.regions[r].size(), Vote::Void);
  b.added_a.assign(pop.regions.size(), 0);
  b.added_b.assign(pop.regions.size(), 0);
  for (const auto& row : t.rows) {
    const auto it = index.find(std::stoi(row[rc]));
    if (it == index.end()) throw Error(path + ": ballot for unknown region " + row[rc]);
    const std::size_t r = it->second;
    const bool a = row[vc] == "A";
    if (!a && row[vc] != "B") throw Error(path + ": vote must be A or B");
    if (row[sc] == "1") {
      ++(a ? b.added_a : b.added_b)[r];
      continue;
    }
    const auto i = std::stoul(row[ic]);
    if (i >= b.votes[r].size()) throw Error(path + ": individual index out of range");
    b.votes[r][i] = a ? Vote::A : Vote::B;
  }
  return b;
}

// region_id, share_A, total, votes_A
inline void write_results_csv(const std::string& path, const RegionResults& res, const Population& pop) {
  auto out = csv::open_out(path);
  out << "region_id,share_A,total,votes_A\n";
  for (std::size_t r = 0; r < res.region_count(); ++r)
    out << pop.regions[r].region_id << ',' << csv::num(res.share_a[r]) << ',' << res.total[r] << ','
        << res.votes_a[r] << '\n';
}

// Results aligned to pop.regions.
inline RegionResults read_results_csv(const std::string& path, const Population& pop) {
  const auto t = csv::read(path);
  const auto rc = t.column("region_id"), tc = t.column("total"), ac = t.column("votes_A");
  std::map<int, std::pair<std::uint64_t, std::uint64_t>> rows;
  for (const auto& row : t.rows) rows[std::stoi(row[rc])] = {std::stoull(row[ac]), std::stoull(row[tc])};
  RegionResults res;
  std::uint64_t ga = 0, gt = 0;
  for (const auto& region : pop.regions) {
    const auto it = rows.find(region.region_id);
    if (it == rows.end()) throw Error(path + ": missing region " + std::to_string(region.region_id));
    const auto [a, total] = it->second;
    res.votes_a.push_back(a);
    res.total.push_back(total);
    res.share_a.push_back(total ? static_cast<double>(a) / static_cast<double>(total) : 0.0);
    ga += a;
    gt += total;
  }
  if (rows.size() != pop.regions.size()) throw Error(path + ": results cover different regions");
  res.global_share_a = gt ? static_cast<double>(ga) / static_cast<double>(gt) : 0.0;
  return res;
}

// One row per attribute combination: <attribute labels...>, count_A, count_B
inline void write_poll_csv(const std::string& path, const PollTable& poll, const AttributeSchema& schema) {
  auto out = csv::open_out(path);
  for (const auto& a : schema.attributes()) out << a.name << ',';
  out << "count_A,count_B\n";
  for (std::size_t cell = 0; cell < poll.cell_count(); ++cell) {
    const auto v = schema.cell_values(cell);
    for (std::size_t a = 0; a < schema.size(); ++a) out << schema.attribute(a).labels[v[a]] << ',';
    out << csv::num(poll.count_a[cell]) << ',' << csv::num(poll.count_b[cell]) << '\n';
  }
}

inline json poll_sidecar(const PollTable& poll) {
  return {{"rate", poll.rate}, {"target_error", poll.target_error}, {"seed", poll.seed},
          {"respondents", poll.respondents}};
}

inline PollTable read_poll_csv(const std::string& path, const AttributeSchema& schema, const json& sidecar = {}) {
  const auto t = csv::read(path);
  std::vector<std::size_t> acol;
  for (const auto& a : schema.attributes()) acol.push_back(t.column(a.name));
  const auto ca = t.column("count_A"), cb = t.column("count_B");
  PollTable poll;
  poll.count_a.assign(schema.cell_count(), 0.0);
  poll.count_b.assign(schema.cell_count(), 0.0);
  for (const auto& row : t.rows) {
    std::vector<std::size_t> v;
    for (std::size_t a = 0; a < schema.size(); ++a) v.push_back(schema.find_label(a, row[acol[a]]));
    const auto cell = schema.cell_index(v);
    poll.count_a[cell] = std::stod(row[ca]);
    poll.count_b[cell] = std::stod(row[cb]);
    if (poll.count_a[cell] < 0.0 || poll.count_b[cell] < 0.0) throw Error(path + ": negative poll count");
  }
  if (sidecar.is_object()) {
    poll.rate = sidecar.value("rate", 0.0);
    poll.target_error = sidecar.value("target_error", 0.0);
    poll.seed = sidecar.value("seed", std::uint64_t{0});
    poll.respondents = sidecar.value("respondents", std::size_t{0});
  }
  return poll;
}

// region_id, fraudulent, mode, affected_votes
inline void write_labels_csv(const std::string& path, const FraudLabels& labels) {
  auto out = csv::open_out(path);
  out << "region_id,fraudulent,mode,affected_votes\n";
  for (const auto& l : labels.regions)
    out << l.region_id << ',' << (l.fraudulent ? 1 : 0) << ',' << to_string(l.mode) << ',' << l.affected_votes << '\n';
}

inline FraudLabels read_labels_csv(const std::string& path) {
  const auto t = csv::read(path);
  const auto rc = t.column("region_id"), fc = t.column("fraudulent"), mc = t.column("mode"),
             ac = t.column("affected_votes");
  FraudLabels labels;
  for (const auto& row : t.rows) {
    RegionFraudLabel l;
    l.region_id = std::stoi(row[rc]);
    l.fraudulent = row[fc] == "1";
    l.mode = parse_fraud_mode(row[mc]);
    l.affected_votes = std::stoull(row[ac]);
    labels.regions.push_back(l);
  }
  return labels;
}

// region_id, cluster, y_hat, z_hat, actual, decision, flagged
inline void write_report_csv(const std::string& path, const DetectionReport& report) {
  auto out = csv::open_out(path);
  out << "region_id,cluster,y_hat,z_hat,actual,decision,flagged\n";
  for (const auto& r : report.regions)
    out << r.region_id << ',' << r.cluster << ',' << csv::num(r.y_hat) << ',' << csv::num(r.z_hat) << ','
        << csv::num(r.actual) << ',' << csv::num(r.decision) << ',' << (r.flagged ? 1 : 0) << '\n';
}

// Same columns; y_hat, z_hat and decision are blank.
inline void write_baseline_csv(const std::string& path, const Baseline1Report& report) {
  auto out = csv::open_out(path);
  out << "region_id,cluster,y_hat,z_hat,actual,decision,flagged\n";
  for (std::size_t i = 0; i < report.region_ids.size(); ++i)
    out << report.region_ids[i] << ',' << report.cluster[i] << ",,," << csv::num(report.actual[i]) << ",,"
        << (report.flagged[i] ? 1 : 0) << '\n';
}

struct FlagTable {
  std::vector<int> region_ids;
  std::vector<bool> flagged;
};

inline FlagTable read_flags_csv(const std::string& path) {
  const auto t = csv::read(path);
  const auto rc = t.column("region_id"), fc = t.column("flagged");
  FlagTable f;
  for (const auto& row : t.rows) {
    f.region_ids.push_back(std::stoi(row[rc]));
    f.flagged.push_back(row[fc] == "1");
  }
  return f;
}

inline json report_sidecar(const DetectionReport& report) {
  return {{"selected_variables", report.selected},
          {"beta", report.beta},
          {"k", report.k},
          {"nu", report.nu},
          {"gamma", report.gammas},
          {"seed", report.seed},
          {"observation", report.observation == ObservationMode::yhat_actual ? "yhat_actual" : "zhat_actual"},
          {"poll_fallback_cells", report.poll_fallback_cells},
          {"empty_cluster_events", report.empty_cluster_events},
          {"flagged", report.flagged_count()}};
}

inline json model_to_json(const OcSvmModel& m) {
  json sv = json::array();
  for (const auto& p : m.support) sv.push_back({p[0], p[1]});
  return {{"support", sv}, {"alpha", m.alpha}, {"rho", m.rho}, {"nu", m.nu}, {"gamma", m.kernel.gamma},
          {"training_size", m.training_size}};
}

inline OcSvmModel model_from_json(const json& j) {
  OcSvmModel m;
  try {
    for (const auto& p : j.at("support")) m.support.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    m.alpha = j.at("alpha").get<std::vector<double>>();
    m.rho = j.at("rho").get<double>();
    m.nu = j.at("nu").get<double>();
    m.kernel.gamma = j.at("gamma").get<double>();
    m.training_size = j.at("training_size").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed model: ") + e.what());
  }
  if (m.alpha.size() != m.support.size()) throw Error("malformed model: alpha and support differ in length");
  return m;
}

inline json models_to_json(const std::vector<OcSvmModel>& models) {
  json arr = json::array();
  for (std::size_t c = 0; c < models.size(); ++c) {
    auto j = model_to_json(models[c]);
    j["cluster"] = c;
    arr.push_back(std::move(j));
  }
  return {{"models", arr}};
}

inline std::vector<OcSvmModel> models_from_json(const json& j) {
  std::vector<OcSvmModel> out;
  for (const auto& m : j.at("models")) out.push_back(model_from_json(m));
  return out;
}

inline std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace votesim::io
