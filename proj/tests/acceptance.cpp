// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//   acceptance [--work DIR] [--only N]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>

#include "helpers.hpp"

using namespace votesim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ElectionConfig defaults() { return testutil::census_config(); }

// 1. Income shares of the bundled config, 3 seeds at full size.
Outcome income_shares() {
  const auto cfg = defaults();
  const double target[3] = {39.0, 41.2, 19.8};
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string d;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto e = simulate_election(cfg, seed);
    std::vector<double> count(3, 0.0);
    for (const auto& r : e.population.regions)
      for (const auto& ind : r.individuals) count[ind.values[0]] += 1.0;
    const double n = static_cast<double>(e.population.size());
    d += fmt("seed %lu:", static_cast<unsigned long>(seed));
    for (int c = 0; c < 3; ++c) {
      const double pct = 100.0 * count[c] / n;
      ok = ok && std::abs(pct - target[c]) <= 3.0;
      d += fmt(" %.2f", pct);
    }
    d += "; ";
    ok = ok && e.population.size() == 500000 && e.population.region_count() == 250;
  }
  const double t = seconds_since(t0);
  ok = ok && t < 60.0;
  return {ok, d + fmt("%.1fs for 3 elections (limit 60s)", t)};
}

// 2. Exact noise-free popular vote; default noise lands in [0.49, 0.52].
Outcome popular_vote() {
  auto cfg = defaults();
  bool exact = true;
  std::string d;
  for (double target : {0.5, 0.37}) {
    auto c = cfg;
    c.dropout = 0.0;
    c.noise_halfwidth = 0.0;
    c.target_share = target;
    const auto e = simulate_election(c, 1);
    const double err = std::abs(e.results.global_share_a - target);
    exact = exact && err <= 1.0 / static_cast<double>(e.population.size());
    d += fmt("noise-free %.2f -> %.7f; ", target, e.results.global_share_a);
  }
  int inside = 0;
  std::string ers;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto e = simulate_election(cfg, seed);
    const double er = e.results.global_share_a;
    inside += er >= 0.49 && er <= 0.52;
    ers += fmt(" %.4f", er);
  }
  return {exact && inside >= 8, d + fmt("default noise in band %d/10 (need 8):", inside) + ers};
}

// 3. Mean absolute poll error at target 2.9%.
Outcome poll_calibration() {
  const auto cfg = defaults();
  double mean = 0.0;
  const int seeds = 20;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto e = simulate_election(cfg, seed);
    mean += poll_error(conduct_poll(cfg, e, seed), e.results) / seeds;
  }
  return {mean >= 0.019 && mean <= 0.039, fmt("mean |poll - ER| over %d seeds = %.4f (band [0.019, 0.039])", seeds, mean)};
}

// 4. Switching expectation and deletion/addition invariants.
Outcome fraud_arithmetic() {
  auto cfg = defaults();
  cfg.n_regions = 50;
  cfg.population = 50000;
  const auto e = simulate_election(cfg, 4);
  const double p = 0.3;
  double zsum = 0.0;
  int nz = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto [b, labels] = inject_fraud(e.ballots, e.population, FraudSpec{FraudMode::switching, 1, p, Candidate::A, seed});
    const auto post = tally(b, e.population);
    for (std::size_t r = 0; r < labels.regions.size(); ++r)
      if (labels.regions[r].fraudulent) {
        const double pre = e.results.share_a[r], n = static_cast<double>(e.results.total[r]);
        const double sd = std::sqrt(p * (1 - p) * (1 - pre) * n) / n;
        zsum += (post.share_a[r] - pre - p * (1 - pre)) / sd;
        ++nz;
      }
  }
  const double zmean = zsum / nz, se = 1.0 / std::sqrt(static_cast<double>(nz));
  const bool expectation = std::abs(zmean) <= 3.0 * se;

  std::size_t violations = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed)
    for (auto mode : {FraudMode::deletion, FraudMode::addition})
      for (auto fav : {Candidate::A, Candidate::B}) {
        auto [b, labels] = inject_fraud(e.ballots, e.population, FraudSpec{mode, 10, 0.25, fav, seed});
        const auto post = tally(b, e.population);
        for (std::size_t r = 0; r < labels.regions.size(); ++r) {
          const auto pa = e.results.votes_a[r], pb = e.results.total[r] - e.results.votes_a[r];
          const auto qa = post.votes_a[r], qb = post.total[r] - post.votes_a[r];
          const auto fa = fav == Candidate::A;
          if (!labels.regions[r].fraudulent) {
            violations += qa != pa || qb != pb;
            continue;
          }
          const bool fav_up = fa ? post.share_a[r] >= e.results.share_a[r] : post.share_a[r] <= e.results.share_a[r];
          if (mode == FraudMode::deletion)
            violations += !(fav_up && post.total[r] <= e.results.total[r] && (fa ? qa == pa && qb <= pb : qb == pb && qa <= pa));
          else
            violations += !(fav_up && post.total[r] >= e.results.total[r] && (fa ? qb == pb && qa >= pa : qa == pa && qb >= pb));
        }
      }
  return {expectation && violations == 0,
          fmt("switching z-mean %.3f over %d draws (|z| <= %.3f); deletion/addition invariant violations %zu over 400 runs",
              zmean, nz, 3.0 * se, violations)};
}

// 5. False flags on clean elections at the shipped defaults.
Outcome clean_runs() {
  const auto cfg = defaults();
  std::size_t total = 0, best = SIZE_MAX;
  std::string d;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto e = simulate_election(cfg, seed);
    const auto poll = conduct_poll(cfg, e, seed);
    auto params = cfg.detector;
    params.seed = seed;
    const auto f = run_pipeline(e.population, e.results, poll, params).flagged_count();
    total += f;
    best = std::min(best, f);
    d += fmt(" %zu", f);
  }
  const double mean = static_cast<double>(total) / 5.0;
  return {mean <= 5.0 && best <= 2, fmt("flags per seed:%s; mean %.1f (<= 5), min %zu (<= 2)", d.c_str(), mean, best)};
}

struct GridStats {
  std::map<double, double> recall, precision, f1, b1_f1;
  std::map<double, int> recall_n, precision_n, f1_n, b1_n;
  std::size_t failures = 0;
};

const ExperimentResult& grid_result() {
  static const ExperimentResult res = [] {
    const auto cfg = defaults();
    return run_experiment(grid_from_json(read_json_file(std::string(VOTESIM_CONFIG_DIR) + "/census2000.json")), cfg, 1);
  }();
  return res;
}

GridStats grid_stats() {
  GridStats g;
  for (const auto& r : grid_result().runs) {
    if (!r.ok()) {
      ++g.failures;
      continue;
    }
    const double l = r.cell.level;
    if (r.detector.recall) g.recall[l] += *r.detector.recall, ++g.recall_n[l];
    if (r.detector.precision) g.precision[l] += *r.detector.precision, ++g.precision_n[l];
    if (r.detector.f1) g.f1[l] += *r.detector.f1, ++g.f1_n[l];
    if (r.baseline.f1) g.b1_f1[l] += *r.baseline.f1, ++g.b1_n[l];
  }
  for (auto& [l, v] : g.recall) v /= g.recall_n[l];
  for (auto& [l, v] : g.precision) v /= g.precision_n[l];
  for (auto& [l, v] : g.f1) v /= g.f1_n[l];
  for (auto& [l, v] : g.b1_f1) v /= g.b1_n[l];
  return g;
}

// 6. Recall rises with the fraud level; targets at level 20.
Outcome level_monotonicity() {
  const auto g = grid_stats();
  const double r5 = g.recall.at(5.0), r12 = g.recall.at(12.5), r20 = g.recall.at(20.0);
  const double p20 = g.precision.at(20.0);
  const bool ok = g.failures == 0 && r20 > r12 && r12 > r5 && r20 >= 0.6 && p20 >= 0.5 && g.recall_n.at(20.0) == 15;
  return {ok, fmt("mean recall 5/12.5/20 = %.3f / %.3f / %.3f; precision at 20 = %.3f (%d runs); failed runs %zu", r5, r12,
                  r20, p20, g.precision_n.at(20.0), g.failures)};
}

// 7. Detector F1 beats baseline1 at level 20.
Outcome baseline_comparison() {
  const auto g = grid_stats();
  const double d = g.f1.at(20.0), b = g.b1_f1.at(20.0);
  return {g.failures == 0 && d > b && g.f1_n.at(20.0) >= 5,
          fmt("mean F1 at level 20: detector %.3f vs baseline1 %.3f over %d runs", d, b, g.f1_n.at(20.0))};
}

bool feasible(const OcSvmModel& m) {
  double s = 0.0;
  for (double a : m.alpha) {
    if (!(a > 0.0) || a > m.upper_bound() + 1e-10) return false;
    s += a;
  }
  return std::abs(s - 1.0) <= 1e-8;
}

std::vector<Point2> gaussian_points(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {z(rng), z(rng)};
  return pts;
}

// 8. One-class SVM: nu-property, feasibility, QP oracle.
Outcome ocsvm_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(805);
  std::uniform_int_distribution<int> big(20, 150), small(2, 10);
  std::uniform_real_distribution<double> nu_d(0.02, 0.9), gamma_d(0.2, 10.0);
  std::size_t nu_fail = 0, infeasible = 0, fits = 0;
  const double cut = -10 * OcSvmOptions{}.tolerance;
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<std::size_t>(big(rng));
    const auto pts = gaussian_points(rng, n);
    const double nu = nu_d(rng);
    const auto m = fit_ocsvm(pts, nu, {gamma_d(rng)});
    ++fits;
    infeasible += !feasible(m);
    std::size_t out = 0;
    for (const auto& p : pts) out += decision(m, p) < cut;
    const double dn = static_cast<double>(n);
    nu_fail += !(out / dn <= nu + 1.0 / dn && m.support.size() / dn >= nu - 1.0 / dn);
  }
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto pts = gaussian_points(rng, static_cast<std::size_t>(small(rng)));
    const double nu = std::uniform_real_distribution<double>(0.1, 1.0)(rng), gamma = gamma_d(rng);
    const auto m = fit_ocsvm(pts, nu, {gamma});
    ++fits;
    infeasible += !feasible(m);
    const auto o = testutil::qp_oracle(pts, nu, gamma);
    std::uniform_real_distribution<double> probe(-2.0, 2.0);
    for (const auto& p : pts) worst = std::max(worst, std::abs(decision(m, p) - o.decision(p)));
    for (int t = 0; t < 100; ++t) {
      const Point2 x{probe(rng), probe(rng)};
      worst = std::max(worst, std::abs(decision(m, x) - o.decision(x)));
    }
  }
  const double t = seconds_since(t0);
  return {nu_fail == 0 && infeasible == 0 && worst <= 1e-4 && t < 300.0,
          fmt("nu-property failures %zu/100; infeasible fits %zu/%zu; max |f - f_qp| = %.2e (<= 1e-4); %.1fs", nu_fail,
              infeasible, fits, worst, t)};
}

double normal_eq_aic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::size_t>& cols) {
  const auto n = X.rows();
  Eigen::MatrixXd D(n, static_cast<Eigen::Index>(cols.size()) + 1);
  D.col(0).setOnes();
  for (std::size_t j = 0; j < cols.size(); ++j) D.col(static_cast<Eigen::Index>(j) + 1) = X.col(static_cast<Eigen::Index>(cols[j]));
  const Eigen::VectorXd beta = (D.transpose() * D).ldlt().solve(D.transpose() * y);
  const double rss = (y - D * beta).squaredNorm();
  const double tss = (y.array() - y.mean()).matrix().squaredNorm();
  return static_cast<double>(n) * std::log(std::max(rss, std::max(tss, 1.0) * 1e-14) / static_cast<double>(n)) +
         2.0 * (static_cast<double>(cols.size()) + 1.0);
}

// 9. k-means against exhaustive partitions, stepwise AIC against all subsets.
Outcome clustering_oracles() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> size(4, 10);
  int km_ok = 0;
  double worst_ratio = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = size(rng);
    const std::size_t k = 2 + rep % 2;
    Eigen::MatrixXd X(n, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    // exhaustive over k^n labelings
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), 2);
      std::vector<double> cnt(k, 0.0);
      for (int i = 0; i < n; ++i) {
        C.row(a[i]) += X.row(i);
        cnt[static_cast<std::size_t>(a[i])] += 1.0;
      }
      double obj = 0.0;
      for (int i = 0; i < n; ++i) obj += (X.row(i) - C.row(a[i]) / cnt[static_cast<std::size_t>(a[i])]).squaredNorm();
      best = std::min(best, obj);
      int p = 0;
      while (p < n && ++a[p] == static_cast<int>(k)) a[p++] = 0;
      if (p == n) break;
    }
    const auto m = cluster_regions(X, k, 50, static_cast<std::uint64_t>(rep));
    const double ratio = best > 0 ? m.objective / best : 1.0;
    worst_ratio = std::max(worst_ratio, ratio);
    km_ok += m.objective <= 1.05 * best + 1e-12;
  }
  int aic_ok = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 40, mcols = 2 + rep % 5;
    Eigen::MatrixXd X(n, mcols);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < mcols; ++j)
      if (u(rng) < 0.5) y += z(rng) * X.col(j);
    for (Eigen::Index i = 0; i < n; ++i) y(i) += 0.1 * z(rng);
    DemographicMatrix D;
    D.values = X;
    auto sel = select_variables(D, y);
    std::sort(sel.begin(), sel.end());
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> arg;
    for (unsigned mask = 0; mask < (1u << mcols); ++mask) {
      std::vector<std::size_t> cols;
      for (Eigen::Index j = 0; j < mcols; ++j)
        if (mask >> j & 1u) cols.push_back(static_cast<std::size_t>(j));
      const double s = normal_eq_aic(X, y, cols);
      if (s < best - 1e-9) best = s, arg = cols;
    }
    aic_ok += sel == arg;
  }
  return {km_ok == 20 && aic_ok == 20,
          fmt("k-means within 5%% of optimum %d/20 (worst ratio %.4f); stepwise = exhaustive subset %d/20", km_ok,
              worst_ratio, aic_ok)};
}

// 10. Independence extrapolation against nested summation.
Outcome extrapolation_oracle() {
  const auto schema = defaults().schema;
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  auto random_profile = [&] {
    DemographicProfile p;
    for (std::size_t a = 0; a < schema.size(); ++a) {
      std::vector<double> w(schema.category_count(a));
      double s = 0.0;
      for (auto& x : w) s += (x = u(rng));
      for (auto& x : w) x /= s;
      p.fractions.push_back(w);
    }
    return p;
  };
  for (int rep = 0; rep < 50; ++rep) {
    PollTable poll;
    for (std::size_t c = 0; c < schema.cell_count(); ++c) {
      poll.count_a.push_back(1.0 + std::floor(40 * u(rng)));
      poll.count_b.push_back(1.0 + std::floor(40 * u(rng)));
    }
    const auto prof = random_profile();
    double ref = 0.0;
    const auto& f = prof.fractions;
    for (Category i = 0; i < f[0].size(); ++i)
      for (Category j = 0; j < f[1].size(); ++j)
        for (Category k = 0; k < f[2].size(); ++k)
          for (Category l = 0; l < f[3].size(); ++l) {
            const auto cell = schema.cell_index(std::vector<Category>{i, j, k, l});
            ref += f[0][i] * f[1][j] * f[2][k] * f[3][l] * poll.count_a[cell] / (poll.count_a[cell] + poll.count_b[cell]);
          }
    worst = std::max(worst, std::abs(extrapolate_poll(poll, prof, schema) - ref));
  }
  double worst_const = 0.0;
  for (double s : {0.0, 0.25, 0.5, 0.3, 1.0}) {
    PollTable poll;
    for (std::size_t c = 0; c < schema.cell_count(); ++c) {
      const double n = 4.0 * static_cast<double>(c % 7 + 1);
      poll.count_a.push_back(s * n);
      poll.count_b.push_back((1 - s) * n);
    }
    for (int rep = 0; rep < 10; ++rep)
      worst_const = std::max(worst_const, std::abs(extrapolate_poll(poll, random_profile(), schema) - s));
  }
  return {worst <= 1e-12 && worst_const <= 1e-15,
          fmt("max deviation from summation %.2e (<= 1e-12); constant-share deviation %.2e (rounding only)", worst,
              worst_const)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 11. The experiment command, rerun from its own manifest, at 1 and 3 threads.
Outcome determinism(const fs::path& work) {
  const fs::path a = work / "exp_a", b = work / "exp_b", c = work / "exp_c";
  for (const auto& d : {a, b, c}) fs::remove_all(d);
  const std::string cli = VOTESIM_CLI;
  auto run = [&](const std::string& config, const fs::path& out, int threads) {
    const std::string cmd = "\"" + cli + "\" experiment --config \"" + config + "\" --out \"" + out.string() +
                            "\" --threads " + std::to_string(threads) + " > \"" + (out.string() + ".log") + "\" 2>&1";
    fs::create_directories(out);
    if (std::system(cmd.c_str()) != 0) throw Error("experiment command failed: " + cmd);
  };
  run(std::string(VOTESIM_CONFIG_DIR) + "/census2000.json", a, 1);
  const auto manifest = (a / "manifest_experiment.json").string();
  run(manifest, b, 3);
  run(manifest, c, 1);
  bool same = true;
  std::string d;
  for (const char* f : {"runs.csv", "cells.csv"}) {
    const auto x = slurp(a / f), y = slurp(b / f), z = slurp(c / f);
    same = same && x == y && x == z && !x.empty();
    d += fmt("%s %zu bytes %s; ", f, x.size(), x == y && x == z ? "identical" : "DIFFERENT");
  }
  // and the same numbers as the in-process grid
  std::ostringstream os;
  write_runs_csv(os, grid_result());
  const bool matches_library = os.str() == slurp(a / "runs.csv");
  return {same && matches_library, d + "threads 1 / 3 / 1 from manifest; library run " +
                                       (matches_library ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "votesim_acceptance";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) work = argv[++i];
    else if (a == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    else {
      std::fprintf(stderr, "usage: acceptance [--work DIR] [--only N]\n");
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"income shares of the census config", income_shares},
      {"popular-vote control", popular_vote},
      {"poll error calibration", poll_calibration},
      {"fraud arithmetic", fraud_arithmetic},
      {"clean-run false flags", clean_runs},
      {"recall rises with fraud level", level_monotonicity},
      {"detector beats baseline1", baseline_comparison},
      {"one-class SVM oracles", ocsvm_oracles},
      {"clustering and selection oracles", clustering_oracles},
      {"poll extrapolation oracle", extrapolation_oracle},
      {"experiment determinism", [&] { return determinism(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%-4s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
