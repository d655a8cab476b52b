#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "votesim/error.hpp"
#include "votesim/population.hpp"
#include "votesim/random.hpp"

namespace votesim {

enum class Candidate : std::uint8_t { A, B };
enum class Vote : std::uint8_t { A, B, Void };

inline Candidate other(Candidate c) { return c == Candidate::A ? Candidate::B : Candidate::A; }
inline Vote as_vote(Candidate c) { return c == Candidate::A ? Vote::A : Vote::B; }

enum class Activation { identity, tanh };

// One hidden layer of width 2 * input; the score is the sum of the hidden
// activations with a fresh Bernoulli(1 - dropout) keep-mask per individual.
struct VoteNetwork {
  std::size_t input_size = 0;
  std::vector<double> weights;  // hidden_size x input_size, row-major
  double dropout = 0.0;
  Activation activation = Activation::identity;

  std::size_t hidden_size() const noexcept { return 2 * input_size; }
};

inline VoteNetwork init_vote_network(const AttributeSchema& schema, double dropout_rate,
                                     std::uint64_t seed,
                                     Activation activation = Activation::identity) {
  if (schema.empty()) throw ConfigError("init_vote_network: empty schema");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("init_vote_network: dropout must be in [0, 1)");
  VoteNetwork net;
  net.input_size = schema.feature_count();
  net.dropout = dropout_rate;
  net.activation = activation;
  net.weights.resize(net.hidden_size() * net.input_size);
  Rng rng = make_rng(seed, Stream::network);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(net.input_size)));
  for (double& w : net.weights) w = normal(rng);
  return net;
}

// One-hot feature indices of an individual.
inline std::vector<std::size_t> encode(const AttributeSchema& schema, const Individual& ind) {
  if (ind.values.size() != schema.size())
    throw Error("encode: individual does not match schema");
  std::vector<std::size_t> active(schema.size());
  std::size_t offset = 0;
  for (std::size_t a = 0; a < schema.size(); ++a) {
    if (ind.values[a] >= schema.category_count(a)) throw Error("encode: category out of range");
    active[a] = offset + ind.values[a];
    offset += schema.category_count(a);
  }
  return active;
}

// Score from the active one-hot features. With rng == nullptr no dropout is
// applied.
inline double voting_score(const VoteNetwork& net, std::span<const std::size_t> active, Rng* rng) {
  double score = 0.0;
  std::bernoulli_distribution keep(1.0 - net.dropout);
  for (std::size_t h = 0; h < net.hidden_size(); ++h) {
    const bool kept = (rng == nullptr || net.dropout == 0.0) ? true : keep(*rng);
    if (!kept) continue;
    double pre = 0.0;
    const double* row = &net.weights[h * net.input_size];
    for (auto f : active) {
      if (f >= net.input_size) throw Error("voting_score: feature index outside network input");
      pre += row[f];
    }
    score += net.activation == Activation::tanh ? std::tanh(pre) : pre;
  }
  return score;
}

inline double voting_score(const VoteNetwork& net, const AttributeSchema& schema,
                           const Individual& ind, Rng& rng) {
  if (schema.feature_count() != net.input_size)
    throw Error("voting_score: encoding does not match network input dimension");
  const auto active = encode(schema, ind);
  return voting_score(net, active, &rng);
}

// Smallest threshold t from the score list such that the fraction of scores
// >= t is at least target_share; for distinct scores the fraction equals
// round(target_share * n) / n.
inline double compute_threshold(std::span<const double> scores, double target_share) {
  if (scores.empty()) throw Error("compute_threshold: empty score list");
  if (!(target_share >= 0.0 && target_share <= 1.0))
    throw ConfigError("compute_threshold: target_share must be in [0, 1]");
  const std::size_t n = scores.size();
  const auto k = static_cast<std::size_t>(std::llround(target_share * static_cast<double>(n)));
  if (k == 0) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    return std::nextafter(mx, std::numeric_limits<double>::infinity());
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                   std::greater<>());
  return sorted[k - 1];
}

struct RegionTally {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t total() const noexcept { return a + b; }
};

// votes[r][i] belongs to population.regions[r].individuals[i]; Void marks a
// removed ballot. added_* count synthetic ballots with no individual.
struct Ballots {
  std::vector<std::vector<Vote>> votes;
  std::vector<std::uint64_t> added_a;
  std::vector<std::uint64_t> added_b;
  double threshold = 0.0;

  std::size_t region_count() const noexcept { return votes.size(); }
};

struct RegionResults {
  std::vector<double> share_a;
  std::vector<std::uint64_t> total;
  std::vector<std::uint64_t> votes_a;
  double global_share_a = 0.0;

  std::size_t region_count() const noexcept { return share_a.size(); }
};

struct CastOptions {
  double target_share = 0.5;
  // Uniform noise half-width; unset means 0.25 * sd of the unperturbed scores.
  std::optional<double> noise_halfwidth;
  // Break ties at the threshold so the noise-free split is exact.
  bool split_ties = true;
  unsigned threads = 1;
};

struct CastDiagnostics {
  double noise_halfwidth = 0.0;
  std::size_t flipped = 0;
};

namespace detail {
inline std::vector<std::size_t> region_offsets(const Population& pop) {
  std::vector<std::size_t> off(pop.regions.size() + 1, 0);
  for (std::size_t r = 0; r < pop.regions.size(); ++r) off[r + 1] = off[r] + pop.regions[r].size();
  return off;
}
}  // namespace detail

// Scores every individual (dropout masks drawn in individual order from the
// region's substream), thresholds the unperturbed scores to hit target_share, then
// adds Uniform(-h, h) noise before comparing to the threshold.
inline Ballots cast_votes(const Population& pop, const VoteNetwork& net, const CastOptions& opt,
                          std::uint64_t seed, CastDiagnostics* diag = nullptr) {
  if (opt.noise_halfwidth && !(*opt.noise_halfwidth >= 0.0))
    throw ConfigError("cast_votes: noise half-width must be >= 0");
  if (pop.schema.feature_count() != net.input_size)
    throw Error("cast_votes: network input does not match schema");
  const auto offsets = detail::region_offsets(pop);
  const std::size_t n = offsets.back();
  if (n == 0) throw Error("cast_votes: empty population");

  std::vector<double> scores(n);
  parallel_for(pop.regions.size(), opt.threads, [&](std::size_t r) {
    const auto& region = pop.regions[r];
    Rng rng = make_rng(seed, Stream::scoring, {r});
    for (std::size_t i = 0; i < region.size(); ++i) {
      const auto active = encode(pop.schema, region.individuals[i]);
      scores[offsets[r] + i] = voting_score(net, active, &rng);
    }
  });

  const double thr = compute_threshold(scores, opt.target_share);
  double halfwidth = 0.0;
  if (opt.noise_halfwidth) {
    halfwidth = *opt.noise_halfwidth;
  } else {
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = scores[i] - mean;
      mean += d / static_cast<double>(i + 1);
      m2 += d * (scores[i] - mean);
    }
    halfwidth = 0.25 * std::sqrt(m2 / static_cast<double>(n));
  }

  // Tied scores at the threshold: exactly `need` of them vote A, chosen by a
  // seeded shuffle.
  std::vector<char> tie_a(n, 0);
  if (opt.split_ties) {
    const auto k = static_cast<std::size_t>(std::llround(opt.target_share * static_cast<double>(n)));
    std::size_t above = 0;
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < n; ++i) {
      if (scores[i] > thr) ++above;
      else if (scores[i] == thr) tied.push_back(i);
    }
    const std::size_t need = k > above ? std::min(k - above, tied.size()) : 0;
    Rng rng = make_rng(seed, Stream::tie_break);
    for (auto j : sample_without_replacement(rng, tied.size(), need)) tie_a[tied[j]] = 1;
  }

  Ballots ballots;
  ballots.threshold = thr;
  ballots.votes.resize(pop.regions.size());
  ballots.added_a.assign(pop.regions.size(), 0);
  ballots.added_b.assign(pop.regions.size(), 0);
  std::vector<std::size_t> flips(pop.regions.size(), 0);
  parallel_for(pop.regions.size(), opt.threads, [&](std::size_t r) {
    const auto& region = pop.regions[r];
    auto& out = ballots.votes[r];
    out.resize(region.size());
    Rng rng = make_rng(seed, Stream::noise, {r});
    std::uniform_real_distribution<double> noise(-halfwidth, halfwidth);
    for (std::size_t i = 0; i < region.size(); ++i) {
      const std::size_t g = offsets[r] + i;
      const double s = scores[g];
      const bool clean_a = opt.split_ties ? (s > thr || tie_a[g]) : (s >= thr);
      bool vote_a = clean_a;
      if (halfwidth > 0.0) {
        const double perturbed = s + noise(rng);
        // Tied individuals keep their tie-break side unless noise moves them.
        vote_a = perturbed > thr || (perturbed == thr && clean_a);
      }
      flips[r] += (vote_a != clean_a) ? 1 : 0;
      out[i] = vote_a ? Vote::A : Vote::B;
    }
  });
  if (diag) {
    diag->noise_halfwidth = halfwidth;
    diag->flipped = 0;
    for (auto f : flips) diag->flipped += f;
  }
  return ballots;
}

inline RegionResults tally(const Ballots& ballots, const Population& pop) {
  if (ballots.votes.size() != pop.regions.size())
    throw Error("tally: ballots and population disagree on region count");
  RegionResults res;
  const std::size_t nr = pop.regions.size();
  res.share_a.resize(nr);
  res.total.resize(nr);
  res.votes_a.resize(nr);
  std::uint64_t ga = 0, gt = 0;
  for (std::size_t r = 0; r < nr; ++r) {
    if (ballots.votes[r].size() != pop.regions[r].size())
      throw Error("tally: ballot count does not match region " + std::to_string(r));
    std::uint64_t a = ballots.added_a.empty() ? 0 : ballots.added_a[r];
    std::uint64_t b = ballots.added_b.empty() ? 0 : ballots.added_b[r];
    for (Vote v : ballots.votes[r]) {
      a += v == Vote::A ? 1 : 0;
      b += v == Vote::B ? 1 : 0;
    }
    res.votes_a[r] = a;
    res.total[r] = a + b;
    res.share_a[r] = (a + b) ? static_cast<double>(a) / static_cast<double>(a + b) : 0.0;
    ga += a;
    gt += a + b;
  }
  res.global_share_a = gt ? static_cast<double>(ga) / static_cast<double>(gt) : 0.0;
  return res;
}

}  // namespace votesim
