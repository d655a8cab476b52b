#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "votesim/error.hpp"
#include "votesim/population.hpp"
#include "votesim/random.hpp"
#include "votesim/votecast.hpp"

namespace votesim {

enum class FraudMode { none, deletion, addition, switching };

inline std::string to_string(FraudMode m) {
  switch (m) {
    case FraudMode::deletion: return "deletion";
    case FraudMode::addition: return "addition";
    case FraudMode::switching: return "switching";
    case FraudMode::none: break;
  }
  return "none";
}

inline FraudMode parse_fraud_mode(const std::string& s) {
  if (s == "deletion") return FraudMode::deletion;
  if (s == "addition") return FraudMode::addition;
  if (s == "switching") return FraudMode::switching;
  if (s == "none") return FraudMode::none;
  throw ConfigError("unknown fraud mode '" + s + "'");
}

struct FraudSpec {
  FraudMode mode = FraudMode::switching;
  std::size_t n_fraud_regions = 0;
  double probability = 0.0;
  Candidate favored = Candidate::A;
  std::uint64_t seed = 0;
};

struct RegionFraudLabel {
  int region_id = 0;
  bool fraudulent = false;
  FraudMode mode = FraudMode::none;
  std::uint64_t affected_votes = 0;
};

struct FraudLabels {
  std::vector<RegionFraudLabel> regions;
  Candidate favored = Candidate::A;
  double pre_share_a = 0.0;
  double post_share_a = 0.0;

  std::size_t fraud_region_count() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.fraudulent ? 1 : 0;
    return n;
  }
};

// Chooses spec.n_fraud_regions regions uniformly without replacement. In each,
// every individual is subject to fraud independently with spec.probability:
// switching turns non-favored ballots into favored ones, deletion voids
// non-favored ballots, addition appends Binomial(region size, p) favored
// synthetic ballots. Probability 0 leaves every region clean.
inline std::pair<Ballots, FraudLabels> inject_fraud(Ballots ballots, const Population& pop,
                                                    const FraudSpec& spec) {
  const std::size_t nr = pop.regions.size();
  if (ballots.votes.size() != nr) throw Error("inject_fraud: ballots do not match population");
  if (spec.n_fraud_regions > nr)
    throw ConfigError("inject_fraud: more fraud regions than regions");
  if (!(spec.probability >= 0.0 && spec.probability <= 1.0))
    throw ConfigError("inject_fraud: probability must be in [0, 1]");
  if (ballots.added_a.size() != nr) ballots.added_a.assign(nr, 0);
  if (ballots.added_b.size() != nr) ballots.added_b.assign(nr, 0);

  FraudLabels labels;
  labels.favored = spec.favored;
  labels.regions.resize(nr);
  for (std::size_t r = 0; r < nr; ++r) labels.regions[r].region_id = pop.regions[r].region_id;
  labels.pre_share_a = tally(ballots, pop).global_share_a;

  std::vector<std::size_t> chosen;
  if (spec.mode != FraudMode::none && spec.n_fraud_regions > 0 && spec.probability > 0.0) {
    Rng rng = make_rng(spec.seed, Stream::fraud_regions);
    chosen = sample_without_replacement(rng, nr, spec.n_fraud_regions);
  }
  const Vote favored = as_vote(spec.favored);
  const Vote against = as_vote(other(spec.favored));
  for (auto r : chosen) {
    auto& label = labels.regions[r];
    label.fraudulent = true;
    label.mode = spec.mode;
    Rng rng = make_rng(spec.seed, Stream::fraud_votes, {r});
    std::bernoulli_distribution hit(spec.probability);
    auto& votes = ballots.votes[r];
    switch (spec.mode) {
      case FraudMode::switching:
      case FraudMode::deletion:
        for (auto& v : votes) {
          if (v != against) continue;
          if (!hit(rng)) continue;
          v = spec.mode == FraudMode::switching ? favored : Vote::Void;
          ++label.affected_votes;
        }
        break;
      case FraudMode::addition: {
        std::binomial_distribution<std::uint64_t> extra(votes.size(), spec.probability);
        const auto k = extra(rng);
        (spec.favored == Candidate::A ? ballots.added_a : ballots.added_b)[r] += k;
        label.affected_votes = k;
        break;
      }
      case FraudMode::none:
        break;
    }
  }
  labels.post_share_a = tally(ballots, pop).global_share_a;
  return {std::move(ballots), std::move(labels)};
}

// Fraction of fraudulent regions whose majority moved from the non-favored
// to the favored candidate.
inline double fraud_significance(const FraudLabels& labels, const RegionResults& pre,
                                 const RegionResults& post) {
  if (pre.region_count() != labels.regions.size() || post.region_count() != labels.regions.size())
    throw Error("fraud_significance: region count mismatch");
  std::size_t fraud = 0, flipped = 0;
  for (std::size_t r = 0; r < labels.regions.size(); ++r) {
    if (!labels.regions[r].fraudulent) continue;
    ++fraud;
    const double before = labels.favored == Candidate::A ? pre.share_a[r] : 1.0 - pre.share_a[r];
    const double after = labels.favored == Candidate::A ? post.share_a[r] : 1.0 - post.share_a[r];
    if (before < 0.5 && after > 0.5) ++flipped;
  }
  if (fraud == 0) throw Error("fraud_significance: no fraudulent regions");
  return static_cast<double>(flipped) / static_cast<double>(fraud);
}

}  // namespace votesim
