#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "votesim/error.hpp"
#include "votesim/population.hpp"
#include "votesim/random.hpp"
#include "votesim/votecast.hpp"

namespace votesim {

// Joint frequencies of poll respondents: one cell per combination of
// attribute categories (mixed-radix index from AttributeSchema::cell_index).
struct PollTable {
  std::vector<double> count_a;
  std::vector<double> count_b;
  double rate = 0.0;
  double target_error = 0.0;
  std::uint64_t seed = 0;
  std::size_t respondents = 0;

  std::size_t cell_count() const noexcept { return count_a.size(); }
  double total_a() const {
    double s = 0.0;
    for (double v : count_a) s += v;
    return s;
  }
  double total() const {
    double s = 0.0;
    for (std::size_t c = 0; c < count_a.size(); ++c) s += count_a[c] + count_b[c];
    return s;
  }
  // Poll-implied global share for candidate A.
  double share_a() const {
    const double t = total();
    if (!(t > 0.0)) throw Error("poll has no respondents");
    return total_a() / t;
  }
};

// Uniform sample without replacement of floor(rate * N) individuals; each
// respondent's vote is added to its attribute cell.
inline PollTable draw_poll(const Population& pop, const Ballots& ballots, double rate,
                           std::uint64_t seed) {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("draw_poll: rate must be in (0, 1)");
  if (ballots.votes.size() != pop.regions.size())
    throw Error("draw_poll: ballots do not match population");
  const auto offsets = detail::region_offsets(pop);
  const std::size_t n = offsets.back();
  const auto k = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
  if (k == 0) throw ConfigError("draw_poll: rate yields zero respondents");

  PollTable poll;
  poll.rate = rate;
  poll.seed = seed;
  poll.count_a.assign(pop.schema.cell_count(), 0.0);
  poll.count_b.assign(pop.schema.cell_count(), 0.0);
  Rng rng = make_rng(seed, Stream::poll_sample);
  for (auto g : sample_without_replacement(rng, n, k)) {
    const auto r = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), g) - offsets.begin() - 1);
    const std::size_t i = g - offsets[r];
    const Vote v = ballots.votes[r].at(i);
    if (v == Vote::Void) continue;
    const auto cell = pop.schema.cell_index(pop.regions[r].individuals[i].values);
    (v == Vote::A ? poll.count_a : poll.count_b)[cell] += 1.0;
    ++poll.respondents;
  }
  return poll;
}

// Whether one perturbation is shared by the whole table or drawn per cell.
enum class PollNoiseScope { table, cell };

namespace detail {
// E|Z| for a standard normal truncated to [-3, 3].
inline double truncated_half_normal_mean() {
  const double z = 3.0;
  return std::sqrt(2.0 / std::numbers::pi) * (1.0 - std::exp(-0.5 * z * z)) /
         std::erf(z / std::numbers::sqrt2);
}
}  // namespace detail

// Perturbation scale sigma such that the first-order change of the poll's
// global A-share has mean absolute value target_error.
inline double poll_noise_sigma(const PollTable& poll, double target_error, PollNoiseScope scope) {
  const double n = poll.total();
  if (!(n > 0.0)) throw Error("poll_noise_sigma: empty poll");
  const double s = poll.total_a() / n;
  double lin = 0.0, sq = 0.0;
  for (std::size_t c = 0; c < poll.cell_count(); ++c) {
    const double w = (poll.count_a[c] * (1.0 - s) + s * poll.count_b[c]) / n;
    lin += w;
    sq += w * w;
  }
  const double spread = scope == PollNoiseScope::table ? lin : std::sqrt(sq);
  if (!(spread > 0.0)) return 0.0;
  return target_error / (spread * detail::truncated_half_normal_mean());
}

// A-counts scale by (1 + eps), B-counts by (1 - eps) with the same eps,
// eps ~ N(0, sigma) truncated at +-3 sigma; scaled counts are floored at 0.
inline PollTable inject_poll_noise(PollTable poll, double target_error, std::uint64_t seed,
                                   PollNoiseScope scope = PollNoiseScope::table) {
  if (!(target_error >= 0.0)) throw ConfigError("inject_poll_noise: target_error must be >= 0");
  poll.target_error = target_error;
  if (target_error == 0.0) return poll;
  const double sigma = poll_noise_sigma(poll, target_error, scope);
  if (sigma == 0.0) return poll;
  Rng rng = make_rng(seed, Stream::poll_noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    double z;
    do z = normal(rng);
    while (std::abs(z) > 3.0);
    return sigma * z;
  };
  double eps = draw();
  for (std::size_t c = 0; c < poll.cell_count(); ++c) {
    if (scope == PollNoiseScope::cell && c > 0) eps = draw();
    poll.count_a[c] *= std::max(0.0, 1.0 + eps);
    poll.count_b[c] *= std::max(0.0, 1.0 - eps);
  }
  return poll;
}

inline double poll_error(const PollTable& poll, const RegionResults& results) {
  return std::abs(poll.share_a() - results.global_share_a);
}

}  // namespace votesim
