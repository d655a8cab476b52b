#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace votesim;

namespace {

struct Setup {
  Population pop;
  Ballots ballots;
  RegionResults results;
};

Setup election(std::size_t regions, std::size_t n, std::uint64_t seed) {
  auto cfg = testutil::small_config(regions, n);
  auto e = simulate_election(cfg, seed);
  return {std::move(e.population), std::move(e.ballots), std::move(e.results)};
}

PollTable two_cell_poll(double a0, double b0, double a1, double b1) {
  PollTable p;
  p.count_a = {a0, a1};
  p.count_b = {b0, b1};
  return p;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / x.size() - static_cast<double>(j) / y.size()));
  }
  return d;
}

}  // namespace

TEST(Poll, FivePercentOfHalfAMillion) {
  AttributeSchema s({testutil::categorical("x", {"a", "b"}, {0.5, 0.5})});
  const auto pop = generate_population(s, 250, 500000, 1);
  Ballots b;
  for (const auto& r : pop.regions) b.votes.emplace_back(r.size(), Vote::A);
  const auto poll = draw_poll(pop, b, 0.05, 3);
  EXPECT_EQ(poll.respondents, 25000u);
  EXPECT_DOUBLE_EQ(poll.total(), 25000.0);
  EXPECT_DOUBLE_EQ(poll.share_a(), 1.0);
}

TEST(Poll, FloorOfRateTimesPopulation) {
  AttributeSchema s({testutil::categorical("x", {"a"}, {1.0})});
  const auto pop = generate_population(s, 1, 10, 1);
  Ballots b;
  b.votes.emplace_back(10, Vote::B);
  EXPECT_EQ(draw_poll(pop, b, 0.999999, 1).respondents, 9u);
  EXPECT_THROW(draw_poll(pop, b, 0.05, 1), ConfigError);
  EXPECT_THROW(draw_poll(pop, b, 1.0, 1), ConfigError);
  EXPECT_THROW(draw_poll(pop, b, 0.0, 1), ConfigError);
}

TEST(Poll, NearCompleteSampleMatchesRecount) {
  const auto e = election(4, 100, 2);
  const auto& schema = e.pop.schema;
  std::vector<double> ta(schema.cell_count(), 0.0), tb(schema.cell_count(), 0.0);
  for (std::size_t r = 0; r < e.pop.regions.size(); ++r)
    for (std::size_t i = 0; i < e.pop.regions[r].size(); ++i) {
      const auto c = schema.cell_index(e.pop.regions[r].individuals[i].values);
      (e.ballots.votes[r][i] == Vote::A ? ta : tb)[c] += 1.0;
    }
  const auto poll = draw_poll(e.pop, e.ballots, 0.999999, 7);
  ASSERT_EQ(poll.respondents, 99u);
  double missing = 0.0;
  for (std::size_t c = 0; c < schema.cell_count(); ++c) {
    EXPECT_LE(poll.count_a[c], ta[c]);
    EXPECT_LE(poll.count_b[c], tb[c]);
    missing += ta[c] - poll.count_a[c] + tb[c] - poll.count_b[c];
  }
  EXPECT_EQ(missing, 1.0);
}

TEST(Poll, CellsSumToSampledVoteSplit) {
  const auto e = election(10, 5000, 3);
  const auto poll = draw_poll(e.pop, e.ballots, 0.1, 9);
  // Replay the sample from the documented substream.
  Rng rng = make_rng(9, Stream::poll_sample);
  const auto picked = sample_without_replacement(rng, 5000, 500);
  const auto offsets = detail::region_offsets(e.pop);
  double a = 0.0, b = 0.0;
  for (auto g : picked) {
    const auto r = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), g) - offsets.begin() - 1);
    (e.ballots.votes[r][g - offsets[r]] == Vote::A ? a : b) += 1.0;
  }
  EXPECT_EQ(poll.total_a(), a);
  EXPECT_EQ(poll.total() - poll.total_a(), b);
}

TEST(Poll, SamplingIsUnbiased) {
  const auto e = election(10, 20000, 4);
  std::vector<double> diffs;
  for (std::uint64_t seed = 1; seed <= 60; ++seed)
    diffs.push_back(draw_poll(e.pop, e.ballots, 0.05, seed).share_a() - e.results.global_share_a);
  double m = 0.0, v = 0.0;
  for (double d : diffs) m += d / diffs.size();
  for (double d : diffs) v += (d - m) * (d - m) / (diffs.size() - 1);
  EXPECT_LT(std::abs(m), 3.0 * std::sqrt(v / diffs.size()));
}

TEST(PollNoise, ZeroTargetLeavesTableUnchanged) {
  const auto e = election(5, 4000, 5);
  const auto poll = draw_poll(e.pop, e.ballots, 0.05, 5);
  const auto noisy = inject_poll_noise(poll, 0.0, 5);
  EXPECT_EQ(noisy.count_a, poll.count_a);
  EXPECT_EQ(noisy.count_b, poll.count_b);
  EXPECT_THROW(inject_poll_noise(poll, -0.1, 5), ConfigError);
}

TEST(PollNoise, CalibratedToTargetError) {
  const auto e = election(20, 40000, 6);
  const auto poll = draw_poll(e.pop, e.ballots, 0.05, 6);
  for (auto scope : {PollNoiseScope::table, PollNoiseScope::cell}) {
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto noisy = inject_poll_noise(poll, 0.029, seed, scope);
      mean += std::abs(noisy.share_a() - poll.share_a()) / 100.0;
      for (std::size_t c = 0; c < noisy.cell_count(); ++c) {
        ASSERT_GE(noisy.count_a[c], 0.0);
        ASSERT_GE(noisy.count_b[c], 0.0);
      }
    }
    EXPECT_NEAR(mean, 0.029, 0.01) << (scope == PollNoiseScope::table ? "table" : "cell");
  }
}

TEST(PollNoise, SingleCellMatchesMonteCarloOracle) {
  PollTable one;
  one.count_a = {300.0};
  one.count_b = {700.0};
  const double sigma = poll_noise_sigma(one, 0.02, PollNoiseScope::table);
  // Linearized share change is s(1-s) * 2 eps; check sigma against it.
  EXPECT_NEAR(sigma * 2 * 0.3 * 0.7 * detail::truncated_half_normal_mean(), 0.02, 1e-12);
  std::vector<double> got, ref;
  std::ranlux48 oracle(99);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::uint64_t seed = 1; seed <= 2000; ++seed) {
    got.push_back(inject_poll_noise(one, 0.02, seed).share_a() - 0.3);
    double e;
    do e = z(oracle);
    while (std::abs(e) > 3.0);
    e *= sigma;
    ref.push_back(300 * (1 + e) / (300 * (1 + e) + 700 * (1 - e)) - 0.3);
  }
  // KS critical value at alpha = 0.001 for two samples of 2000.
  EXPECT_LT(ks_statistic(got, ref), 1.95 * std::sqrt(2.0 / 2000));
}

TEST(PollNoise, TruncatedHalfNormalMean) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  double m = 0.0;
  int n = 0;
  while (n < 400000) {
    const double x = z(rng);
    if (std::abs(x) > 3.0) continue;
    m += std::abs(x);
    ++n;
  }
  EXPECT_NEAR(m / n, detail::truncated_half_normal_mean(), 0.003);
}

TEST(PollNoise, CountsStayNonNegativeUnderLargeNoise) {
  const auto p = two_cell_poll(10, 0, 0, 10);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto noisy = inject_poll_noise(p, 0.4, seed, PollNoiseScope::cell);
    for (std::size_t c = 0; c < 2; ++c) {
      EXPECT_GE(noisy.count_a[c], 0.0);
      EXPECT_GE(noisy.count_b[c], 0.0);
    }
  }
}

TEST(PollError, Examples) {
  RegionResults r;
  r.global_share_a = 0.50;
  EXPECT_NEAR(poll_error(two_cell_poll(52, 48, 0, 0), r), 0.02, 1e-12);
  EXPECT_EQ(poll_error(two_cell_poll(25, 25, 25, 25), r), 0.0);
  r.global_share_a = 0.499;
  EXPECT_NEAR(poll_error(two_cell_poll(471, 529, 0, 0), r), 0.028, 1e-12);
}
