#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "votesim/error.hpp"
#include "votesim/random.hpp"
#include "votesim/schema.hpp"

namespace votesim {

using Category = std::uint16_t;

struct Individual {
  std::vector<Category> values;  // one category index per schema attribute
  bool mail_in = false;
  int region_id = 0;
};

// desirability[a][c]: attraction of this region for individuals whose
// attribute `a` is category `c`.
struct Region {
  int region_id = 0;
  std::vector<Individual> individuals;
  std::vector<std::vector<double>> desirability;

  std::size_t size() const noexcept { return individuals.size(); }
};

struct Population {
  AttributeSchema schema;
  std::vector<Region> regions;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.size();
    return n;
  }
  std::size_t region_count() const noexcept { return regions.size(); }
};

// fractions[a][c]: share of the region's individuals in category c of attribute a.
struct DemographicProfile {
  std::vector<std::vector<double>> fractions;
};

struct DesirabilityOverride {
  int region_id = 0;
  std::size_t attribute = 0;
  std::size_t category = 0;
  double a = 1.0;
  double b = 1.0;
};

// Beta(a, b) prior per region and category; `fixed` pins every entry.
struct DesirabilityPrior {
  double a = 1.0;
  double b = 1.0;
  std::optional<double> fixed;
  std::vector<DesirabilityOverride> overrides;
};

// Mail-in preference is logistic(bias + sum of per-category weights).
struct MailInWeights {
  double bias = 0.0;
  std::vector<std::vector<double>> weights;  // [attribute][category]; empty means all zero
};

namespace detail {

inline Category draw_category(const AttributeDef& def, const std::vector<double>& cumulative,
                              Rng& rng) {
  if (def.kind == AttributeKind::binned) {
    std::normal_distribution<double> normal(def.mean, def.sd);
    return static_cast<Category>(def.bin_of(normal(rng)));
  }
  const double u = uniform01(rng);
  std::size_t c = 0;
  while (c + 1 < cumulative.size() && u >= cumulative[c]) ++c;
  return static_cast<Category>(c);
}

inline double draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace detail

// Evenly sized regions (sizes differ by at most one); attributes are drawn
// independently per individual from a substream keyed by region.
inline Population generate_population(const AttributeSchema& schema, std::size_t n_regions,
                                      std::size_t pop_size, std::uint64_t seed,
                                      unsigned threads = 1) {
  if (n_regions == 0) throw ConfigError("generate_population: zero regions");
  if (pop_size == 0) throw ConfigError("generate_population: zero population");
  if (pop_size < n_regions)
    throw ConfigError("generate_population: population smaller than region count");
  if (schema.empty()) throw ConfigError("generate_population: empty schema");

  std::vector<std::vector<double>> cumulative(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a) {
    double acc = 0.0;
    for (double p : schema.attribute(a).category_probabilities()) {
      acc += p;
      cumulative[a].push_back(acc);
    }
  }

  Population pop;
  pop.schema = schema;
  pop.seed = seed;
  pop.regions.resize(n_regions);
  const std::size_t base = pop_size / n_regions;
  const std::size_t extra = pop_size % n_regions;
  parallel_for(n_regions, threads, [&](std::size_t r) {
    Region& region = pop.regions[r];
    region.region_id = static_cast<int>(r);
    const std::size_t n = base + (r < extra ? 1 : 0);
    Rng rng = make_rng(seed, Stream::attributes, {r});
    region.individuals.resize(n);
    for (auto& ind : region.individuals) {
      ind.region_id = static_cast<int>(r);
      ind.values.resize(schema.size());
      for (std::size_t a = 0; a < schema.size(); ++a)
        ind.values[a] = detail::draw_category(schema.attribute(a), cumulative[a], rng);
    }
  });
  return pop;
}

inline Population assign_desirability(Population pop, const DesirabilityPrior& prior,
                                      std::uint64_t seed) {
  auto check = [](double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw ConfigError("desirability prior: Beta parameters must be positive and finite");
  };
  check(prior.a, prior.b);
  if (prior.fixed && !(*prior.fixed >= 0.0 && *prior.fixed <= 1.0))
    throw ConfigError("desirability prior: fixed value outside [0, 1]");
  for (const auto& o : prior.overrides) {
    check(o.a, o.b);
    if (o.region_id < 0 || static_cast<std::size_t>(o.region_id) >= pop.regions.size() ||
        o.attribute >= pop.schema.size() || o.category >= pop.schema.category_count(o.attribute))
      throw ConfigError("desirability prior: override out of range");
  }

  for (auto& region : pop.regions) {
    Rng rng = make_rng(seed, Stream::desirability, {static_cast<std::uint64_t>(region.region_id)});
    region.desirability.assign(pop.schema.size(), {});
    for (std::size_t a = 0; a < pop.schema.size(); ++a) {
      region.desirability[a].resize(pop.schema.category_count(a));
      for (std::size_t c = 0; c < pop.schema.category_count(a); ++c) {
        double aa = prior.a, bb = prior.b;
        bool overridden = false;
        for (const auto& o : prior.overrides)
          if (o.region_id == region.region_id && o.attribute == a && o.category == c) {
            aa = o.a;
            bb = o.b;
            overridden = true;
          }
        // Always consume the draw so overrides do not shift other entries.
        const double draw = detail::draw_beta(aa, bb, rng);
        region.desirability[a][c] = (prior.fixed && !overridden) ? *prior.fixed : draw;
      }
    }
  }
  return pop;
}

// Relocates floor(sample_fraction * size) individuals of every region. Each
// mover picks a destination with probability proportional to the product of
// the destination's desirabilities for the mover's categories, among regions
// still below cap_factor * mean region size. Movers with zero weight
// everywhere choose uniformly among eligible regions.
inline Population redistribute(Population pop, double sample_fraction, double cap_factor,
                               std::uint64_t seed) {
  if (!(sample_fraction >= 0.0 && sample_fraction <= 1.0))
    throw ConfigError("redistribute: sample_fraction must be in [0, 1]");
  if (!(cap_factor >= 1.0)) throw ConfigError("redistribute: cap_factor must be >= 1");
  const std::size_t n_regions = pop.regions.size();
  if (n_regions == 0 || sample_fraction == 0.0) return pop;
  for (const auto& r : pop.regions)
    if (r.desirability.size() != pop.schema.size())
      throw ConfigError("redistribute: desirability not assigned");

  const AttributeSchema& schema = pop.schema;
  const double cap = cap_factor * static_cast<double>(pop.size()) / static_cast<double>(n_regions);

  // weight[cell][region]
  const std::size_t cells = schema.cell_count();
  std::vector<double> weight(cells * n_regions);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto values = schema.cell_values(cell);
    for (std::size_t r = 0; r < n_regions; ++r) {
      double w = 1.0;
      for (std::size_t a = 0; a < schema.size(); ++a) w *= pop.regions[r].desirability[a][values[a]];
      weight[cell * n_regions + r] = w;
    }
  }

  std::vector<Individual> movers;
  for (auto& region : pop.regions) {
    const std::size_t k = static_cast<std::size_t>(
        std::floor(sample_fraction * static_cast<double>(region.size())));
    if (k == 0) continue;
    Rng rng = make_rng(seed, Stream::redistribution, {static_cast<std::uint64_t>(region.region_id)});
    auto picked = sample_without_replacement(rng, region.size(), k);
    std::vector<char> moving(region.size(), 0);
    for (auto i : picked) moving[i] = 1;
    for (auto i : picked) movers.push_back(std::move(region.individuals[i]));
    std::vector<Individual> stay;
    stay.reserve(region.size() - k);
    for (std::size_t i = 0; i < region.size(); ++i)
      if (!moving[i]) stay.push_back(std::move(region.individuals[i]));
    region.individuals = std::move(stay);
  }

  Rng rng = make_rng(seed, Stream::redistribution, {~std::uint64_t{0}});
  std::vector<double> cum(n_regions);
  for (auto& mover : movers) {
    const double* w = &weight[schema.cell_index(mover.values) * n_regions];
    double total = 0.0;
    std::size_t eligible = 0;
    for (std::size_t r = 0; r < n_regions; ++r) {
      const bool open = static_cast<double>(pop.regions[r].size()) < cap;
      eligible += open ? 1 : 0;
      total += open ? w[r] : 0.0;
      cum[r] = total;
    }
    if (eligible == 0) throw Error("redistribute: every region is at capacity");
    std::size_t dest = 0;
    if (total > 0.0) {
      const double u = uniform01(rng) * total;
      while (dest + 1 < n_regions && !(u < cum[dest])) ++dest;
      // Skip trailing closed regions that share the final cumulative value.
      while (static_cast<double>(pop.regions[dest].size()) >= cap || w[dest] == 0.0) --dest;
    } else {
      auto pick = uniform_index(rng, eligible);
      for (std::size_t r = 0; r < n_regions; ++r) {
        if (static_cast<double>(pop.regions[r].size()) >= cap) continue;
        if (pick-- == 0) {
          dest = r;
          break;
        }
      }
    }
    mover.region_id = pop.regions[dest].region_id;
    pop.regions[dest].individuals.push_back(std::move(mover));
  }

  for (const auto& r : pop.regions)
    if (r.individuals.empty())
      throw Error("redistribute: region " + std::to_string(r.region_id) + " is empty");
  return pop;
}

inline Population assign_mail_in(Population pop, double sample_fraction,
                                 const MailInWeights& weights, std::uint64_t seed) {
  if (!(sample_fraction >= 0.0 && sample_fraction <= 1.0))
    throw ConfigError("assign_mail_in: sample_fraction must be in [0, 1]");
  if (!weights.weights.empty()) {
    if (weights.weights.size() != pop.schema.size())
      throw ConfigError("assign_mail_in: weight table does not match schema");
    for (std::size_t a = 0; a < pop.schema.size(); ++a)
      if (weights.weights[a].size() != pop.schema.category_count(a))
        throw ConfigError("assign_mail_in: weight table does not match schema");
  }
  for (auto& region : pop.regions) {
    for (auto& ind : region.individuals) ind.mail_in = false;
    const std::size_t k = static_cast<std::size_t>(
        std::floor(sample_fraction * static_cast<double>(region.size())));
    if (k == 0) continue;
    Rng rng = make_rng(seed, Stream::mail_in, {static_cast<std::uint64_t>(region.region_id)});
    for (auto i : sample_without_replacement(rng, region.size(), k)) {
      auto& ind = region.individuals[i];
      double score = weights.bias;
      if (!weights.weights.empty())
        for (std::size_t a = 0; a < ind.values.size(); ++a) score += weights.weights[a][ind.values[a]];
      ind.mail_in = uniform01(rng) < detail::logistic(score);
    }
  }
  return pop;
}

inline DemographicProfile region_demographics(const Region& region, const AttributeSchema& schema) {
  if (region.individuals.empty())
    throw Error("region_demographics: region " + std::to_string(region.region_id) + " is empty");
  DemographicProfile profile;
  profile.fractions.resize(schema.size());
  std::vector<std::vector<std::size_t>> counts(schema.size());
  for (std::size_t a = 0; a < schema.size(); ++a) counts[a].assign(schema.category_count(a), 0);
  for (const auto& ind : region.individuals)
    for (std::size_t a = 0; a < schema.size(); ++a) ++counts[a][ind.values[a]];
  const double n = static_cast<double>(region.individuals.size());
  for (std::size_t a = 0; a < schema.size(); ++a)
    for (auto c : counts[a]) profile.fractions[a].push_back(static_cast<double>(c) / n);
  return profile;
}

}  // namespace votesim
