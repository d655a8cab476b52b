#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "votesim/error.hpp"

namespace votesim {

using json = nlohmann::json;

enum class AttributeKind { categorical, binned };

// One voter attribute. Categorical attributes carry explicit probabilities;
// binned attributes are sampled from a Gaussian and cut at `edges`
// (interior cut points, so labels.size() == edges.size() + 1).
struct AttributeDef {
  std::string name;
  AttributeKind kind = AttributeKind::categorical;
  std::vector<std::string> labels;
  std::vector<double> probabilities;
  std::vector<double> edges;
  double mean = 0.0;
  double sd = 1.0;

  std::size_t category_count() const noexcept { return labels.size(); }

  // Bin index of a continuous draw; values equal to an edge go to the upper bin.
  std::size_t bin_of(double value) const {
    std::size_t b = 0;
    while (b < edges.size() && value >= edges[b]) ++b;
    return b;
  }

  // Category probabilities; for binned attributes these follow from the
  // Gaussian CDF at the cut points.
  std::vector<double> category_probabilities() const {
    if (kind == AttributeKind::categorical) return probabilities;
    std::vector<double> p;
    double prev = 0.0;
    for (double e : edges) {
      const double c = 0.5 * std::erfc(-(e - mean) / (sd * std::sqrt(2.0)));
      p.push_back(c - prev);
      prev = c;
    }
    p.push_back(1.0 - prev);
    return p;
  }
};

class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<AttributeDef> attributes)
      : attributes_(std::move(attributes)) {
    validate();
  }

  const std::vector<AttributeDef>& attributes() const noexcept { return attributes_; }
  const AttributeDef& attribute(std::size_t a) const { return attributes_.at(a); }
  std::size_t size() const noexcept { return attributes_.size(); }
  bool empty() const noexcept { return attributes_.empty(); }

  std::size_t category_count(std::size_t a) const { return attributes_.at(a).category_count(); }

  // Total number of one-hot features.
  std::size_t feature_count() const {
    std::size_t n = 0;
    for (const auto& a : attributes_) n += a.category_count();
    return n;
  }
  std::size_t feature_offset(std::size_t a) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a; ++i) n += attributes_[i].category_count();
    return n;
  }

  // Number of cells in the full cross-product of categories.
  std::size_t cell_count() const {
    std::size_t n = 1;
    for (const auto& a : attributes_) n *= a.category_count();
    return n;
  }

  // Mixed-radix index with the first attribute most significant.
  template <typename Values>
  std::size_t cell_index(const Values& values) const {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < attributes_.size(); ++a)
      idx = idx * attributes_[a].category_count() + static_cast<std::size_t>(values[a]);
    return idx;
  }
  std::vector<std::size_t> cell_values(std::size_t index) const {
    std::vector<std::size_t> v(attributes_.size());
    for (std::size_t a = attributes_.size(); a-- > 0;) {
      v[a] = index % attributes_[a].category_count();
      index /= attributes_[a].category_count();
    }
    return v;
  }

  std::size_t find(const std::string& name) const {
    for (std::size_t a = 0; a < attributes_.size(); ++a)
      if (attributes_[a].name == name) return a;
    throw ConfigError("unknown attribute '" + name + "'");
  }

  std::size_t find_label(std::size_t a, const std::string& label) const {
    const auto& labels = attributes_.at(a).labels;
    for (std::size_t c = 0; c < labels.size(); ++c)
      if (labels[c] == label) return c;
    throw ConfigError("attribute '" + attributes_[a].name + "' has no category '" + label + "'");
  }

 private:
  void validate();

  std::vector<AttributeDef> attributes_;
};

inline void AttributeSchema::validate() {
  if (attributes_.empty()) throw ConfigError("schema needs at least one attribute");
  std::set<std::string> names;
  for (auto& a : attributes_) {
    if (a.name.empty()) throw ConfigError("attribute with empty name");
    if (!names.insert(a.name).second) throw ConfigError("duplicate attribute '" + a.name + "'");
    if (a.labels.empty()) throw ConfigError("attribute '" + a.name + "' has no categories");
    std::set<std::string> seen;
    for (const auto& l : a.labels) {
      if (l.empty() || l.find_first_of(",\n\r\"") != std::string::npos)
        throw ConfigError("attribute '" + a.name + "': invalid category label '" + l + "'");
      if (!seen.insert(l).second)
        throw ConfigError("attribute '" + a.name + "': duplicate category '" + l + "'");
    }
    if (a.kind == AttributeKind::categorical) {
      if (a.probabilities.size() != a.labels.size())
        throw ConfigError("attribute '" + a.name + "': probability count does not match categories");
      double sum = 0.0;
      for (double p : a.probabilities) {
        if (!std::isfinite(p) || p < 0.0)
          throw ConfigError("attribute '" + a.name + "': negative or non-finite probability");
        sum += p;
      }
      // Hand-entered decimals are accepted up to 1e-6 and renormalized.
      if (std::abs(sum - 1.0) > 1e-6) {
        std::ostringstream os;
        os << "attribute '" << a.name << "': probabilities sum to " << sum << ", expected 1";
        throw ConfigError(os.str());
      }
      for (double& p : a.probabilities) p /= sum;
    } else {
      if (a.edges.size() + 1 != a.labels.size())
        throw ConfigError("attribute '" + a.name + "': binned attribute needs labels = edges + 1");
      for (std::size_t i = 1; i < a.edges.size(); ++i)
        if (!(a.edges[i] > a.edges[i - 1]))
          throw ConfigError("attribute '" + a.name + "': bin edges must be strictly increasing");
      if (!(a.sd > 0.0) || !std::isfinite(a.mean))
        throw ConfigError("attribute '" + a.name + "': Gaussian needs finite mean and sd > 0");
    }
  }
}

inline AttributeSchema schema_from_json(const json& j) {
  const json& list = j.contains("attributes") ? j.at("attributes") : j;
  if (!list.is_array()) throw ConfigError("'attributes' must be a list");
  std::vector<AttributeDef> defs;
  for (const auto& item : list) {
    AttributeDef d;
    try {
      d.name = item.at("name").get<std::string>();
      d.labels = item.at("labels").get<std::vector<std::string>>();
      const auto kind = item.value("kind", std::string("categorical"));
      if (kind == "categorical") {
        d.kind = AttributeKind::categorical;
        d.probabilities = item.at("probabilities").get<std::vector<double>>();
      } else if (kind == "binned") {
        d.kind = AttributeKind::binned;
        d.edges = item.at("edges").get<std::vector<double>>();
        d.mean = item.at("mean").get<double>();
        d.sd = item.at("sd").get<double>();
      } else {
        throw ConfigError("attribute '" + d.name + "': unknown kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed attribute block: ") + e.what());
    }
    defs.push_back(std::move(d));
  }
  return AttributeSchema(std::move(defs));
}

inline json schema_to_json(const AttributeSchema& schema) {
  json list = json::array();
  for (const auto& a : schema.attributes()) {
    json item{{"name", a.name}, {"labels", a.labels}};
    if (a.kind == AttributeKind::categorical) {
      item["kind"] = "categorical";
      item["probabilities"] = a.probabilities;
    } else {
      item["kind"] = "binned";
      item["edges"] = a.edges;
      item["mean"] = a.mean;
      item["sd"] = a.sd;
    }
    list.push_back(std::move(item));
  }
  return json{{"attributes", list}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

inline AttributeSchema load_schema(const std::string& config_path) {
  return schema_from_json(read_json_file(config_path));
}

}  // namespace votesim
