#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "morphocf/errors.hpp"

namespace morphocf {

enum class FeatureKind { continuous, discrete, ordinal, categorical };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::discrete: return "discrete";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::categorical: return "categorical";
  }
  return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "discrete") return FeatureKind::discrete;
  if (s == "ordinal") return FeatureKind::ordinal;
  if (s == "categorical") return FeatureKind::categorical;
  throw BadSchema("unknown feature kind '" + s + "'");
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::string> categories; // categorical only
  bool immutable = false;
  std::optional<double> lower;
  std::optional<double> upper;

  bool is_categorical() const { return kind == FeatureKind::categorical; }
  // discrete and ordinal columns both carry integer ranks
  bool is_integral() const {
    return kind == FeatureKind::discrete || kind == FeatureKind::ordinal;
  }
  std::size_t width() const { return is_categorical() ? categories.size() : 1; }
};

// Ordered feature list plus the encoded-column layout. Categorical features
// expand to one column per category; everything else (ordinals included)
// occupies a single column. Each encoded column maps back to exactly one
// semantic feature.
class FeatureSchema {
public:
  FeatureSchema() = default;

  explicit FeatureSchema(std::vector<FeatureSpec> features, std::string label = "")
      : features_(std::move(features)), label_(std::move(label)) {
    std::unordered_set<std::string> seen;
    offsets_.reserve(features_.size());
    std::size_t off = 0;
    for (const auto& f : features_) {
      if (!seen.insert(f.name).second)
        throw BadSchema("duplicate feature name '" + f.name + "'");
      if (f.is_categorical() && f.categories.size() < 2)
        throw BadSchema("categorical feature '" + f.name + "' needs >= 2 categories");
      if (!f.is_categorical() && !f.categories.empty())
        throw BadSchema("non-categorical feature '" + f.name + "' declares categories");
      if (f.lower && f.upper && *f.lower > *f.upper)
        throw BadSchema("feature '" + f.name + "' has lower > upper");
      offsets_.push_back(off);
      off += f.width();
    }
    width_ = off;
    col_to_feature_.resize(width_);
    for (std::size_t fi = 0; fi < features_.size(); ++fi)
      for (std::size_t c = 0; c < features_[fi].width(); ++c)
        col_to_feature_[offsets_[fi] + c] = fi;
  }

  std::size_t feature_count() const { return features_.size(); }
  std::size_t encoded_width() const { return width_; }
  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& feature(std::size_t i) const { return features_[i]; }
  const std::string& label() const { return label_; }

  std::size_t offset(std::size_t feature_index) const { return offsets_[feature_index]; }
  std::size_t column_feature(std::size_t col) const { return col_to_feature_[col]; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < features_.size(); ++i)
      if (features_[i].name == name) return i;
    return std::nullopt;
  }

private:
  std::vector<FeatureSpec> features_;
  std::string label_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> col_to_feature_;
  std::size_t width_ = 0;
};

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array())
    throw BadSchema("schema JSON needs a 'features' array");
  std::vector<FeatureSpec> specs;
  for (const auto& jf : j["features"]) {
    FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
    if (jf.contains("categories"))
      f.categories = jf["categories"].get<std::vector<std::string>>();
    f.immutable = jf.value("immutable", false);
    if (jf.contains("lower")) f.lower = jf["lower"].get<double>();
    if (jf.contains("upper")) f.upper = jf["upper"].get<double>();
    specs.push_back(std::move(f));
  }
  std::string label = j.value("label", std::string{});
  return FeatureSchema(std::move(specs), std::move(label));
}

inline FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadSchema("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw BadSchema("schema parse error in '" + path + "': " + e.what());
  }
  return schema_from_json(j);
}

} // namespace morphocf
