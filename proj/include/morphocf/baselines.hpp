#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "morphocf/dataset.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/predictor.hpp"
#include "morphocf/schema.hpp"

namespace morphocf {

struct GrowingSpheresConfig {
  std::size_t n_per_layer = 200;
  double initial_radius = 0.1;
  double radius_step = 0.1;
  std::size_t max_layers = 100;
  std::uint64_t rng_seed = 0;
};

struct NiceConfig {
  std::size_t max_swaps = 0;  // 0 = one per feature
};

namespace detail {

// mt19937_64 output is pinned by the standard; only the transforms below are
// hand-rolled because the stdlib distributions differ across libraries.
class DetRng {
public:
  explicit DetRng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    const double u2 = uniform01();
    const double m = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = m * std::sin(a);
    have_spare_ = true;
    return m * std::cos(a);
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace detail

// Uniform sampling on growing spherical shells around x, immutable columns
// frozen. Returns the closest class-flipping sample of the first successful
// layer, sparsified by reverting features toward x (cheapest first) until a
// revert would break the class.
inline std::optional<EncodedInstance> growing_spheres(const EncodedInstance& x,
                                                      const Predictor& predictor,
                                                      const FeatureSchema& schema,
                                                      const Scaler& scaler,
                                                      const GrowingSpheresConfig& cfg) {
  const ClassId original = predictor.predict_one(x);
  std::vector<std::size_t> mutable_cols;
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    if (schema.feature(fi).immutable) continue;
    const std::size_t off = schema.offset(fi);
    for (std::size_t c = 0; c < schema.feature(fi).width(); ++c) mutable_cols.push_back(off + c);
  }
  if (mutable_cols.empty()) return std::nullopt;
  const double dim = static_cast<double>(mutable_cols.size());
  const DistanceSpec euclid{Metric::euclidean};

  detail::DetRng rng(cfg.rng_seed);
  for (std::size_t layer = 0; layer < cfg.max_layers; ++layer) {
    const double r_lo = layer == 0 ? 0.0
                                   : cfg.initial_radius +
                                         static_cast<double>(layer - 1) * cfg.radius_step;
    const double r_hi = cfg.initial_radius + static_cast<double>(layer) * cfg.radius_step;

    std::optional<EncodedInstance> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < cfg.n_per_layer; ++s) {
      std::vector<double> dir(mutable_cols.size());
      double norm = 0.0;
      for (double& d : dir) {
        d = rng.gaussian();
        norm += d * d;
      }
      const double u = rng.uniform01();
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      // Radius density proportional to rho^(d-1) makes the shell uniform.
      const double rho =
          std::pow(std::pow(r_lo, dim) + u * (std::pow(r_hi, dim) - std::pow(r_lo, dim)),
                   1.0 / dim);
      EncodedInstance point = x;
      point.raw_id.reset();
      for (std::size_t k = 0; k < mutable_cols.size(); ++k)
        point.values[mutable_cols[k]] += rho * dir[k] / norm;
      point = snap_to_schema(point, schema, scaler, &x);
      if (predictor.predict_one(point) == original) continue;
      const double d = distance(point.values, x.values, euclid);
      if (d < best_dist) {
        best_dist = d;
        best = std::move(point);
      }
    }
    if (!best) continue;

    // Sparsification pass: undo the cheapest differences while the class
    // survives, stopping at the first one that does not.
    struct Item {
      std::size_t fi;
      double diff;
    };
    std::vector<Item> order;
    for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
      const auto& f = schema.feature(fi);
      const std::size_t off = schema.offset(fi);
      double d = 0.0;
      for (std::size_t c = 0; c < f.width(); ++c)
        d += std::abs(best->values[off + c] - x.values[off + c]);
      if (f.is_categorical()) d *= 0.5;
      if (d > 0.0) order.push_back({fi, d});
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const Item& a, const Item& b) { return a.diff < b.diff; });
    const ClassId flipped = predictor.predict_one(*best);
    for (const Item& it : order) {
      const auto& f = schema.feature(it.fi);
      const std::size_t off = schema.offset(it.fi);
      EncodedInstance trial = *best;
      for (std::size_t c = 0; c < f.width(); ++c) trial.values[off + c] = x.values[off + c];
      if (predictor.predict_one(trial) != flipped) break;
      *best = std::move(trial);
    }
    return best;
  }
  return std::nullopt;
}

// Greedy feature swaps toward the nearest unlike-class training instance.
// The hybrid always sits on a vertex of the hypercube spanned by x and the
// prototype.
inline std::optional<EncodedInstance> nice_counterfactual(
    const EncodedInstance& x, const std::vector<EncodedInstance>& train,
    const std::vector<ClassId>& train_classes, const Predictor& predictor,
    const FeatureSchema& schema, const DistanceSpec& spec, const NiceConfig& cfg = {}) {
  const ClassId original = predictor.predict_one(x);

  std::size_t proto = train.size();
  double proto_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train_classes[i] == original) continue;
    const double d = distance(x.values, train[i].values, spec);
    if (d < proto_dist) {
      proto_dist = d;
      proto = i;
    }
  }
  if (proto == train.size()) return std::nullopt;
  const EncodedInstance& prototype = train[proto];

  std::vector<std::size_t> open;
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    for (std::size_t c = 0; c < f.width(); ++c)
      if (x.values[off + c] != prototype.values[off + c]) {
        open.push_back(fi);
        break;
      }
  }

  EncodedInstance hybrid = x;
  hybrid.raw_id.reset();
  const std::size_t budget = cfg.max_swaps == 0 ? schema.feature_count() : cfg.max_swaps;
  for (std::size_t round = 0; round < budget && !open.empty(); ++round) {
    std::size_t best_pos = open.size();
    double best_dist = std::numeric_limits<double>::infinity();
    bool best_flips = false;
    EncodedInstance best_trial;
    for (std::size_t pos = 0; pos < open.size(); ++pos) {
      const auto& f = schema.feature(open[pos]);
      const std::size_t off = schema.offset(open[pos]);
      EncodedInstance trial = hybrid;
      for (std::size_t c = 0; c < f.width(); ++c)
        trial.values[off + c] = prototype.values[off + c];
      const bool flips = predictor.predict_one(trial) != original;
      const double d = distance(trial.values, x.values, spec);
      if (std::make_pair(!flips, d) < std::make_pair(!best_flips, best_dist) ||
          best_pos == open.size()) {
        best_pos = pos;
        best_dist = d;
        best_flips = flips;
        best_trial = std::move(trial);
      }
    }
    hybrid = std::move(best_trial);
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(best_pos));
    if (best_flips) return hybrid;
  }
  return std::nullopt;
}

} // namespace morphocf
