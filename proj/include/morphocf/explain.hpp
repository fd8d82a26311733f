#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphocf/association.hpp"
#include "morphocf/coverage.hpp"
#include "morphocf/dataset.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/errors.hpp"
#include "morphocf/predictor.hpp"
#include "morphocf/schema.hpp"

namespace morphocf {

enum class Relaxation { strict, relaxed_projection, immutability_withheld };

inline const char* to_string(Relaxation r) {
  switch (r) {
    case Relaxation::strict: return "strict";
    case Relaxation::relaxed_projection: return "relaxed_projection";
    case Relaxation::immutability_withheld: return "immutability_withheld";
  }
  return "?";
}

struct ExplanationRequest {
  EncodedInstance instance;
  std::set<ClassId> target_classes;  // empty = every class except the instance's
  std::size_t n_counterfactuals = 1;
  double step_ratio = 0.5;
  std::size_t max_steps = 10;
};

enum class Viability { viable, class_only, invalid };

struct Projection {
  EncodedInstance point;
  Viability viability = Viability::invalid;
};

struct Candidate {
  EncodedInstance point;       // boundary intersection, snapped
  std::size_t source_ball = 0;
  EncodedInstance projection;  // sparsified projected center
  double distance_to_instance = 0.0;
};

struct CounterfactualEntry {
  EncodedInstance point;
  ClassId cls = 0;
  Relaxation level = Relaxation::strict;
  std::size_t source_ball = 0;
  std::vector<std::string> changed_features;
};

struct ExplainStats {
  std::size_t candidates_strict = 0;
  std::size_t candidates_relaxed = 0;
  std::size_t candidates_withheld = 0;
  bool repaired = false;
};

struct ExplanationResult {
  bool success = false;
  ClassId original_class = 0;
  Relaxation level = Relaxation::strict;
  std::vector<CounterfactualEntry> counterfactuals;
  std::optional<EncodedInstance> semifactual;
  ExplainStats stats;
};

// Projects a ball center onto the subspace where the instance's immutable
// features keep their values. Viable projections stay strictly inside the
// ball and keep its class; class_only drops the containment requirement.
inline Projection project_center(const Ball& ball, const EncodedInstance& instance,
                                 const FeatureSchema& schema, const Scaler& scaler,
                                 const Predictor& predictor, const DistanceSpec& spec,
                                 bool withhold_immutability = false) {
  Projection out;
  out.point = ball.center;
  out.point.raw_id.reset();
  if (!withhold_immutability) {
    for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
      const auto& f = schema.feature(fi);
      if (!f.immutable) continue;
      const std::size_t off = schema.offset(fi);
      for (std::size_t c = 0; c < f.width(); ++c)
        out.point.values[off + c] = instance.values[off + c];
    }
  }
  out.point = snap_to_schema(out.point, schema, scaler, &instance);
  const bool class_holds = predictor.predict_one(out.point) == ball.cls;
  if (!class_holds) {
    out.viability = Viability::invalid;
  } else if (distance(out.point.values, ball.center.values, spec) < ball.radius) {
    out.viability = Viability::viable;
  } else {
    out.viability = Viability::class_only;
  }
  return out;
}

// Reverts features of the projection toward the instance, cheapest encoded
// difference first (one-hot groups count half their L1 span, ties by schema
// order), keeping a revert only when the predicted class survives it.
inline EncodedInstance sparsify_projection(const EncodedInstance& proj,
                                           const EncodedInstance& instance, ClassId target,
                                           const Predictor& predictor,
                                           const FeatureSchema& schema) {
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
      d += std::abs(proj.values[off + c] - instance.values[off + c]);
    if (f.is_categorical()) d *= 0.5;
    if (d > 0.0) order.push_back({fi, d});
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Item& a, const Item& b) { return a.diff < b.diff; });

  EncodedInstance cur = proj;
  for (const Item& it : order) {
    const auto& f = schema.feature(it.fi);
    const std::size_t off = schema.offset(it.fi);
    EncodedInstance trial = cur;
    for (std::size_t c = 0; c < f.width(); ++c)
      trial.values[off + c] = instance.values[off + c];
    if (predictor.predict_one(trial) == target) cur = std::move(trial);
  }
  return cur;
}

// Intersection of the instance-to-projection segment with the bisector of
// the two balls' signed surface distances. The root-find runs unsnapped;
// only the emitted point is snapped back to the schema.
inline EncodedInstance boundary_candidate(const EncodedInstance& instance, const Ball& assoc,
                                          const Ball& opp, const EncodedInstance& proj,
                                          const DistanceSpec& spec, const FeatureSchema& schema,
                                          const Scaler& scaler) {
  const std::size_t w = instance.width();
  auto at = [&](double t) {
    std::vector<double> p(w);
    for (std::size_t c = 0; c < w; ++c)
      p[c] = instance.values[c] + t * (proj.values[c] - instance.values[c]);
    return p;
  };
  auto g = [&](const std::vector<double>& p) {
    return signed_surface_distance(p, assoc, spec) - signed_surface_distance(p, opp, spec);
  };
  if (g(at(0.0)) >= 0.0)
    return snap_to_schema(EncodedInstance(at(0.0)), schema, scaler, &instance);
  if (g(at(1.0)) < 0.0) return snap_to_schema(proj, schema, scaler, &instance);

  // The bracket keeps g(lo) < 0 <= g(hi); the emitted point is the hi end so
  // the candidate never lands short of the crossing.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(at(mid));
    if (gm < 0.0) {
      lo = mid;
      continue;
    }
    hi = mid;
    if (gm <= 1e-6) break;
  }
  return snap_to_schema(EncodedInstance(at(hi)), schema, scaler, &instance);
}

struct WalkResult {
  EncodedInstance point;
  bool found = false;
  std::optional<EncodedInstance> last_same_class;
};

// Line search from the boundary candidate toward the projection in
// geometrically shrinking intervals. The start point is checked before any
// step. If the walk exhausts its budget, the projection itself is returned
// (it carries the target class by precondition).
inline WalkResult walk_to_class(const EncodedInstance& start, const EncodedInstance& proj,
                                ClassId target, ClassId original, const Predictor& predictor,
                                const FeatureSchema& schema, const Scaler& scaler,
                                const EncodedInstance& instance, double step_ratio,
                                std::size_t max_steps) {
  WalkResult out;
  EncodedInstance cand = start;
  for (std::size_t t = 0; t <= max_steps; ++t) {
    const ClassId c = predictor.predict_one(cand);
    if (c == target) {
      out.point = std::move(cand);
      out.found = true;
      return out;
    }
    if (c == original) out.last_same_class = cand;
    if (t == max_steps) break;
    EncodedInstance next = cand;
    for (std::size_t col = 0; col < next.width(); ++col)
      next.values[col] += step_ratio * (proj.values[col] - next.values[col]);
    cand = snap_to_schema(next, schema, scaler, &instance);
  }
  out.point = proj;
  out.found = false;
  return out;
}

namespace detail {

inline std::vector<std::string> changed_feature_names(const EncodedInstance& cf,
                                                      const EncodedInstance& instance,
                                                      const FeatureSchema& schema) {
  std::vector<std::string> names;
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (cf.values[off + c] != instance.values[off + c]) {
        names.push_back(f.name);
        break;
      }
    }
  }
  return names;
}

constexpr std::uint32_t kQueryId = std::numeric_limits<std::uint32_t>::max();

} // namespace detail

inline ExplanationResult explain(const ExplanationRequest& req, const Coverage& cov,
                                 const Predictor& predictor, const FeatureSchema& schema,
                                 const Dataset* ds = nullptr) {
  if (cov.balls.empty()) throw EmptyCoverage("explain needs a nonempty coverage");
  if (req.instance.width() != cov.balls.front().center.width())
    throw CoverageMismatch("instance width does not match coverage");
  if (req.n_counterfactuals < 1) throw Error("n_counterfactuals must be at least 1");
  if (!(req.step_ratio > 0.0 && req.step_ratio < 1.0))
    throw Error("step_ratio must lie in (0,1)");

  const DistanceSpec& spec = cov.spec;
  const Scaler& scaler = cov.scaler;
  const ClassId original = predictor.predict_one(req.instance);

  std::set<ClassId> targets = req.target_classes;
  if (targets.empty()) {
    for (std::size_t k = 0; k < predictor.n_classes(); ++k)
      if (static_cast<ClassId>(k) != original) targets.insert(static_cast<ClassId>(k));
  }
  if (targets.contains(original)) throw Error("target classes must exclude the instance's class");
  if (targets.empty()) throw NoOpposingBalls("predictor exposes a single class");

  ExplanationResult result;
  result.original_class = original;

  // Working copy of the ball list; the repair branch rewrites one entry.
  std::vector<Ball> balls = cov.balls;
  Association assoc = associate(req.instance.values, balls, spec);

  if (balls[assoc.ball_index].cls != original) {
    // The instance sits in (or nearest to) a ball of the wrong class. Re-cover
    // that ball's members together with the instance and splice the fragments
    // in; the rest of the coverage is untouched.
    result.stats.repaired = true;
    const Ball offending = balls[assoc.ball_index];
    std::vector<std::uint32_t> ids;
    std::vector<const EncodedInstance*> xs;
    std::vector<ClassId> labels;
    if (ds != nullptr) {
      for (std::uint32_t id : offending.covered) {
        if (id >= ds->size()) throw CoverageMismatch("covered id out of range");
        ids.push_back(id);
        xs.push_back(&ds->encoded[id]);
        labels.push_back(offending.cls);
      }
    } else {
      // Without the dataset only the center is recoverable from the ball.
      ids.push_back(0);
      xs.push_back(&offending.center);
      labels.push_back(offending.cls);
    }
    ids.push_back(detail::kQueryId);
    xs.push_back(&req.instance);
    labels.push_back(original);

    std::vector<Ball> fragments = recover_subset(ids, xs, labels, spec);
    balls.erase(balls.begin() + static_cast<std::ptrdiff_t>(assoc.ball_index));
    std::size_t own = balls.size();
    for (std::size_t f = 0; f < fragments.size(); ++f) {
      const auto& cv = fragments[f].covered;
      if (std::find(cv.begin(), cv.end(), detail::kQueryId) != cv.end()) own = balls.size() + f;
    }
    balls.insert(balls.end(), fragments.begin(), fragments.end());
    assoc.ball_index = own;
    assoc.containment = Containment::single;
  }

  bool any_target_ball = false;
  for (const Ball& b : balls)
    if (targets.contains(b.cls)) {
      any_target_ball = true;
      break;
    }
  if (!any_target_ball) throw NoOpposingBalls("no ball carries a requested target class");

  const Ball& home = balls[assoc.ball_index];

  std::vector<Candidate> bcl;
  for (Relaxation level : {Relaxation::strict, Relaxation::relaxed_projection,
                           Relaxation::immutability_withheld}) {
    std::vector<Candidate> found;
    for (std::size_t bi = 0; bi < balls.size(); ++bi) {
      const Ball& opp = balls[bi];
      if (!targets.contains(opp.cls)) continue;
      Projection proj =
          project_center(opp, req.instance, schema, scaler, predictor, spec,
                         level == Relaxation::immutability_withheld);
      const bool usable = (level == Relaxation::strict)
                              ? proj.viability == Viability::viable
                              : proj.viability != Viability::invalid;
      if (!usable) continue;
      EncodedInstance sparse =
          sparsify_projection(proj.point, req.instance, opp.cls, predictor, schema);
      EncodedInstance cand =
          boundary_candidate(req.instance, home, opp, sparse, spec, schema, scaler);
      Candidate entry;
      entry.distance_to_instance = distance(req.instance.values, cand.values, spec);
      entry.point = std::move(cand);
      entry.source_ball = bi;
      entry.projection = std::move(sparse);
      found.push_back(std::move(entry));
    }
    switch (level) {
      case Relaxation::strict: result.stats.candidates_strict = found.size(); break;
      case Relaxation::relaxed_projection: result.stats.candidates_relaxed = found.size(); break;
      case Relaxation::immutability_withheld:
        result.stats.candidates_withheld = found.size();
        break;
    }
    if (!found.empty()) {
      result.level = level;
      bcl = std::move(found);
      break;
    }
  }
  if (bcl.empty()) throw NoOpposingBalls("every projection was rejected");

  std::sort(bcl.begin(), bcl.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance_to_instance != b.distance_to_instance)
      return a.distance_to_instance < b.distance_to_instance;
    return a.source_ball < b.source_ball;
  });
  if (bcl.size() > req.n_counterfactuals) bcl.resize(req.n_counterfactuals);

  for (std::size_t e = 0; e < bcl.size(); ++e) {
    const Candidate& c = bcl[e];
    WalkResult w = walk_to_class(c.point, c.projection, balls[c.source_ball].cls, original,
                                 predictor, schema, scaler, req.instance, req.step_ratio,
                                 req.max_steps);
    CounterfactualEntry entry;
    entry.point = std::move(w.point);
    entry.cls = balls[c.source_ball].cls;
    entry.level = result.level;
    entry.source_ball = c.source_ball;
    entry.changed_features = detail::changed_feature_names(entry.point, req.instance, schema);
    result.counterfactuals.push_back(std::move(entry));
    if (e == 0 && w.last_same_class) result.semifactual = std::move(w.last_same_class);
  }
  result.success = !result.counterfactuals.empty();
  return result;
}

inline nlohmann::ordered_json result_to_json(const ExplanationResult& res,
                                             const EncodedInstance& instance,
                                             std::size_t instance_id) {
  nlohmann::ordered_json j;
  j["instance_id"] = instance_id;
  j["success"] = res.success;
  j["level"] = to_string(res.level);
  j["counterfactuals"] = nlohmann::ordered_json::array();
  for (const auto& cf : res.counterfactuals) {
    double l1 = 0.0, l2 = 0.0, linf = 0.0;
    for (std::size_t c = 0; c < cf.point.width(); ++c) {
      const double d = std::abs(cf.point.values[c] - instance.values[c]);
      l1 += d;
      l2 += d * d;
      linf = std::max(linf, d);
    }
    nlohmann::ordered_json je;
    je["values"] = cf.point.values;
    je["class"] = cf.cls;
    je["changed_features"] = cf.changed_features;
    je["l0"] = cf.changed_features.size();
    je["l1"] = l1;
    je["l2"] = l2;
    je["linf"] = linf;
    j["counterfactuals"].push_back(std::move(je));
  }
  if (res.semifactual) j["semifactual"] = res.semifactual->values;
  return j;
}

} // namespace morphocf
