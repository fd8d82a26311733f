#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphocf/dataset.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/errors.hpp"
#include "morphocf/predictor.hpp"

namespace morphocf {

// Open ball around a training instance. The covered list holds dataset row
// ids; the center always covers itself even when the radius is zero.
struct Ball {
  EncodedInstance center;
  ClassId cls = 0;
  double radius = 0.0;
  std::vector<std::uint32_t> covered;

  bool contains(const std::vector<double>& x, const DistanceSpec& spec) const {
    return distance(center.values, x, spec) < radius;
  }
};

struct Coverage {
  std::string dataset_fp;
  std::string predictor_fp;
  DistanceSpec spec;
  Scaler scaler;
  std::vector<Ball> balls;
};

namespace detail {

// Greedy single-class cover. Points are given as parallel arrays; `dist` maps
// a pair of local positions to their distance. Classes are processed in
// ascending order and each round keeps the first ball of maximal population,
// so the output is deterministic for a fixed input order.
template <typename DistFn>
std::vector<Ball> greedy_cover(const std::vector<std::uint32_t>& ids,
                               const std::vector<const EncodedInstance*>& xs,
                               const std::vector<ClassId>& labels, DistFn&& dist) {
  const std::size_t m = ids.size();
  std::vector<Ball> balls;
  std::vector<ClassId> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  for (ClassId k : classes) {
    std::vector<std::size_t> same, other;
    for (std::size_t p = 0; p < m; ++p) (labels[p] == k ? same : other).push_back(p);

    // Radius of a candidate ball is fixed by the opposing set, so it can be
    // computed once per class.
    std::vector<double> limit(same.size(), std::numeric_limits<double>::infinity());
    for (std::size_t si = 0; si < same.size(); ++si)
      for (std::size_t o : other) limit[si] = std::min(limit[si], dist(same[si], o));

    std::vector<bool> uncovered(same.size(), true);
    std::size_t remaining = same.size();
    while (remaining > 0) {
      std::size_t best = same.size();
      std::size_t best_count = 0;
      std::vector<std::size_t> best_members;
      for (std::size_t si = 0; si < same.size(); ++si) {
        if (!uncovered[si]) continue;
        std::vector<std::size_t> members;
        members.push_back(si);
        for (std::size_t sj = 0; sj < same.size(); ++sj) {
          if (sj == si || !uncovered[sj]) continue;
          if (dist(same[si], same[sj]) < limit[si]) members.push_back(sj);
        }
        if (members.size() > best_count) {
          best = si;
          best_count = members.size();
          best_members = std::move(members);
        }
      }
      Ball b;
      b.center = *xs[same[best]];
      b.cls = k;
      b.radius = limit[best];
      for (std::size_t sm : best_members) {
        b.covered.push_back(ids[same[sm]]);
        uncovered[sm] = false;
        --remaining;
      }
      std::sort(b.covered.begin(), b.covered.end());
      balls.push_back(std::move(b));
    }
  }
  return balls;
}

} // namespace detail

inline Coverage build_coverage(const Dataset& ds, const std::vector<ClassId>& labels,
                               const DistanceSpec& spec, const std::string& predictor_fp,
                               const DistanceMatrix* cache = nullptr) {
  if (ds.size() == 0) throw EmptyDataset("cannot cover an empty dataset");
  if (labels.size() != ds.size()) throw ShapeMismatch("label count does not match dataset");
  std::vector<std::uint32_t> ids(ds.size());
  std::vector<const EncodedInstance*> xs(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ids[i] = static_cast<std::uint32_t>(i);
    xs[i] = &ds.encoded[i];
  }
  Coverage cov;
  cov.dataset_fp = dataset_fingerprint(ds);
  cov.predictor_fp = predictor_fp;
  cov.spec = spec;
  cov.scaler = ds.scaler;
  if (cache != nullptr) {
    if (cache->size() != ds.size()) throw ShapeMismatch("distance cache size mismatch");
    cov.balls = detail::greedy_cover(ids, xs, labels, [&](std::size_t a, std::size_t b) {
      return (*cache)(a, b);
    });
  } else {
    cov.balls = detail::greedy_cover(ids, xs, labels, [&](std::size_t a, std::size_t b) {
      return distance(xs[a]->values, xs[b]->values, spec);
    });
  }
  return cov;
}

// Re-covers an arbitrary point set (used when a query instance lands in a
// ball of the wrong class and the neighbourhood has to be repartitioned).
inline std::vector<Ball> recover_subset(const std::vector<std::uint32_t>& ids,
                                        const std::vector<const EncodedInstance*>& xs,
                                        const std::vector<ClassId>& labels,
                                        const DistanceSpec& spec) {
  return detail::greedy_cover(ids, xs, labels, [&](std::size_t a, std::size_t b) {
    return distance(xs[a]->values, xs[b]->values, spec);
  });
}

inline nlohmann::ordered_json coverage_to_json(const Coverage& cov) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["dataset_fp"] = cov.dataset_fp;
  j["predictor_fp"] = cov.predictor_fp;
  j["metric"] = to_string(cov.spec.metric);
  j["scaler"] = {{"mins", cov.scaler.mins()}, {"maxs", cov.scaler.maxs()}};
  j["balls"] = nlohmann::ordered_json::array();
  for (const Ball& b : cov.balls) {
    nlohmann::ordered_json jb;
    jb["center"] = b.center.values;
    jb["class"] = b.cls;
    if (std::isinf(b.radius))
      jb["radius"] = "inf";
    else
      jb["radius"] = b.radius;
    jb["covered"] = b.covered;
    j["balls"].push_back(std::move(jb));
  }
  return j;
}

inline void save_coverage(const Coverage& cov, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << coverage_to_json(cov).dump(2) << '\n';
}

inline Coverage coverage_from_json(const nlohmann::json& j) {
  Coverage cov;
  try {
    if (j.at("version").get<int>() != 1) throw CorruptFile("unsupported coverage version");
    cov.dataset_fp = j.at("dataset_fp").get<std::string>();
    cov.predictor_fp = j.at("predictor_fp").get<std::string>();
    cov.spec.metric = metric_from_string(j.at("metric").get<std::string>());
    cov.scaler = Scaler(j.at("scaler").at("mins").get<std::vector<double>>(),
                        j.at("scaler").at("maxs").get<std::vector<double>>());
    for (const auto& jb : j.at("balls")) {
      Ball b;
      b.center.values = jb.at("center").get<std::vector<double>>();
      b.cls = jb.at("class").get<ClassId>();
      const auto& jr = jb.at("radius");
      if (jr.is_string()) {
        if (jr.get<std::string>() != "inf") throw CorruptFile("bad radius literal");
        b.radius = std::numeric_limits<double>::infinity();
      } else {
        b.radius = jr.get<double>();
      }
      b.covered = jb.at("covered").get<std::vector<std::uint32_t>>();
      cov.balls.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("malformed coverage file: ") + e.what());
  }
  return cov;
}

inline Coverage load_coverage(const std::string& path, const std::string& expect_dataset_fp = "",
                              const std::string& expect_predictor_fp = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("unparseable coverage file: ") + e.what());
  }
  Coverage cov = coverage_from_json(j);
  if (!expect_dataset_fp.empty() && cov.dataset_fp != expect_dataset_fp)
    throw FingerprintMismatch("coverage was built from a different dataset");
  if (!expect_predictor_fp.empty() && cov.predictor_fp != expect_predictor_fp)
    throw FingerprintMismatch("coverage was built with a different predictor");
  return cov;
}

// Validates that a coverage file is usable with the dataset at hand.
inline void check_coverage(const Coverage& cov, const Dataset& ds) {
  for (const Ball& b : cov.balls) {
    if (b.center.width() != ds.width())
      throw CoverageMismatch("ball center width does not match dataset");
    for (std::uint32_t id : b.covered)
      if (id >= ds.size()) throw CoverageMismatch("covered id out of range");
  }
}

} // namespace morphocf
