#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "morphocf/dataset.hpp"
#include "morphocf/distance.hpp"
#include "morphocf/errors.hpp"
#include "morphocf/explain.hpp"
#include "morphocf/predictor.hpp"
#include "morphocf/schema.hpp"

namespace morphocf {

// Per-sample quality metrics. l2 is the squared Euclidean distance; l0,
// constraint_violation and redundancy count semantic features, not encoded
// columns.
struct MetricVector {
  double l0 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double constraint_violation = 0.0;
  double redundancy = 0.0;
  double ynn = 0.0;
  bool success = false;
};

struct MetricOptions {
  bool l0_encoded = false;  // count encoded columns instead of semantic features
  std::size_t ynn_k = 5;
};

inline MetricVector metric_vector(const EncodedInstance& x, const EncodedInstance* cf,
                                  const FeatureSchema& schema, const Predictor& predictor,
                                  const std::vector<EncodedInstance>& train,
                                  const std::vector<ClassId>& train_classes,
                                  const DistanceSpec& spec, const MetricOptions& opts = {}) {
  MetricVector m;
  if (cf == nullptr) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.l0 = m.l1 = m.l2 = m.linf = m.constraint_violation = m.redundancy = m.ynn = nan;
    m.success = false;
    return m;
  }
  if (cf->width() != x.width() || x.width() != schema.encoded_width())
    throw WidthMismatch("metric operands do not match the schema width");

  for (std::size_t c = 0; c < x.width(); ++c) {
    const double d = std::abs(x.values[c] - cf->values[c]);
    if (opts.l0_encoded && d != 0.0) m.l0 += 1.0;
    m.l1 += d;
    m.l2 += d * d;
    m.linf = std::max(m.linf, d);
  }

  const ClassId cf_class = predictor.predict_one(*cf);
  std::vector<std::size_t> changed;
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    bool differs = false;
    for (std::size_t c = 0; c < f.width(); ++c)
      if (x.values[off + c] != cf->values[off + c]) {
        differs = true;
        break;
      }
    if (!differs) continue;
    changed.push_back(fi);
    if (!opts.l0_encoded) m.l0 += 1.0;
    if (f.immutable) m.constraint_violation += 1.0;
  }

  // A change is redundant if undoing it alone leaves the predicted class.
  for (std::size_t fi : changed) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    EncodedInstance reverted = *cf;
    for (std::size_t c = 0; c < f.width(); ++c) reverted.values[off + c] = x.values[off + c];
    if (predictor.predict_one(reverted) == cf_class) m.redundancy += 1.0;
  }

  if (!train.empty()) {
    const std::size_t k = std::min(opts.ynn_k, train.size());
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> dist_to(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
      dist_to[i] = distance(cf->values, train[i].values, spec);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (dist_to[a] != dist_to[b]) return dist_to[a] < dist_to[b];
                        return a < b;
                      });
    std::size_t same = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (train_classes[idx[i]] == cf_class) ++same;
    m.ynn = static_cast<double>(same) / static_cast<double>(k);
  }

  m.success = true;
  return m;
}

// Means over the successful samples; NaN (reported as "Na") when every
// sample failed. The success rate runs over all samples.
struct AggregateMetrics {
  double l0 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  double constraint_violation = 0.0;
  double redundancy = 0.0;
  double ynn = 0.0;
  double success_rate = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_successes = 0;
};

inline AggregateMetrics aggregate(const std::vector<MetricVector>& per_sample) {
  if (per_sample.empty()) throw EmptyEvaluation("no samples to aggregate");
  AggregateMetrics a;
  a.n_samples = per_sample.size();
  for (const auto& m : per_sample) {
    if (!m.success) continue;
    ++a.n_successes;
    a.l0 += m.l0;
    a.l1 += m.l1;
    a.l2 += m.l2;
    a.linf += m.linf;
    a.constraint_violation += m.constraint_violation;
    a.redundancy += m.redundancy;
    a.ynn += m.ynn;
  }
  a.success_rate = static_cast<double>(a.n_successes) / static_cast<double>(a.n_samples);
  if (a.n_successes == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    a.l0 = a.l1 = a.l2 = a.linf = a.constraint_violation = a.redundancy = a.ynn = nan;
  } else {
    const double inv = 1.0 / static_cast<double>(a.n_successes);
    a.l0 *= inv;
    a.l1 *= inv;
    a.l2 *= inv;
    a.linf *= inv;
    a.constraint_violation *= inv;
    a.redundancy *= inv;
    a.ynn *= inv;
  }
  return a;
}

inline constexpr std::array<const char*, 8> kMetricNames = {
    "l0", "l1", "l2", "linf", "constraint_violation", "redundancy", "ynn", "success_rate"};

enum class Orientation { loss, gain };

inline constexpr std::array<Orientation, 8> kMetricOrientations = {
    Orientation::loss, Orientation::loss, Orientation::loss, Orientation::loss,
    Orientation::loss, Orientation::loss, Orientation::gain, Orientation::gain};

inline std::array<double, 8> metric_row(const AggregateMetrics& a) {
  return {a.l0,  a.l1,         a.l2,  a.linf,
          a.constraint_violation, a.redundancy, a.ynn, a.success_rate};
}

// Min-max rescaling per column across methods, oriented so that 1 is best.
// NaN cells are ignored for the extrema and stay NaN. Constant columns map
// to 1 for every method.
inline std::vector<std::vector<double>> scale_columns(const std::vector<std::vector<double>>& rows,
                                                      const std::vector<Orientation>& orient) {
  std::vector<std::vector<double>> out(rows.size());
  if (rows.empty()) return out;
  const std::size_t w = orient.size();
  for (auto& row : out) row.assign(w, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < w; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& row : rows) {
      if (std::isnan(row[c])) continue;
      lo = std::min(lo, row[c]);
      hi = std::max(hi, row[c]);
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double v = rows[r][c];
      if (std::isnan(v)) continue;
      if (hi == lo) {
        out[r][c] = 1.0;
      } else if (orient[c] == Orientation::loss) {
        out[r][c] = (hi - v) / (hi - lo);
      } else {
        out[r][c] = (v - lo) / (hi - lo);
      }
    }
  }
  return out;
}

inline std::vector<std::vector<double>> scale_report(const std::vector<AggregateMetrics>& methods) {
  std::vector<std::vector<double>> rows;
  rows.reserve(methods.size());
  for (const auto& a : methods) {
    auto r = metric_row(a);
    rows.emplace_back(r.begin(), r.end());
  }
  return scale_columns(rows,
                       {kMetricOrientations.begin(), kMetricOrientations.end()});
}

// Row mean over the finite entries; the method's overall score.
inline double overall_mean(const std::vector<double>& scaled_row) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : scaled_row)
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

struct FeatureChangeTable {
  std::vector<std::string> feature_names;
  std::vector<std::size_t> change_counts;          // per feature
  std::vector<std::vector<std::size_t>> pair_counts;  // co-changed features
  double mean_changes = 0.0;                       // mean l0 over counterfactuals
  std::size_t n_counterfactuals = 0;
};

inline FeatureChangeTable feature_change_table(const std::vector<ExplanationResult>& results,
                                               const FeatureSchema& schema) {
  FeatureChangeTable t;
  const std::size_t nf = schema.feature_count();
  for (std::size_t fi = 0; fi < nf; ++fi) t.feature_names.push_back(schema.feature(fi).name);
  t.change_counts.assign(nf, 0);
  t.pair_counts.assign(nf, std::vector<std::size_t>(nf, 0));
  double total_changes = 0.0;
  for (const auto& res : results) {
    for (const auto& cf : res.counterfactuals) {
      ++t.n_counterfactuals;
      total_changes += static_cast<double>(cf.changed_features.size());
      std::vector<std::size_t> fis;
      for (const auto& name : cf.changed_features) {
        auto fi = schema.find(name);
        if (fi) fis.push_back(*fi);
      }
      for (std::size_t a : fis) {
        ++t.change_counts[a];
        for (std::size_t b : fis)
          if (b > a) ++t.pair_counts[a][b];
      }
    }
  }
  if (t.n_counterfactuals > 0)
    t.mean_changes = total_changes / static_cast<double>(t.n_counterfactuals);
  return t;
}

} // namespace morphocf
