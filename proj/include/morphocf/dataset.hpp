#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "morphocf/errors.hpp"
#include "morphocf/schema.hpp"

namespace morphocf {

using RawValue = std::variant<double, std::string>;
using RawRecord = std::vector<RawValue>;

// Fixed-length vector in encoded (scaled, one-hot-expanded) space.
struct EncodedInstance {
  std::vector<double> values;
  std::optional<std::size_t> raw_id;

  EncodedInstance() = default;
  explicit EncodedInstance(std::vector<double> v, std::optional<std::size_t> id = std::nullopt)
      : values(std::move(v)), raw_id(id) {}

  std::size_t width() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// Per-encoded-column min-max scaler, fitted on the training data. One-hot
// columns keep the identity range (0,1). Constant columns scale to 0, which
// makes the map non-injective outside the training values.
class Scaler {
public:
  Scaler() = default;
  Scaler(std::vector<double> mins, std::vector<double> maxs)
      : mins_(std::move(mins)), maxs_(std::move(maxs)) {}

  static Scaler identity(std::size_t width) {
    return Scaler(std::vector<double>(width, 0.0), std::vector<double>(width, 1.0));
  }

  static Scaler fit(const std::vector<std::vector<double>>& raw_columns_by_row,
                    const FeatureSchema& schema) {
    const std::size_t w = schema.encoded_width();
    std::vector<double> mins(w, 0.0), maxs(w, 1.0);
    if (raw_columns_by_row.empty()) return Scaler(std::move(mins), std::move(maxs));
    for (std::size_t c = 0; c < w; ++c) {
      const auto& f = schema.feature(schema.column_feature(c));
      if (f.is_categorical()) continue; // identity range
      double lo = raw_columns_by_row[0][c], hi = lo;
      for (const auto& row : raw_columns_by_row) {
        lo = std::min(lo, row[c]);
        hi = std::max(hi, row[c]);
      }
      mins[c] = lo;
      maxs[c] = hi;
    }
    return Scaler(std::move(mins), std::move(maxs));
  }

  std::size_t width() const { return mins_.size(); }
  double col_min(std::size_t c) const { return mins_[c]; }
  double col_max(std::size_t c) const { return maxs_[c]; }
  const std::vector<double>& mins() const { return mins_; }
  const std::vector<double>& maxs() const { return maxs_; }

  double transform(std::size_t c, double v) const {
    const double span = maxs_[c] - mins_[c];
    if (span == 0.0) return 0.0;
    return (v - mins_[c]) / span;
  }

  double inverse(std::size_t c, double v) const {
    const double span = maxs_[c] - mins_[c];
    if (span == 0.0) return mins_[c];
    return mins_[c] + v * span;
  }

  bool operator==(const Scaler& o) const { return mins_ == o.mins_ && maxs_ == o.maxs_; }

private:
  std::vector<double> mins_;
  std::vector<double> maxs_;
};

inline EncodedInstance encode(const RawRecord& record, const FeatureSchema& schema,
                              const Scaler& scaler) {
  if (record.size() != schema.feature_count())
    throw WidthMismatch("record has " + std::to_string(record.size()) + " fields, schema expects " +
                        std::to_string(schema.feature_count()));
  EncodedInstance out;
  out.values.assign(schema.encoded_width(), 0.0);
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    if (f.is_categorical()) {
      const auto* s = std::get_if<std::string>(&record[fi]);
      if (!s) throw UnknownCategory("feature '" + f.name + "': expected a category string");
      auto it = std::find(f.categories.begin(), f.categories.end(), *s);
      if (it == f.categories.end())
        throw UnknownCategory("feature '" + f.name + "': unknown category '" + *s + "'");
      out.values[off + static_cast<std::size_t>(it - f.categories.begin())] = 1.0;
    } else {
      const auto* v = std::get_if<double>(&record[fi]);
      if (!v) throw NonNumericCell("feature '" + f.name + "': expected a number");
      if (f.lower && *v < *f.lower)
        throw OutOfBounds("feature '" + f.name + "': value below lower bound");
      if (f.upper && *v > *f.upper)
        throw OutOfBounds("feature '" + f.name + "': value above upper bound");
      if (f.is_integral() && std::abs(*v - std::round(*v)) > 1e-9)
        throw NonIntegralDiscrete("feature '" + f.name + "': non-integral value");
      out.values[off] = scaler.transform(off, *v);
    }
  }
  return out;
}

// Inverse of encode. Preconditions: one-hot groups hold exactly one 1,
// discrete columns are integral after inverse scaling (tolerance 1e-9).
inline RawRecord decode(const EncodedInstance& x, const FeatureSchema& schema,
                        const Scaler& scaler) {
  if (x.width() != schema.encoded_width())
    throw WidthMismatch("encoded width " + std::to_string(x.width()) + ", schema expects " +
                        std::to_string(schema.encoded_width()));
  RawRecord out;
  out.reserve(schema.feature_count());
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    if (f.is_categorical()) {
      std::size_t ones = 0, hot = 0;
      for (std::size_t c = 0; c < f.categories.size(); ++c) {
        const double v = x.values[off + c];
        if (std::abs(v - 1.0) <= 1e-9) {
          ++ones;
          hot = c;
        } else if (std::abs(v) > 1e-9) {
          throw InvalidOneHot("feature '" + f.name + "': fractional one-hot entry");
        }
      }
      if (ones != 1) throw InvalidOneHot("feature '" + f.name + "': group does not sum to one");
      out.emplace_back(f.categories[hot]);
    } else {
      double raw = scaler.inverse(off, x.values[off]);
      if (f.is_integral()) {
        if (std::abs(raw - std::round(raw)) > 1e-9)
          throw NonIntegralDiscrete("feature '" + f.name + "': decodes to non-integral value");
        raw = std::round(raw);
      }
      out.emplace_back(raw);
    }
  }
  return out;
}

// Restore schema validity on a generated point: discrete columns rounded to
// the nearest integer in raw units, one-hot groups collapsed to their argmax.
// Argmax ties prefer tie_ref's category when given (fewer changes), else the
// lowest category index.
inline EncodedInstance snap_to_schema(const EncodedInstance& x, const FeatureSchema& schema,
                                      const Scaler& scaler,
                                      const EncodedInstance* tie_ref = nullptr) {
  EncodedInstance out = x;
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
    const auto& f = schema.feature(fi);
    const std::size_t off = schema.offset(fi);
    if (f.is_categorical()) {
      const std::size_t k = f.categories.size();
      double best = out.values[off];
      for (std::size_t c = 1; c < k; ++c) best = std::max(best, out.values[off + c]);
      std::size_t hot = k;
      if (tie_ref) {
        for (std::size_t c = 0; c < k; ++c) {
          if (out.values[off + c] == best && tie_ref->values[off + c] == 1.0) {
            hot = c;
            break;
          }
        }
      }
      if (hot == k) {
        for (std::size_t c = 0; c < k; ++c)
          if (out.values[off + c] == best) {
            hot = c;
            break;
          }
      }
      for (std::size_t c = 0; c < k; ++c) out.values[off + c] = (c == hot) ? 1.0 : 0.0;
    } else if (f.is_integral()) {
      const double raw = std::round(scaler.inverse(off, out.values[off]));
      out.values[off] = scaler.transform(off, raw);
    }
  }
  return out;
}

struct Dataset {
  FeatureSchema schema;
  Scaler scaler;
  std::vector<RawRecord> raw;       // row order defines instance ids 0..n-1
  std::vector<std::string> labels;  // stored, never consumed by the engine
  std::vector<EncodedInstance> encoded;

  std::size_t size() const { return encoded.size(); }
  std::size_t width() const { return schema.encoded_width(); }
};

namespace detail {

// RFC-4180: quoted fields, "" escapes, embedded separators and newlines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_open = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        field_open = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_open = true;
        break;
      case '\r':
        break;
      case '\n':
        if (!row.empty() || !field.empty() || field_open) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
        }
        field_open = false;
        break;
      default:
        field += ch;
        break;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double parse_number(const std::string& cell, const std::string& feature) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double v = 0.0;
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw NonNumericCell("feature '" + feature + "': cell '" + cell + "' is not numeric");
  return v;
}

} // namespace detail

// Loads a CSV against an already-parsed schema. The header must contain every
// schema feature plus the label column (any order); unexpected columns are
// rejected.
inline Dataset load_dataset(const std::string& csv_path, const FeatureSchema& schema) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file '" + csv_path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  auto rows = detail::parse_csv(buf.str());
  if (rows.empty()) throw EmptyDataset("dataset '" + csv_path + "' has no header");

  const auto& header = rows.front();
  std::vector<std::size_t> feature_col(schema.feature_count(), header.size());
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.label() && label_col == header.size()) {
      label_col = c;
      continue;
    }
    auto fi = schema.find(header[c]);
    if (!fi) throw Error("unexpected column '" + header[c] + "' in '" + csv_path + "'");
    feature_col[*fi] = c;
  }
  for (std::size_t fi = 0; fi < schema.feature_count(); ++fi)
    if (feature_col[fi] == header.size())
      throw MissingColumn("dataset is missing column '" + schema.feature(fi).name + "'");
  if (label_col == header.size())
    throw MissingColumn("dataset is missing label column '" + schema.label() + "'");

  Dataset ds;
  ds.schema = schema;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != header.size())
      throw Error("row " + std::to_string(r) + " has " + std::to_string(cells.size()) +
                  " cells, header has " + std::to_string(header.size()));
    RawRecord rec;
    rec.reserve(schema.feature_count());
    for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
      const auto& cell = cells[feature_col[fi]];
      if (schema.feature(fi).is_categorical())
        rec.emplace_back(cell);
      else
        rec.emplace_back(detail::parse_number(cell, schema.feature(fi).name));
    }
    ds.raw.push_back(std::move(rec));
    ds.labels.push_back(cells[label_col]);
  }
  if (ds.raw.empty()) throw EmptyDataset("dataset '" + csv_path + "' has no data rows");

  // Fit the scaler on unscaled columns, then encode every row.
  std::vector<std::vector<double>> unscaled;
  unscaled.reserve(ds.raw.size());
  const Scaler ident = Scaler::identity(schema.encoded_width());
  for (const auto& rec : ds.raw) unscaled.push_back(encode(rec, schema, ident).values);
  ds.scaler = Scaler::fit(unscaled, schema);
  ds.encoded.reserve(ds.raw.size());
  for (std::size_t i = 0; i < ds.raw.size(); ++i) {
    auto enc = encode(ds.raw[i], schema, ds.scaler);
    enc.raw_id = i;
    ds.encoded.push_back(std::move(enc));
  }
  return ds;
}

inline std::pair<Dataset, FeatureSchema> load_dataset(const std::string& csv_path,
                                                      const std::string& schema_path) {
  FeatureSchema schema = load_schema(schema_path);
  Dataset ds = load_dataset(csv_path, schema);
  return {std::move(ds), std::move(schema)};
}

// FNV-1a over the encoded matrix; identifies the dataset for cache checks.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string dataset_fingerprint(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ull;
  const std::uint64_t n = ds.size(), w = ds.width();
  h = fnv1a(&n, sizeof n, h);
  h = fnv1a(&w, sizeof w, h);
  for (const auto& e : ds.encoded)
    h = fnv1a(e.values.data(), e.values.size() * sizeof(double), h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace morphocf
