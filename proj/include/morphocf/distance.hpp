#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "morphocf/dataset.hpp"
#include "morphocf/errors.hpp"

namespace morphocf {

enum class Metric { manhattan, euclidean };

struct DistanceSpec {
  Metric metric = Metric::manhattan;
};

inline const char* to_string(Metric m) {
  return m == Metric::manhattan ? "manhattan" : "euclidean";
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "manhattan") return Metric::manhattan;
  if (s == "euclidean") return Metric::euclidean;
  throw Error("unknown metric '" + s + "'");
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b,
                       DistanceSpec spec = {}) {
  if (a.size() != b.size())
    throw WidthMismatch("distance: widths " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  double acc = 0.0;
  if (spec.metric == Metric::manhattan) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double distance(const EncodedInstance& a, const EncodedInstance& b,
                       DistanceSpec spec = {}) {
  return distance(a.values, b.values, spec);
}

// Symmetric n x n matrix stored as the row-major upper triangle, diagonal
// included. Entry layout matches the on-disk cache format.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * (n + 1) / 2, 0.0) {}

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[index(i, j)];
  }

  void set(std::size_t i, std::size_t j, double v) { data_[index(i, j)] = v; }

  const std::vector<double>& packed() const { return data_; }
  std::vector<double>& packed() { return data_; }

private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }

  std::size_t n_ = 0;
  std::vector<double> data_;
};

inline DistanceMatrix pairwise_distances(const Dataset& ds, DistanceSpec spec = {}) {
  const std::size_t n = ds.size();
  if (n == 0) throw EmptyDataset("pairwise_distances on empty dataset");
  DistanceMatrix dm(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dm.set(i, j, distance(ds.encoded[i], ds.encoded[j], spec));
  return dm;
}

namespace detail {
inline constexpr char kDmMagic[6] = {'O', 'N', 'B', 'D', 'M', '1'};
}

// Cache format: magic "ONBDM1", u64 n (little endian), n*(n+1)/2 f64 values.
inline void save_distance_matrix(const DistanceMatrix& dm, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write distance cache '" + path + "'");
  out.write(detail::kDmMagic, sizeof detail::kDmMagic);
  const std::uint64_t n = dm.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(dm.packed().data()),
            static_cast<std::streamsize>(dm.packed().size() * sizeof(double)));
}

inline DistanceMatrix load_distance_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFile("cannot open distance cache '" + path + "'");
  char magic[sizeof detail::kDmMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kDmMagic, sizeof magic) != 0)
    throw CorruptFile("bad magic in distance cache '" + path + "'");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in) throw CorruptFile("truncated distance cache '" + path + "'");
  const auto payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::uint64_t available = static_cast<std::uint64_t>(in.tellg() - payload_start);
  in.seekg(payload_start);
  if (n > (1ull << 32) || available != n * (n + 1) / 2 * sizeof(double))
    throw CorruptFile("size header does not match distance cache '" + path + "'");
  DistanceMatrix dm(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(dm.packed().data()),
          static_cast<std::streamsize>(dm.packed().size() * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(dm.packed().size() * sizeof(double)))
    throw CorruptFile("truncated distance cache '" + path + "'");
  return dm;
}

} // namespace morphocf
