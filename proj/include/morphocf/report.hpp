#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "morphocf/errors.hpp"
#include "morphocf/metrics.hpp"

namespace morphocf {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// NaN means "no successful sample to average", printed as Na.
inline std::string format_metric(double v) {
  if (std::isnan(v)) return "Na";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_raw_csv(const std::string& path, const std::vector<std::string>& methods,
                          const std::vector<AggregateMetrics>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "method";
  for (const char* name : kMetricNames) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < methods.size(); ++r) {
    out << csv_field(methods[r]);
    for (double v : metric_row(rows[r])) out << ',' << format_metric(v);
    out << '\n';
  }
}

inline void write_scaled_csv(const std::string& path, const std::vector<std::string>& methods,
                             const std::vector<std::vector<double>>& scaled) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "method";
  for (const char* name : kMetricNames) out << ',' << name;
  out << ",overall_mean\n";
  for (std::size_t r = 0; r < methods.size(); ++r) {
    out << csv_field(methods[r]);
    for (double v : scaled[r]) out << ',' << format_metric(v);
    out << ',' << format_metric(overall_mean(scaled[r]));
    out << '\n';
  }
}

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                           "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace detail

// Radial plot of the scaled metrics: one vertex per metric, clockwise from
// the top in the fixed metric order, one polygon per method. Grid and spokes
// are paths so the polygon count equals the method count. Na plots at the
// center.
inline std::string radial_plot_svg(const std::vector<std::string>& methods,
                                   const std::vector<std::vector<double>>& scaled) {
  const double cx = 320.0, cy = 260.0, radius = 190.0;
  const std::size_t nv = kMetricNames.size();
  auto vertex = [&](std::size_t i, double r) {
    const double phi = static_cast<double>(i) * 2.0 * 3.14159265358979323846 /
                       static_cast<double>(nv);
    return std::pair<double, double>(cx + r * std::sin(phi), cy - r * std::cos(phi));
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 540\" "
         "font-family=\"sans-serif\" font-size=\"13\">\n";
  svg += "<rect width=\"640\" height=\"540\" fill=\"white\"/>\n";

  for (double level : {0.25, 0.5, 0.75, 1.0}) {
    svg += "<path d=\"";
    for (std::size_t i = 0; i < nv; ++i) {
      auto [x, y] = vertex(i, radius * level);
      svg += (i == 0 ? "M" : "L");
      svg += detail::svg_num(x) + " " + detail::svg_num(y);
    }
    svg += "Z\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
  }
  for (std::size_t i = 0; i < nv; ++i) {
    auto [x, y] = vertex(i, radius);
    svg += "<path d=\"M" + detail::svg_num(cx) + " " + detail::svg_num(cy) + "L" +
           detail::svg_num(x) + " " + detail::svg_num(y) +
           "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    auto [lx, ly] = vertex(i, radius * 1.12);
    svg += "<text x=\"" + detail::svg_num(lx) + "\" y=\"" + detail::svg_num(ly) +
           "\" text-anchor=\"middle\">" + kMetricNames[i] + "</text>\n";
  }

  for (std::size_t m = 0; m < methods.size(); ++m) {
    const char* color =
        detail::kPalette[m % (sizeof detail::kPalette / sizeof detail::kPalette[0])];
    svg += "<polygon points=\"";
    for (std::size_t i = 0; i < nv; ++i) {
      const double raw = scaled[m][i];
      const double v = std::isnan(raw) ? 0.0 : raw;
      auto [x, y] = vertex(i, radius * v);
      if (i > 0) svg += " ";
      svg += detail::svg_num(x) + "," + detail::svg_num(y);
    }
    svg += "\" fill=\"";
    svg += color;
    svg += "\" fill-opacity=\"0.12\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"2\"/>\n";
    const double ly = 24.0 + 20.0 * static_cast<double>(m);
    svg += "<rect x=\"16\" y=\"" + detail::svg_num(ly - 11.0) +
           "\" width=\"12\" height=\"12\" fill=\"";
    svg += color;
    svg += "\"/>\n<text x=\"34\" y=\"" + detail::svg_num(ly) + "\">" + methods[m] + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_radial_plot(const std::string& path, const std::vector<std::string>& methods,
                              const std::vector<std::vector<double>>& scaled) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << radial_plot_svg(methods, scaled);
}

// Table layout: one row per feature, one column per method, a final row with
// the mean number of changes.
inline void write_feature_changes_csv(const std::string& path,
                                      const std::vector<std::string>& methods,
                                      const std::vector<FeatureChangeTable>& tables) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "feature";
  for (const auto& m : methods) out << ',' << csv_field(m);
  out << '\n';
  if (tables.empty()) return;
  const auto& names = tables.front().feature_names;
  for (std::size_t fi = 0; fi < names.size(); ++fi) {
    out << csv_field(names[fi]);
    for (const auto& t : tables) out << ',' << t.change_counts[fi];
    out << '\n';
  }
  out << "mean_changes";
  for (const auto& t : tables) out << ',' << format_metric(t.mean_changes);
  out << '\n';
}

inline void write_pair_counts_csv(const std::string& path,
                                  const std::vector<std::string>& methods,
                                  const std::vector<FeatureChangeTable>& tables) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "method,feature_a,feature_b,count\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto& t = tables[m];
    struct Row {
      std::size_t a, b, count;
    };
    std::vector<Row> rows;
    for (std::size_t a = 0; a < t.feature_names.size(); ++a)
      for (std::size_t b = a + 1; b < t.feature_names.size(); ++b)
        if (t.pair_counts[a][b] > 0) rows.push_back({a, b, t.pair_counts[a][b]});
    std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
      if (x.count != y.count) return x.count > y.count;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    for (const Row& r : rows)
      out << csv_field(methods[m]) << ',' << csv_field(t.feature_names[r.a]) << ','
          << csv_field(t.feature_names[r.b]) << ',' << r.count << '\n';
  }
}

} // namespace morphocf
