// Command-line driver: builds and caches ball coverages, explains instances,
// and runs the benchmark and qualitative reports.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <morphocf/morphocf.hpp>

namespace fs = std::filesystem;
using namespace morphocf;

namespace {

struct Options {
  std::string data;
  std::string schema;
  std::string predictor = "knn:k=5";
  std::string metric = "manhattan";
  std::string cache_dir;
  std::string out = ".";
  std::string methods = "onb-macf,growing-spheres,nice";
  std::string rows;
  std::string targets;
  std::size_t sample = 200;
  std::uint64_t seed = 0;
  std::size_t n = 1;
  double step_ratio = 0.5;
  std::size_t max_steps = 10;
  bool no_rebuild = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Loaded {
  Dataset ds;
  FeatureSchema schema;
  std::unique_ptr<Predictor> predictor;
  std::vector<ClassId> predicted;  // predictor's view of the training rows
  DistanceSpec spec;
};

std::vector<ClassId> label_ids(const std::vector<std::string>& labels,
                               std::vector<std::string>& names) {
  std::map<std::string, ClassId> index;
  for (const auto& l : labels) index.emplace(l, 0);
  names.clear();
  ClassId next = 0;
  for (auto& [name, id] : index) {
    id = next++;
    names.push_back(name);
  }
  std::vector<ClassId> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(index[l]);
  return out;
}

Loaded load_all(const Options& opt) {
  Loaded l;
  l.schema = load_schema(opt.schema);
  l.ds = load_dataset(opt.data, l.schema);
  l.spec.metric = metric_from_string(opt.metric);

  if (opt.predictor.rfind("knn:", 0) == 0 || opt.predictor == "knn") {
    std::size_t k = 5;
    if (opt.predictor.rfind("knn:k=", 0) == 0)
      k = static_cast<std::size_t>(std::stoul(opt.predictor.substr(6)));
    else if (opt.predictor != "knn")
      throw Error("bad predictor spec '" + opt.predictor + "' (expected knn:k=N)");
    std::vector<std::string> names;
    std::vector<ClassId> truth = label_ids(l.ds.labels, names);
    l.predictor = knn_predictor(l.ds, truth, k, l.spec, names);
  } else if (opt.predictor.rfind("mlp:", 0) == 0) {
    l.predictor = mlp_predictor(opt.predictor.substr(4));
  } else if (opt.predictor.rfind("cmd:", 0) == 0) {
    std::vector<std::string> argvec = split(opt.predictor.substr(4), ' ');
    l.predictor = subprocess_predictor(std::move(argvec));
  } else {
    throw Error("unknown predictor spec '" + opt.predictor + "'");
  }
  l.predicted = predict_labels(l.ds, *l.predictor);
  return l;
}

fs::path cache_root(const Options& opt) {
  if (const char* env = std::getenv("MORPHOCF_CACHE"); env != nullptr && *env != '\0')
    return fs::path(env);
  if (!opt.cache_dir.empty()) return fs::path(opt.cache_dir);
  return fs::path(".morphocf-cache");
}

// Builds the coverage or reclaims it from the cache directory. The distance
// matrix is cached alongside under the dataset fingerprint.
Coverage obtain_coverage(const Loaded& l, const Options& opt, bool announce) {
  const std::string ds_fp = dataset_fingerprint(l.ds);
  const std::string pred_fp = l.predictor->fingerprint();
  char pred_tag[17];
  std::snprintf(pred_tag, sizeof pred_tag, "%016llx",
                static_cast<unsigned long long>(fnv1a(pred_fp.data(), pred_fp.size())));

  const fs::path root = cache_root(opt);
  fs::create_directories(root);
  const fs::path cov_path =
      root / ("cov-" + ds_fp + "-" + pred_tag + "-" + to_string(l.spec.metric) + ".json");
  const fs::path dm_path = root / ("dm-" + ds_fp + "-" + to_string(l.spec.metric) + ".bin");

  if (fs::exists(cov_path)) {
    try {
      Coverage cov = load_coverage(cov_path.string(), ds_fp, pred_fp);
      check_coverage(cov, l.ds);
      if (announce) std::cout << "cache hit\n";
      return cov;
    } catch (const FingerprintMismatch&) {
      if (opt.no_rebuild) throw;
      std::cerr << "warning: stale coverage cache, rebuilding\n";
    } catch (const CorruptFile& e) {
      std::cerr << "warning: unreadable coverage cache (" << e.what() << "), rebuilding\n";
    } catch (const CoverageMismatch&) {
      if (opt.no_rebuild) throw FingerprintMismatch("cached coverage does not fit the dataset");
      std::cerr << "warning: cached coverage does not fit the dataset, rebuilding\n";
    }
  }

  DistanceMatrix dm;
  bool have_dm = false;
  if (fs::exists(dm_path)) {
    try {
      dm = load_distance_matrix(dm_path.string());
      have_dm = dm.size() == l.ds.size();
    } catch (const CorruptFile&) {
      std::cerr << "warning: unreadable distance cache, recomputing\n";
    }
  }
  if (!have_dm) {
    dm = pairwise_distances(l.ds, l.spec);
    save_distance_matrix(dm, dm_path.string());
  }
  Coverage cov = build_coverage(l.ds, l.predicted, l.spec, pred_fp, &dm);
  save_coverage(cov, cov_path.string());
  return cov;
}

void print_ball_summary(const Coverage& cov, const Predictor& p) {
  std::map<ClassId, std::size_t> per_class;
  for (const Ball& b : cov.balls) ++per_class[b.cls];
  std::cout << cov.balls.size() << " balls (";
  bool first = true;
  for (const auto& [cls, count] : per_class) {
    if (!first) std::cout << ", ";
    first = false;
    const auto& names = p.class_names();
    std::cout << (cls < names.size() ? names[cls] : std::to_string(cls)) << ":" << count;
  }
  std::cout << ")\n";
}

std::vector<std::size_t> parse_rows(const std::string& rows, std::size_t n) {
  std::vector<std::size_t> out;
  for (const auto& tok : split(rows, ',')) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos) {
      out.push_back(std::stoul(tok));
    } else {
      const std::size_t lo = std::stoul(tok.substr(0, dash));
      const std::size_t hi = std::stoul(tok.substr(dash + 1));
      for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    }
  }
  for (std::size_t i : out)
    if (i >= n) throw Error("row " + std::to_string(i) + " out of range");
  return out;
}

// Seeded sampling without replacement, stable across platforms.
std::vector<std::size_t> sample_rows(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) throw Error("sample size exceeds dataset size");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(gen() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<std::size_t> select_rows(const Options& opt, std::size_t n) {
  if (!opt.rows.empty()) return parse_rows(opt.rows, n);
  return sample_rows(n, std::min(opt.sample, n), opt.seed);
}

std::set<ClassId> parse_targets(const std::string& targets, const Predictor& p) {
  std::set<ClassId> out;
  for (const auto& tok : split(targets, ',')) {
    const auto& names = p.class_names();
    auto it = std::find(names.begin(), names.end(), tok);
    if (it != names.end()) {
      out.insert(static_cast<ClassId>(it - names.begin()));
      continue;
    }
    try {
      const unsigned long v = std::stoul(tok);
      if (v >= names.size()) throw Error("target class '" + tok + "' out of range");
      out.insert(static_cast<ClassId>(v));
    } catch (const std::invalid_argument&) {
      throw Error("unknown target class '" + tok + "'");
    }
  }
  return out;
}

int cmd_cover(const Options& opt) {
  Loaded l = load_all(opt);
  Coverage cov = obtain_coverage(l, opt, true);
  print_ball_summary(cov, *l.predictor);
  return 0;
}

int cmd_explain(const Options& opt) {
  Loaded l = load_all(opt);
  Coverage cov = obtain_coverage(l, opt, false);
  const std::vector<std::size_t> rows = select_rows(opt, l.ds.size());
  const std::set<ClassId> requested =
      opt.targets.empty() ? std::set<ClassId>{} : parse_targets(opt.targets, *l.predictor);

  fs::create_directories(opt.out);
  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (std::size_t row : rows) {
    const EncodedInstance& x = l.ds.encoded[row];
    std::set<ClassId> targets = requested;
    targets.erase(l.predicted[row]);
    if (!requested.empty() && targets.empty()) {
      nlohmann::ordered_json j;
      j["instance_id"] = row;
      j["success"] = false;
      j["level"] = nullptr;
      j["counterfactuals"] = nlohmann::ordered_json::array();
      all.push_back(std::move(j));
      std::cout << "instance " << row << ": already in the requested class\n";
      continue;
    }
    ExplanationRequest req;
    req.instance = x;
    req.target_classes = targets;
    req.n_counterfactuals = opt.n;
    req.step_ratio = opt.step_ratio;
    req.max_steps = opt.max_steps;
    ExplanationResult res = explain(req, cov, *l.predictor, l.schema, &l.ds);
    all.push_back(result_to_json(res, x, row));

    const auto& names = l.predictor->class_names();
    std::cout << "instance " << row << " ("
              << (res.original_class < names.size() ? names[res.original_class]
                                                    : std::to_string(res.original_class))
              << "), level " << to_string(res.level) << ":\n";
    const RawRecord orig = decode(x, l.schema, cov.scaler);
    for (const auto& cf : res.counterfactuals) {
      const RawRecord raw = decode(cf.point, l.schema, cov.scaler);
      std::cout << "  -> " << (cf.cls < names.size() ? names[cf.cls] : std::to_string(cf.cls));
      for (const auto& name : cf.changed_features) {
        const std::size_t fi = *l.schema.find(name);
        auto show = [](const RawValue& v) {
          if (const auto* s = std::get_if<std::string>(&v)) return *s;
          char buf[40];
          std::snprintf(buf, sizeof buf, "%.6g", std::get<double>(v));
          return std::string(buf);
        };
        std::cout << "  " << name << ": " << show(orig[fi]) << " -> " << show(raw[fi]);
      }
      std::cout << "\n";
    }
  }
  std::ofstream out(fs::path(opt.out) / "results.json", std::ios::binary);
  out << all.dump(2) << '\n';
  return 0;
}

struct MethodRun {
  std::vector<MetricVector> metrics;
  std::vector<ExplanationResult> results;  // for the qualitative tables
};

MethodRun run_method(const std::string& method, const Loaded& l, const Coverage& cov,
                     const std::vector<std::size_t>& rows, const Options& opt) {
  MethodRun run;
  for (std::size_t row : rows) {
    const EncodedInstance& x = l.ds.encoded[row];
    std::optional<EncodedInstance> cf;
    ExplanationResult res;
    try {
      if (method == "onb-macf") {
        ExplanationRequest req;
        req.instance = x;
        req.n_counterfactuals = opt.n;
        req.step_ratio = opt.step_ratio;
        req.max_steps = opt.max_steps;
        res = explain(req, cov, *l.predictor, l.schema, &l.ds);
        if (!res.counterfactuals.empty()) cf = res.counterfactuals.front().point;
      } else if (method == "growing-spheres") {
        GrowingSpheresConfig cfg;
        cfg.rng_seed = opt.seed + row;
        cf = growing_spheres(x, *l.predictor, l.schema, l.ds.scaler, cfg);
      } else if (method == "nice") {
        cf = nice_counterfactual(x, l.ds.encoded, l.predicted, *l.predictor, l.schema, l.spec);
      } else {
        throw Error("unknown method '" + method + "'");
      }
    } catch (const NoOpposingBalls&) {
      cf.reset();
    }
    if (cf && method != "onb-macf") {
      res.success = true;
      res.original_class = l.predicted[row];
      CounterfactualEntry entry;
      entry.point = *cf;
      entry.cls = l.predictor->predict_one(*cf);
      entry.changed_features = detail::changed_feature_names(*cf, x, l.schema);
      res.counterfactuals.push_back(std::move(entry));
    }
    run.results.push_back(std::move(res));
    run.metrics.push_back(metric_vector(x, cf ? &*cf : nullptr, l.schema, *l.predictor,
                                        l.ds.encoded, l.predicted, l.spec));
  }
  return run;
}

int cmd_bench(const Options& opt) {
  Loaded l = load_all(opt);
  Coverage cov = obtain_coverage(l, opt, false);
  const std::vector<std::size_t> rows = select_rows(opt, l.ds.size());
  const std::vector<std::string> methods = split(opt.methods, ',');
  if (methods.empty()) throw Error("no methods requested");

  std::vector<AggregateMetrics> aggs;
  for (const auto& method : methods) {
    try {
      MethodRun run = run_method(method, l, cov, rows, opt);
      aggs.push_back(aggregate(run.metrics));
    } catch (const std::exception& e) {
      std::cerr << "warning: method " << method << " failed (" << e.what() << ")\n";
      std::vector<MetricVector> failed(rows.size());
      for (auto& m : failed) m = metric_vector({}, nullptr, l.schema, *l.predictor, {}, {}, l.spec);
      aggs.push_back(aggregate(failed));
    }
  }

  fs::create_directories(opt.out);
  const auto scaled = scale_report(aggs);
  write_raw_csv((fs::path(opt.out) / "raw.csv").string(), methods, aggs);
  write_scaled_csv((fs::path(opt.out) / "scaled.csv").string(), methods, scaled);
  write_radial_plot((fs::path(opt.out) / "radial.svg").string(), methods, scaled);
  std::cout << "wrote raw.csv, scaled.csv, radial.svg to " << opt.out << "\n";
  return 0;
}

int cmd_qualitative(const Options& opt) {
  Loaded l = load_all(opt);
  Coverage cov = obtain_coverage(l, opt, false);
  const std::vector<std::size_t> rows = select_rows(opt, l.ds.size());
  const std::vector<std::string> methods = split(opt.methods, ',');

  std::vector<FeatureChangeTable> tables;
  for (const auto& method : methods) {
    MethodRun run = run_method(method, l, cov, rows, opt);
    tables.push_back(feature_change_table(run.results, l.schema));
  }
  fs::create_directories(opt.out);
  write_feature_changes_csv((fs::path(opt.out) / "feature_changes.csv").string(), methods,
                            tables);
  write_pair_counts_csv((fs::path(opt.out) / "pair_counts.csv").string(), methods, tables);
  std::cout << "wrote feature_changes.csv, pair_counts.csv to " << opt.out << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"open-ball coverage counterfactual explanations"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--data", opt.data, "training data CSV")->required();
    sub->add_option("--schema", opt.schema, "feature schema JSON")->required();
    sub->add_option("--predictor", opt.predictor, "knn:k=N | mlp:weights.json | cmd:\"...\"");
    sub->add_option("--metric", opt.metric, "manhattan|euclidean");
    sub->add_option("--cache-dir", opt.cache_dir, "cache directory (MORPHOCF_CACHE overrides)");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--sample", opt.sample, "evaluation sample size");
    sub->add_option("--seed", opt.seed, "sampling / baseline seed");
    sub->add_flag("--no-rebuild", opt.no_rebuild, "fail instead of rebuilding a stale cache");
  };

  CLI::App* cover = app.add_subcommand("cover", "build or reuse the ball coverage");
  add_common(cover);

  CLI::App* explain_cmd = app.add_subcommand("explain", "explain selected instances");
  add_common(explain_cmd);
  explain_cmd->add_option("--rows", opt.rows, "row ids / ranges, e.g. 0,5,7-9");
  explain_cmd->add_option("--targets", opt.targets, "target class names or ids");
  explain_cmd->add_option("--n", opt.n, "counterfactuals per instance");
  explain_cmd->add_option("--step-ratio", opt.step_ratio, "line search step ratio in (0,1)");
  explain_cmd->add_option("--max-steps", opt.max_steps, "line search step budget");

  CLI::App* bench = app.add_subcommand("bench", "run the metric benchmark");
  add_common(bench);
  bench->add_option("--methods", opt.methods, "comma-separated method list");
  bench->add_option("--n", opt.n, "counterfactuals per instance");
  bench->add_option("--step-ratio", opt.step_ratio, "line search step ratio in (0,1)");
  bench->add_option("--max-steps", opt.max_steps, "line search step budget");

  CLI::App* qual = app.add_subcommand("qualitative", "feature-change tables");
  add_common(qual);
  qual->add_option("--methods", opt.methods, "comma-separated method list");
  qual->add_option("--rows", opt.rows, "row ids / ranges");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cover->parsed()) return cmd_cover(opt);
    if (explain_cmd->parsed()) return cmd_explain(opt);
    if (bench->parsed()) return cmd_bench(opt);
    if (qual->parsed()) return cmd_qualitative(opt);
  } catch (const FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NoOpposingBalls& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
