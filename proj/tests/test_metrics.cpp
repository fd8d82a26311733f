#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace morphocf;

namespace {

bool same_matrix(const std::vector<std::vector<double>>& a,
                 const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].size() != b[r].size()) return false;
    for (std::size_t c = 0; c < a[r].size(); ++c) {
      const bool na = std::isnan(a[r][c]);
      const bool nb = std::isnan(b[r][c]);
      if (na != nb) return false;
      if (!na && a[r][c] != b[r][c]) return false;
    }
  }
  return true;
}

} // namespace

TEST_CASE("the toy counterfactual scores the expected metric vector") {
  testutil::Toy t = testutil::make_toy();
  EncodedInstance cf({6.0});
  MetricVector m = metric_vector(t.ds.encoded[1], &cf, t.schema, *t.predictor, t.ds.encoded,
                                 t.predicted, t.spec);
  CHECK(m.l0 == 1.0);
  CHECK(m.l1 == 5.0);
  CHECK(m.l2 == 25.0);
  CHECK(m.linf == 5.0);
  CHECK(m.constraint_violation == 0.0);
  CHECK(m.redundancy == 0.0);
  CHECK(m.ynn == 0.4);  // two of the five training points share class B
  CHECK(m.success);
}

TEST_CASE("a missing counterfactual yields a failed all-NaN vector") {
  testutil::Toy t = testutil::make_toy();
  MetricVector m = metric_vector(t.ds.encoded[1], nullptr, t.schema, *t.predictor,
                                 t.ds.encoded, t.predicted, t.spec);
  CHECK_FALSE(m.success);
  for (double v : {m.l0, m.l1, m.l2, m.linf, m.constraint_violation, m.redundancy, m.ynn})
    CHECK(std::isnan(v));
}

TEST_CASE("metric vector rejects mismatched widths") {
  testutil::Toy t = testutil::make_toy();
  EncodedInstance wide({1.0, 2.0});
  CHECK_THROWS_AS(metric_vector(t.ds.encoded[0], &wide, t.schema, *t.predictor, {}, {},
                                t.spec),
                  WidthMismatch);
}

TEST_CASE("single-feature norms collapse onto each other") {
  FeatureSchema schema({FeatureSpec{"x"}}, "y");
  FunctionPredictor pred([](const EncodedInstance&) { return ClassId{0}; }, 2);
  std::mt19937_64 gen(42);
  for (int i = 0; i < 50; ++i) {
    const double a = static_cast<double>(gen() % 1000) / 100.0;
    const double b = static_cast<double>(gen() % 1000) / 100.0;
    EncodedInstance x({a});
    EncodedInstance cf({b});
    MetricVector m = metric_vector(x, &cf, schema, pred, {}, {}, DistanceSpec{});
    CHECK(m.l2 == m.l1 * m.l1);
    CHECK(m.linf == m.l1);
  }
}

TEST_CASE("violation and redundancy are bounded by sparsity") {
  for (std::uint64_t seed = 600; seed < 615; ++seed) {
    FeatureSchema schema = testutil::random_schema(seed, 3 + seed % 3, true);
    std::vector<ClassId> labels;
    Dataset ds = testutil::random_dataset(schema, 12, 2, seed, &labels);
    auto pred = knn_predictor(ds, labels, 3, DistanceSpec{});
    const EncodedInstance& x = ds.encoded[0];
    for (std::size_t j = 1; j < ds.size(); ++j) {
      MetricVector m = metric_vector(x, &ds.encoded[j], schema, *pred, ds.encoded, labels,
                                     DistanceSpec{});
      CHECK(m.constraint_violation <= m.l0);
      CHECK(m.redundancy <= m.l0);
      CHECK(m.ynn >= 0.0);
      CHECK(m.ynn <= 1.0);
    }
  }
}

TEST_CASE("neighbourhood agreement matches a full-sort oracle") {
  for (std::uint64_t seed = 700; seed < 712; ++seed) {
    FeatureSchema schema = testutil::random_schema(seed, 2 + seed % 3);
    std::vector<ClassId> labels;
    Dataset ds = testutil::random_dataset(schema, 9 + seed % 9, 2, seed, &labels);
    auto pred = knn_predictor(ds, labels, 3, DistanceSpec{});
    const EncodedInstance& cf = ds.encoded[ds.size() - 1];
    MetricVector m = metric_vector(ds.encoded[0], &cf, schema, *pred, ds.encoded, labels,
                                   DistanceSpec{});
    const double want = testutil::oracle_ynn(cf, ds.encoded, labels,
                                             pred->predict_one(cf), DistanceSpec{});
    CHECK(m.ynn == want);
  }
}

TEST_CASE("an individually revertible change counts as redundant") {
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}}, "y");
  FunctionPredictor pred(
      [](const EncodedInstance& x) { return x.values[1] > 0.5 ? ClassId{1} : ClassId{0}; }, 2);
  EncodedInstance x({0.0, 0.0});
  EncodedInstance cf({1.0, 1.0});
  MetricVector m = metric_vector(x, &cf, schema, pred, {}, {}, DistanceSpec{});
  CHECK(m.l0 == 2.0);
  CHECK(m.redundancy == 1.0);  // only the change to a undoes cleanly
}

TEST_CASE("immutable features changed are counted as violations") {
  FeatureSpec locked{"a"};
  locked.immutable = true;
  FeatureSchema schema({locked, FeatureSpec{"b"}}, "y");
  FunctionPredictor pred([](const EncodedInstance&) { return ClassId{0}; }, 2);
  EncodedInstance x({0.0, 0.0});
  EncodedInstance cf({2.0, 3.0});
  MetricVector m = metric_vector(x, &cf, schema, pred, {}, {}, DistanceSpec{});
  CHECK(m.constraint_violation == 1.0);
  CHECK(m.l0 == 2.0);
}

TEST_CASE("sparsity can count encoded columns instead of features") {
  FeatureSpec city{"city", FeatureKind::categorical, {"red", "green", "blue"}};
  FeatureSchema schema({city, FeatureSpec{"age"}}, "y");
  FunctionPredictor pred([](const EncodedInstance&) { return ClassId{0}; }, 2);
  EncodedInstance x({1.0, 0.0, 0.0, 0.3});
  EncodedInstance cf({0.0, 1.0, 0.0, 0.3});
  MetricVector sem = metric_vector(x, &cf, schema, pred, {}, {}, DistanceSpec{});
  CHECK(sem.l0 == 1.0);
  MetricOptions opts;
  opts.l0_encoded = true;
  MetricVector enc = metric_vector(x, &cf, schema, pred, {}, {}, DistanceSpec{}, opts);
  CHECK(enc.l0 == 2.0);
  CHECK(enc.l1 == 2.0);
}

TEST_CASE("aggregation averages successes and flags total failure") {
  CHECK_THROWS_AS(aggregate({}), EmptyEvaluation);

  std::vector<MetricVector> all_failed(3);
  AggregateMetrics dead = aggregate(all_failed);
  CHECK(dead.success_rate == 0.0);
  CHECK(dead.n_successes == 0);
  CHECK(std::isnan(dead.l1));
  CHECK(std::isnan(dead.ynn));

  MetricVector a;
  a.l0 = 1.0;
  a.l1 = 5.0;
  a.success = true;
  MetricVector b;  // failed, must not pollute the means
  MetricVector c;
  c.l0 = 3.0;
  c.l1 = 1.0;
  c.success = true;
  AggregateMetrics agg = aggregate({a, b, c});
  CHECK(agg.l0 == 2.0);
  CHECK(agg.l1 == 3.0);
  CHECK(agg.n_samples == 3);
  CHECK(agg.n_successes == 2);
  CHECK(agg.success_rate == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("metric row follows the published column order") {
  AggregateMetrics a;
  a.l0 = 1;
  a.l1 = 2;
  a.l2 = 3;
  a.linf = 4;
  a.constraint_violation = 5;
  a.redundancy = 6;
  a.ynn = 7;
  a.success_rate = 8;
  CHECK(metric_row(a) == std::array<double, 8>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(std::string(kMetricNames[0]) == "l0");
  CHECK(std::string(kMetricNames[7]) == "success_rate");
}

TEST_CASE("column scaling maps best to one and worst to zero") {
  const std::vector<Orientation> loss = {Orientation::loss};
  const std::vector<Orientation> gain = {Orientation::gain};

  auto scaled = scale_columns({{0.2}, {0.8}}, loss);
  CHECK(scaled[0][0] == 1.0);
  CHECK(scaled[1][0] == 0.0);

  scaled = scale_columns({{0.2}, {0.8}}, gain);
  CHECK(scaled[0][0] == 0.0);
  CHECK(scaled[1][0] == 1.0);

  scaled = scale_columns({{0.5}, {0.5}}, loss);
  CHECK(scaled[0][0] == 1.0);
  CHECK(scaled[1][0] == 1.0);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  scaled = scale_columns({{0.2}, {nan}, {0.8}}, loss);
  CHECK(scaled[0][0] == 1.0);
  CHECK(std::isnan(scaled[1][0]));
  CHECK(scaled[2][0] == 0.0);
}

TEST_CASE("scaling is idempotent under an all-gain rescale") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<std::vector<double>> m = {
      {1.0, 9.0, 0.5}, {4.0, nan, 0.25}, {2.5, 3.0, 1.0}};
  const std::vector<Orientation> orient = {Orientation::loss, Orientation::gain,
                                           Orientation::loss};
  const auto once = scale_columns(m, orient);
  const std::vector<Orientation> all_gain(orient.size(), Orientation::gain);
  CHECK(same_matrix(scale_columns(once, all_gain), once));
}

TEST_CASE("scaling commutes with row permutation") {
  const std::vector<std::vector<double>> m = {{1.0, 0.3}, {4.0, 0.9}, {2.0, 0.1}};
  const std::vector<Orientation> orient = {Orientation::loss, Orientation::gain};
  auto scaled = scale_columns(m, orient);
  auto permuted = scale_columns({m[2], m[0], m[1]}, orient);
  CHECK(same_matrix({scaled[2], scaled[0], scaled[1]}, permuted));
}

TEST_CASE("report scaling spans all eight metrics") {
  AggregateMetrics a;
  a.l0 = 1.0;
  a.l1 = 2.0;
  a.l2 = 4.0;
  a.linf = 1.0;
  a.constraint_violation = 0.0;
  a.redundancy = 0.5;
  a.ynn = 0.9;
  a.success_rate = 1.0;
  AggregateMetrics b;
  b.l0 = 3.0;
  b.l1 = 1.0;
  b.l2 = 9.0;
  b.linf = 2.0;
  b.constraint_violation = 1.0;
  b.redundancy = 0.0;
  b.ynn = 0.4;
  b.success_rate = 0.5;
  auto scaled = scale_report({a, b});
  REQUIRE(scaled.size() == 2);
  CHECK(scaled[0][0] == 1.0);  // lower l0 wins
  CHECK(scaled[1][0] == 0.0);
  CHECK(scaled[0][1] == 0.0);  // higher l1 loses
  CHECK(scaled[1][1] == 1.0);
  CHECK(scaled[0][6] == 1.0);  // higher ynn wins
  CHECK(scaled[1][6] == 0.0);
  CHECK(scaled[0][7] == 1.0);
  CHECK(scaled[1][7] == 0.0);
}

TEST_CASE("overall mean skips non-finite entries") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(overall_mean({1.0, nan, 0.0}) == 0.5);
  CHECK(std::isnan(overall_mean({nan, nan})));
  CHECK(overall_mean({0.25}) == 0.25);
}

TEST_CASE("feature change tables count single and paired edits") {
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}, FeatureSpec{"c"}}, "y");
  auto entry = [](std::vector<std::string> names) {
    CounterfactualEntry e;
    e.point = EncodedInstance({0.0, 0.0, 0.0});
    e.changed_features = std::move(names);
    return e;
  };
  ExplanationResult r1;
  r1.success = true;
  r1.counterfactuals = {entry({"a", "b"})};
  ExplanationResult r2;
  r2.success = true;
  r2.counterfactuals = {entry({"a", "c"})};

  FeatureChangeTable t = feature_change_table({r1, r2}, schema);
  CHECK(t.n_counterfactuals == 2);
  CHECK(t.change_counts == std::vector<std::size_t>{2, 1, 1});
  CHECK(t.pair_counts[0][1] == 1);
  CHECK(t.pair_counts[0][2] == 1);
  CHECK(t.pair_counts[1][2] == 0);
  CHECK(t.mean_changes == 2.0);
}
