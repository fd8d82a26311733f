#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace morphocf;

namespace {

FunctionPredictor threshold_on(std::size_t col, double cut, bool above_is_one = true) {
  return FunctionPredictor(
      [col, cut, above_is_one](const EncodedInstance& x) {
        const bool above = x.values[col] > cut;
        return above == above_is_one ? ClassId{1} : ClassId{0};
      },
      2);
}

} // namespace

TEST_CASE("growing spheres flips the toy threshold") {
  FeatureSchema schema({FeatureSpec{"x"}}, "y");
  FunctionPredictor pred = threshold_on(0, 5.5);
  EncodedInstance x({5.0});
  auto cf = growing_spheres(x, pred, schema, Scaler::identity(1), GrowingSpheresConfig{});
  REQUIRE(cf.has_value());
  CHECK(cf->values[0] > 5.5);
  CHECK(cf->values[0] < 7.0);  // early layers suffice for a 0.5 gap
}

TEST_CASE("growing spheres is reproducible per seed") {
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}, FeatureSpec{"c"}}, "y");
  FunctionPredictor pred = threshold_on(1, 0.4);
  EncodedInstance x({0.0, 0.0, 0.0});
  GrowingSpheresConfig cfg;
  cfg.rng_seed = 99;
  auto first = growing_spheres(x, pred, schema, Scaler::identity(3), cfg);
  auto second = growing_spheres(x, pred, schema, Scaler::identity(3), cfg);
  REQUIRE(first.has_value());
  REQUIRE(second.has_value());
  CHECK(first->values == second->values);
}

TEST_CASE("growing spheres gives up against a constant predictor") {
  FeatureSchema schema({FeatureSpec{"x"}}, "y");
  FunctionPredictor pred([](const EncodedInstance&) { return ClassId{0}; }, 2);
  GrowingSpheresConfig cfg;
  cfg.max_layers = 4;
  CHECK_FALSE(growing_spheres(EncodedInstance({0.0}), pred, schema, Scaler::identity(1), cfg)
                  .has_value());
}

TEST_CASE("growing spheres never moves immutable or absent degrees of freedom") {
  FeatureSpec locked{"locked"};
  locked.immutable = true;
  FeatureSchema schema({locked, FeatureSpec{"free"}}, "y");
  FunctionPredictor pred = threshold_on(1, 0.3);
  EncodedInstance x({7.0, 0.0});
  auto cf = growing_spheres(x, pred, schema, Scaler::identity(2), GrowingSpheresConfig{});
  REQUIRE(cf.has_value());
  CHECK(cf->values[0] == 7.0);
  CHECK(cf->values[1] > 0.3);

  FeatureSpec only{"only"};
  only.immutable = true;
  FeatureSchema all_locked({only}, "y");
  CHECK_FALSE(growing_spheres(EncodedInstance({0.0}), pred, all_locked, Scaler::identity(1),
                              GrowingSpheresConfig{})
                  .has_value());
}

TEST_CASE("growing spheres respects the schema after snapping") {
  FeatureSpec count{"count", FeatureKind::discrete};
  count.lower = 0.0;
  count.upper = 8.0;
  FeatureSpec city{"city", FeatureKind::categorical, {"p", "q", "r"}};
  FeatureSchema schema({count, city, FeatureSpec{"score"}}, "y");
  FunctionPredictor pred = threshold_on(4, 0.55);
  EncodedInstance x({4.0, 0.0, 1.0, 0.0, 0.2});
  GrowingSpheresConfig cfg;
  cfg.rng_seed = 3;
  auto cf = growing_spheres(x, pred, schema, Scaler::identity(5), cfg);
  REQUIRE(cf.has_value());
  CHECK_NOTHROW(decode(*cf, schema, Scaler::identity(5)));
  CHECK(cf->values[4] > 0.55);
}

TEST_CASE("growing spheres sparsification stops at the first blocked revert") {
  // Only feature a decides the class, so reverting a always breaks and every
  // noise feature cheaper than a is undone while costlier ones survive.
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}, FeatureSpec{"c"}}, "y");
  FunctionPredictor pred = threshold_on(0, 0.005);
  EncodedInstance x({0.0, 0.0, 0.0});
  bool saw_costlier_survivor = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    GrowingSpheresConfig cfg;
    cfg.rng_seed = seed;
    auto cf = growing_spheres(x, pred, schema, Scaler::identity(3), cfg);
    REQUIRE(cf.has_value());
    const double decisive = std::abs(cf->values[0]);
    CHECK(cf->values[0] > 0.005);
    for (std::size_t c = 1; c < 3; ++c) {
      const double noise = std::abs(cf->values[c] - x.values[c]);
      if (noise == 0.0) continue;
      CHECK(noise >= decisive);
      saw_costlier_survivor = true;
    }
  }
  CHECK(saw_costlier_survivor);
}

TEST_CASE("nice walks to the toy prototype") {
  testutil::Toy t = testutil::make_toy();
  auto cf = nice_counterfactual(t.ds.encoded[1], t.ds.encoded, t.predicted, *t.predictor,
                                t.schema, t.spec);
  REQUIRE(cf.has_value());
  CHECK(cf->values[0] == 10.0);

  // the engine's boundary point is closer than the prototype swap
  ExplanationRequest req;
  req.instance = t.ds.encoded[1];
  ExplanationResult res = explain(req, t.cov, *t.predictor, t.schema, &t.ds);
  const double engine_l1 =
      distance(t.ds.encoded[1].values, res.counterfactuals[0].point.values, t.spec);
  const double nice_l1 = distance(t.ds.encoded[1].values, cf->values, t.spec);
  CHECK(engine_l1 <= nice_l1);
}

TEST_CASE("nice prefers a flipping swap over a nearer inert one") {
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}}, "y");
  FunctionPredictor pred = threshold_on(1, 0.5);
  std::vector<EncodedInstance> train = {EncodedInstance({0.0, 0.0}, 0),
                                        EncodedInstance({10.0, 1.0}, 1)};
  std::vector<ClassId> classes = {0, 1};
  auto cf = nice_counterfactual(EncodedInstance({0.0, 0.0}), train, classes, pred, schema,
                                DistanceSpec{});
  REQUIRE(cf.has_value());
  // swapping a moves 10 units without flipping; swapping b flips immediately
  CHECK(cf->values == std::vector<double>{0.0, 1.0});
}

TEST_CASE("nice breaks swap ties in schema order") {
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}}, "y");
  FunctionPredictor pred(
      [](const EncodedInstance& x) {
        return x.values[0] > 0.5 && x.values[1] > 0.5 ? ClassId{1} : ClassId{0};
      },
      2);
  std::vector<EncodedInstance> train = {EncodedInstance({0.0, 0.0}, 0),
                                        EncodedInstance({1.0, 1.0}, 1)};
  std::vector<ClassId> classes = {0, 1};
  auto cf = nice_counterfactual(EncodedInstance({0.0, 0.0}), train, classes, pred, schema,
                                DistanceSpec{});
  REQUIRE(cf.has_value());
  // both single swaps are inert at distance 1; a is tried first, then b flips
  CHECK(cf->values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("nice returns the prototype when one feature separates the classes") {
  FeatureSchema schema({FeatureSpec{"a"}, FeatureSpec{"b"}}, "y");
  FunctionPredictor pred = threshold_on(0, 2.0);
  std::vector<EncodedInstance> train = {EncodedInstance({0.0, 3.0}, 0),
                                        EncodedInstance({5.0, 3.0}, 1)};
  std::vector<ClassId> classes = {0, 1};
  auto cf = nice_counterfactual(EncodedInstance({0.0, 3.0}), train, classes, pred, schema,
                                DistanceSpec{});
  REQUIRE(cf.has_value());
  CHECK(cf->values == train[1].values);
}

TEST_CASE("nice needs an unlike-class instance") {
  FeatureSchema schema({FeatureSpec{"a"}}, "y");
  FunctionPredictor pred([](const EncodedInstance&) { return ClassId{0}; }, 2);
  std::vector<EncodedInstance> train = {EncodedInstance({0.0}, 0), EncodedInstance({1.0}, 1)};
  std::vector<ClassId> classes = {0, 0};
  CHECK_FALSE(nice_counterfactual(EncodedInstance({0.0}), train, classes, pred, schema,
                                  DistanceSpec{})
                  .has_value());
}

TEST_CASE("nice hybrids are hypercube vertices of instance and prototype") {
  for (std::uint64_t seed = 800; seed < 815; ++seed) {
    FeatureSchema schema = testutil::random_schema(seed, 2 + seed % 4);
    std::vector<ClassId> labels;
    Dataset ds = testutil::random_dataset(schema, 12 + seed % 8, 2, seed, &labels);
    auto pred = knn_predictor(ds, labels, 1, DistanceSpec{});
    std::vector<ClassId> predicted = predict_labels(ds, *pred);
    const EncodedInstance& x = ds.encoded[seed % ds.size()];
    auto cf = nice_counterfactual(x, ds.encoded, predicted, *pred, schema, DistanceSpec{});
    if (!cf) continue;

    // recover the prototype exactly as the search defines it
    const ClassId original = pred->predict_one(x);
    std::size_t proto = ds.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (predicted[i] == original) continue;
      const double d = distance(x.values, ds.encoded[i].values, DistanceSpec{});
      if (d < best) {
        best = d;
        proto = i;
      }
    }
    REQUIRE(proto < ds.size());
    for (std::size_t fi = 0; fi < schema.feature_count(); ++fi) {
      const std::size_t off = schema.offset(fi);
      const std::size_t w = schema.feature(fi).width();
      bool from_x = true;
      bool from_proto = true;
      for (std::size_t c = 0; c < w; ++c) {
        if (cf->values[off + c] != x.values[off + c]) from_x = false;
        if (cf->values[off + c] != ds.encoded[proto].values[off + c]) from_proto = false;
      }
      CHECK((from_x || from_proto));
    }
    CHECK(pred->predict_one(*cf) != original);
  }
}
