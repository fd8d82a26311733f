#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace morphocf;

namespace {

std::vector<std::string> stub(const char* mode) { return {STUB_PREDICTOR_PATH, mode}; }

std::vector<EncodedInstance> points(std::initializer_list<double> firsts) {
  std::vector<EncodedInstance> out;
  for (double v : firsts) out.emplace_back(std::vector<double>{v, 0.0});
  return out;
}

} // namespace

TEST_CASE("subprocess predictor completes the handshake and predicts") {
  SubprocessPredictor p(stub("ok"));
  CHECK(p.n_classes() == 2);
  const auto got = p.predict(points({0.1, 0.9, 0.4, 0.6}));
  const std::vector<ClassId> expect = {0, 1, 0, 1};
  CHECK(got == expect);
}

TEST_CASE("subprocess predictor splits large requests into batches") {
  SubprocessPredictor p(stub("ok"), 30000, 2);
  std::vector<EncodedInstance> batch = points({0.9, 0.1, 0.8, 0.2, 0.7});
  const auto got = p.predict(batch);
  const std::vector<ClassId> expect = {1, 0, 1, 0, 1};
  CHECK(got == expect);
}

TEST_CASE("mismatched response ids are a protocol violation") {
  SubprocessPredictor p(stub("wrong-id"));
  CHECK_THROWS_AS(p.predict(points({0.1})), ProtocolViolation);
}

TEST_CASE("a dead child surfaces as ProcessExit") {
  SubprocessPredictor p(stub("die"));
  CHECK_THROWS_AS(p.predict(points({0.1})), ProcessExit);
}

TEST_CASE("slow responses hit the configured timeout") {
  SubprocessPredictor p(stub("slow"), 200);
  CHECK_THROWS_AS(p.predict(points({0.1})), Timeout);
}

TEST_CASE("unlaunchable commands fail the handshake") {
  CHECK_THROWS_AS(SubprocessPredictor({"/nonexistent/morphocf-stub"}), ProcessExit);
}
