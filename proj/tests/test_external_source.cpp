#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "selfcons/external_source.hpp"

#ifndef STUB_RESPONDER
#error "STUB_RESPONDER must name the stub executable"
#endif

using namespace selfcons;
using namespace std::chrono_literals;

namespace {

std::vector<std::string> stub(std::vector<std::string> args) {
  args.insert(args.begin(), STUB_RESPONDER);
  return args;
}

ExternalSourceOptions fast(int retries = 1) {
  ExternalSourceOptions o;
  o.timeout = 150ms;
  o.retries = retries;
  return o;
}

}  // namespace

TEST_CASE("split_command") {
  CHECK(split_command("a b  c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_command("run 'x y' \"z w\"") == std::vector<std::string>{"run", "x y", "z w"});
  CHECK(split_command("   ").empty());
}

TEST_CASE("constant stub yields k = 0") {
  ExternalSource src(stub({"--mode", "constant", "--label", "0"}));
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto res = src.collect(ids, 5);
  REQUIRE(res.records.size() == 3);
  CHECK(res.failures.empty());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(res.records[i].prompt_id == ids[i]);
    CHECK(res.records[i].responses == std::vector<int>(5, 0));
  }
}

TEST_CASE("bernoulli stub frequency matches p") {
  const double p = 0.3;
  ExternalSourceOptions opt;
  opt.window = 32;
  ExternalSource src(stub({"--mode", "bernoulli", "--p", "0.3", "--seed", "17"}), opt);
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("q" + std::to_string(i));
  const int draws = 250;
  const auto res = src.collect(ids, draws);
  REQUIRE(res.records.size() == ids.size());
  long ones = 0, total = 0;
  for (const auto& r : res.records) {
    REQUIRE(r.responses.size() == static_cast<std::size_t>(draws));
    for (int l : r.responses) ones += l;
    total += static_cast<long>(r.responses.size());
  }
  const double freq = static_cast<double>(ones) / total;
  CHECK(std::abs(freq - p) <= 4 * std::sqrt(p * (1 - p) / total));
}

TEST_CASE("replies out of order are matched by draw") {
  ExternalSourceOptions opt;
  opt.window = 16;
  ExternalSource plain(stub({"--mode", "bernoulli", "--p", "0.5", "--seed", "3"}), opt);
  ExternalSource reversed(stub({"--mode", "bernoulli", "--p", "0.5", "--seed", "3", "--reverse"}), opt);
  const std::vector<std::string> ids{"x", "y", "z"};
  const auto a = plain.collect(ids, 20);
  const auto b = reversed.collect(ids, 20);
  CHECK(a.records == b.records);
}

TEST_CASE("labels stream through the callback") {
  ExternalSource src(stub({"--mode", "constant", "--label", "1"}));
  const std::vector<std::string> ids{"a", "b"};
  std::map<std::string, int> seen;
  src.collect(ids, 3, [&](const std::string& id, int, int label) { seen[id] += label; });
  CHECK(seen["a"] == 3);
  CHECK(seen["b"] == 3);
}

TEST_CASE("retries recover dropped requests") {
  ExternalSource src(stub({"--mode", "flaky", "--label", "1"}), fast(2));
  const std::vector<std::string> ids{"a", "b"};
  const auto res = src.collect(ids, 3);
  CHECK(res.failures.empty());
  REQUIRE(res.records.size() == 2);
  CHECK(res.records[0].responses == std::vector<int>{1, 1, 1});
}

TEST_CASE("flaky stub without retries fails every prompt") {
  ExternalSource src(stub({"--mode", "flaky"}), fast(0));
  const std::vector<std::string> ids{"a"};
  CHECK_THROWS_AS(src.collect(ids, 2), SourceFailure);
}

TEST_CASE("silent stub: every prompt fails with a report") {
  ExternalSource src(stub({"--mode", "silent"}), fast(1));
  const std::vector<std::string> ids{"a", "b"};
  try {
    src.collect(ids, 2);
    FAIL("expected SourceFailure");
  } catch (const SourceFailure& e) {
    REQUIRE(e.failures().size() == 2);
    CHECK(e.failures()[0].prompt_id == "a");
    CHECK(e.failures()[0].draws_completed == 0);
    CHECK(e.failures()[1].reason.find("timed out") != std::string::npos);
  }
}

TEST_CASE("protocol violations are hard errors") {
  const std::vector<std::string> ids{"a"};
  {
    ExternalSource src(stub({"--mode", "garbage"}), fast());
    CHECK_THROWS_AS(src.collect(ids, 2), ProtocolError);
  }
  {
    ExternalSource src(stub({"--mode", "unsolicited"}), fast());
    CHECK_THROWS_AS(src.collect(ids, 2), ProtocolError);
  }
  {
    ExternalSourceOptions o = fast();
    o.classes = 2;
    ExternalSource src(stub({"--mode", "constant", "--label", "5"}), o);
    CHECK_THROWS_AS(src.collect(ids, 2), ProtocolError);
  }
}

TEST_CASE("launch and readiness failures") {
  CHECK_THROWS_AS(ExternalSource({"/nonexistent/selfcons-stub"}, fast()), SourceFailure);
  CHECK_THROWS_AS(ExternalSource(stub({"--no-ready"}), fast(0)), SourceFailure);
}

TEST_CASE("early exit aborts the run") {
  ExternalSource src(stub({"--mode", "constant", "--exit-after", "3"}), fast());
  const std::vector<std::string> ids{"a", "b"};
  CHECK_THROWS_AS(src.collect(ids, 4), SourceFailure);
}
