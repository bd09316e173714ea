#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "selfcons/planner.hpp"
#include "support/oracles.hpp"

using namespace selfcons;
namespace ref = selfcons::testing;

TEST_CASE("bound_value examples") {
  const auto b = bound_value(8, 16);
  CHECK(b.term_prompt == 0.015625);
  CHECK(b.term_bias == doctest::Approx(0.019894367886486918).epsilon(1e-15));
  CHECK(b.term_cross == 0.00390625);
  CHECK(b.total == doctest::Approx(0.03942561788648692).epsilon(1e-15));
  CHECK(b.total == b.term_prompt + b.term_bias + b.term_cross);
  CHECK(bound_value(1, 1).total == doctest::Approx(0.9433098861837907).epsilon(1e-15));
  CHECK(std::abs(bound_value(1'000'000, 16).total - 1.0 / (16 * std::numbers::pi)) < 1e-6);
  CHECK_THROWS_AS(bound_value(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(bound_value(4, 0), std::invalid_argument);
}

TEST_CASE("bound terms are positive and decreasing") {
  for (std::int64_t m = 1; m < 50; ++m) {
    for (std::int64_t n = 1; n < 50; ++n) {
      const auto b = bound_value(m, n);
      CHECK(b.term_prompt > 0);
      CHECK(b.term_prompt > bound_value(m + 1, n).term_prompt);
      CHECK(b.term_bias > bound_value(m, n + 1).term_bias);
      CHECK(b.term_cross > bound_value(m + 1, n).term_cross);
      CHECK(b.term_cross > bound_value(m, n + 1).term_cross);
    }
  }
}

TEST_CASE("continuous_optimum") {
  const auto c = continuous_optimum(100);
  CHECK(c.m_star == doctest::Approx(6.266570686577501).epsilon(1e-14));
  CHECK(c.n_star == doctest::Approx(15.957691216057308).epsilon(1e-14));
  const auto big = continuous_optimum(10000);
  CHECK(big.m_star == doctest::Approx(62.665706865775014).epsilon(1e-14));
  CHECK(big.n_star == doctest::Approx(159.57691216057307).epsilon(1e-14));
  for (double B : {8.0 / std::numbers::pi, 1.0, 10.0, 1e6}) {
    const auto o = continuous_optimum(B);
    CHECK(std::abs(o.m_star * o.n_star / B - 1.0) <= 1e-9);
    CHECK(std::abs(o.m_star / o.n_star / (std::numbers::pi / 8) - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(continuous_optimum(0), std::invalid_argument);
  CHECK_THROWS_AS(continuous_optimum(-3), std::invalid_argument);
}

TEST_CASE("relaxed objective is minimized at the closed form") {
  for (double B : {10.0, 100.0, 1e3, 1e4, 1e6}) {
    const auto o = continuous_optimum(B);
    auto relaxed = [&](double m) { return 1.0 / (8 * m) + m / (std::numbers::pi * B); };
    CHECK(relaxed(o.m_star * 1.01) > relaxed(o.m_star));
    CHECK(relaxed(o.m_star * 0.99) > relaxed(o.m_star));
  }
}

TEST_CASE("integer plans for B = 100") {
  const auto ex = exhaustive_plan(100, false);
  CHECK(ex.m == 7);
  CHECK(ex.n == 14);
  CHECK(ex.bound.total == doctest::Approx(0.045695604115168716).epsilon(1e-14));
  CHECK(exhaustive_plan(100, true).m == 7);
  const auto ro = rounded_plan(100, true);
  CHECK(ro.m == 6);
  CHECK(ro.n == 16);
  CHECK(ro.bound.total == doctest::Approx(0.045936034553153586).epsilon(1e-14));
  CHECK(ex.bound.total < ro.bound.total);
  CHECK(ex.calls_used == 98);
  CHECK(integer_plan(100, true, PlanMethod::rounded).n == 16);
}

TEST_CASE("small budgets") {
  const auto one = exhaustive_plan(1, false);
  CHECK(one.m == 1);
  CHECK(one.n == 1);
  CHECK_THROWS_AS(exhaustive_plan(1, true), std::invalid_argument);
  CHECK_THROWS_AS(exhaustive_plan(0, false), std::invalid_argument);
  CHECK_THROWS_AS(rounded_plan(0, false), std::invalid_argument);
  struct Row {
    std::int64_t B, m, n;
    bool even;
  };
  for (const Row& r : {Row{2, 1, 2, false}, Row{3, 1, 3, false}, Row{3, 1, 2, true}, Row{5, 1, 5, false},
                       Row{5, 1, 4, true}, Row{8, 2, 4, false}, Row{8, 2, 4, true}}) {
    const auto p = exhaustive_plan(r.B, r.even);
    CAPTURE(r.B);
    CHECK(p.m == r.m);
    CHECK(p.n == r.n);
  }
}

TEST_CASE("exhaustive plan equals brute force") {
  for (std::int64_t B = 1; B <= 400; ++B) {
    for (bool even : {false, true}) {
      if (even && B < 2) continue;
      const auto got = exhaustive_plan(B, even);
      const auto want = ref::brute_force_plan(B, even);
      CAPTURE(B);
      CAPTURE(even);
      CHECK(got.m == want.m);
      CHECK(got.n == want.n);
      CHECK(got.calls_used <= B);
    }
  }
}

TEST_CASE("property: exhaustive dominates rounded up to 1e4") {
  for (std::int64_t B = 2; B <= 10000; ++B) {
    const auto ex = exhaustive_plan(B, true);
    const auto ro = rounded_plan(B, true);
    REQUIRE(ro.m * ro.n <= B);
    REQUIRE(ro.n % 2 == 0);
    REQUIRE(ex.bound.total <= ro.bound.total);
  }
}

TEST_CASE("property: plans scale as sqrt(B)") {
  auto check = [](std::int64_t B) {
    const auto p = exhaustive_plan(B, true);
    const double r = std::sqrt(static_cast<double>(B));
    CAPTURE(B);
    REQUIRE(p.m / r >= 0.4);
    REQUIRE(p.m / r <= 1.0);
    REQUIRE(p.n / r >= 1.0);
    REQUIRE(p.n / r <= 2.25);
  };
  for (std::int64_t B = 16; B <= 10000; ++B) check(B);
  for (std::int64_t B = 10000; B <= 1'000'000; B = B * 5 / 4 + 1) check(B);
  check(1'000'000);
}

TEST_CASE("property: cross term share shrinks as B doubles") {
  double prev = 1.0;
  for (std::int64_t B = 16; B <= (1 << 20); B *= 2) {
    const auto p = exhaustive_plan(B, true);
    const double share = p.bound.term_cross / p.bound.total;
    CHECK(share < prev);
    prev = share;
  }
}
