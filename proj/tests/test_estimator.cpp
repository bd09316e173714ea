#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "selfcons/binomial.hpp"
#include "selfcons/estimator.hpp"

using namespace selfcons;

TEST_CASE("true_error") {
  CHECK(true_error(PromptSpec::binary("a", 0.5)) == 0.5);
  CHECK(true_error(PromptSpec::binary("a", 0.9)) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(true_error(PromptSpec::multiclass("a", {0.5, 0.3, 0.2})) == 0.5);
}

TEST_CASE("domain_true_error with weights") {
  CHECK(domain_true_error(PromptDomain({PromptSpec::binary("a", 0.5), PromptSpec::binary("b", 0.5)})) == 0.5);
  CHECK(domain_true_error(PromptDomain({PromptSpec::binary("a", 0.9), PromptSpec::binary("b", 0.5)})) ==
        doctest::Approx(0.3).epsilon(1e-15));
  CHECK(domain_true_error(PromptDomain({PromptSpec::binary("a", 0.9, 3), PromptSpec::binary("b", 0.5, 1)})) ==
        doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("equal weights give the plain mean exactly") {
  std::vector<PromptSpec> unit, heavy;
  double mean = 0;
  const std::vector<double> ps{0.1, 0.45, 0.5, 0.8};
  for (std::size_t i = 0; i < ps.size(); ++i) {
    unit.push_back(PromptSpec::binary("x" + std::to_string(i), ps[i], 1.0));
    heavy.push_back(PromptSpec::binary("x" + std::to_string(i), ps[i], 2.5));
    mean += std::min(ps[i], 1 - ps[i]);
  }
  mean /= 4;
  CHECK(domain_true_error(PromptDomain(unit)) == doctest::Approx(mean).epsilon(1e-15));
  CHECK(domain_true_error(PromptDomain(heavy)) == domain_true_error(PromptDomain(unit)));
}

TEST_CASE("prompt and domain validation") {
  CHECK_THROWS_AS(PromptSpec::binary("a", 1.2), std::invalid_argument);
  CHECK_THROWS_AS(PromptSpec::binary("a", 0.2, -1), std::invalid_argument);
  CHECK_THROWS_AS(PromptSpec::multiclass("a", {0.5, 0.6}), std::invalid_argument);
  CHECK_NOTHROW(PromptSpec::multiclass("a", {0.5, 0.5 + 1e-10}));
  CHECK_THROWS_AS(PromptDomain({}), std::invalid_argument);
  CHECK_THROWS_AS(PromptDomain({PromptSpec::binary("a", 0.2), PromptSpec::binary("a", 0.3)}), std::invalid_argument);
  CHECK_THROWS_AS(PromptDomain({PromptSpec::binary("a", 0.2, 0)}), std::invalid_argument);
  CHECK_THROWS_AS(PromptDomain({PromptSpec::binary("a", 0.2), PromptSpec::multiclass("b", {0.2, 0.3, 0.5})}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ResponseCounts::binary("a", 5, 4), std::invalid_argument);
  CHECK_THROWS_AS(ResponseCounts::binary("a", 0, 0), std::invalid_argument);
}

TEST_CASE("per_prompt_estimate") {
  CHECK(per_prompt_estimate(ResponseCounts::binary("a", 3, 10)) == 0.3);
  CHECK(per_prompt_estimate(ResponseCounts::binary("a", 0, 10)) == 0.0);
  CHECK(per_prompt_estimate(ResponseCounts::multiclass("a", {5, 3, 2})) == 0.5);
}

TEST_CASE("domain_estimate examples") {
  const std::vector<ResponseCounts> two{ResponseCounts::binary("a", 0, 4), ResponseCounts::binary("b", 2, 4)};
  const auto e = domain_estimate(two);
  CHECK(e.value == 0.25);
  CHECK(e.m == 2);
  REQUIRE(e.common_n.has_value());
  CHECK(*e.common_n == 4);
  CHECK(e.per_prompt[0].first == "a");
  CHECK(e.per_prompt[1].second == 0.5);

  const std::vector<ResponseCounts> unanimous(5, ResponseCounts::binary("u", 6, 6));
  CHECK(domain_estimate(unanimous).value == 0.0);

  const std::vector<ResponseCounts> three{ResponseCounts::binary("a", 1, 4), ResponseCounts::binary("b", 3, 4),
                                          ResponseCounts::binary("c", 2, 4)};
  CHECK(domain_estimate(three).value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const std::vector<ResponseCounts> ragged{ResponseCounts::binary("a", 1, 4), ResponseCounts::binary("b", 1, 3)};
  CHECK_FALSE(domain_estimate(ragged).common_n.has_value());

  CHECK_THROWS_AS(domain_estimate(std::vector<ResponseCounts>{}), std::invalid_argument);
  const std::vector<ResponseCounts> mixed{ResponseCounts::binary("a", 1, 4),
                                          ResponseCounts::multiclass("b", {1, 1, 2})};
  CHECK_THROWS_AS(domain_estimate(mixed), std::invalid_argument);
}

TEST_CASE("majority label breaks ties toward the lowest class") {
  CHECK(majority_label(ResponseCounts::multiclass("a", {1, 3, 3})) == 1);
  CHECK(majority_label(ResponseCounts::multiclass("a", {2, 2, 0})) == 0);
  CHECK(majority_label(ResponseCounts::binary("a", 3, 4)) == 1);
}

TEST_CASE("property: label flip, range, binary equals two-class") {
  for (int n = 1; n <= 40; ++n) {
    for (int k = 0; k <= n; ++k) {
      const double a = per_prompt_estimate(ResponseCounts::binary("x", k, n));
      CHECK(a == per_prompt_estimate(ResponseCounts::binary("x", n - k, n)));
      CHECK(a >= 0.0);
      CHECK(a <= 0.5);
      CHECK(a == per_prompt_estimate(ResponseCounts::multiclass("x", {n - k, k})));
    }
  }
}

TEST_CASE("property: multiclass range") {
  for (int a = 0; a <= 6; ++a) {
    for (int b = 0; b <= 6; ++b) {
      for (int c = 0; c <= 6; ++c) {
        if (a + b + c == 0) continue;
        const double e = per_prompt_estimate(ResponseCounts::multiclass("x", {a, b, c}));
        CHECK(e >= 0.0);
        CHECK(e <= 1.0 - 1.0 / 3.0 + 1e-15);
      }
    }
  }
}

TEST_CASE("property: plug-in expectation matches binomial-core") {
  for (int n = 1; n <= 30; ++n) {
    for (double p : {0.0, 0.13, 0.5, 0.62, 1.0}) {
      const auto row = binom_pmf_row(n, p);
      CompensatedSum<double> s;
      for (int k = 0; k <= n; ++k) s += row[static_cast<std::size_t>(k)] * per_prompt_estimate(ResponseCounts::binary("x", k, n));
      CHECK(std::abs(s.value() - expected_plugin_error(n, p)) <= 1e-12);
    }
  }
}
