#include "selfcons/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "selfcons/binomial.hpp"
#include "selfcons/numeric.hpp"

namespace selfcons {

bool InvariantReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

namespace {

enum class Kind { residual_at_most, slack_positive, slack_at_least };

// Tracks the worst case of one inequality: the largest residual or the
// smallest slack, with the (n, p) that produced it.
class Tracker {
 public:
  Tracker(std::string name, Kind kind, double threshold) : kind_(kind), threshold_(threshold) {
    check_.name = std::move(name);
    char buf[48];
    switch (kind) {
      case Kind::residual_at_most:
        std::snprintf(buf, sizeof buf, "<= %g", threshold);
        break;
      case Kind::slack_positive:
        std::snprintf(buf, sizeof buf, "> %g", threshold);
        break;
      case Kind::slack_at_least:
        std::snprintf(buf, sizeof buf, ">= %g", threshold);
        break;
    }
    check_.relation = buf;
  }

  void observe(double value, int n, std::optional<double> p = std::nullopt) {
    const bool worse = check_.cases == 0 ||
                       (kind_ == Kind::residual_at_most ? value > check_.worst : value < check_.worst);
    if (worse) {
      check_.worst = value;
      check_.witness_n = n;
      check_.witness_p = p;
    }
    ++check_.cases;
  }

  InvariantCheck finish() {
    switch (kind_) {
      case Kind::residual_at_most:
        check_.passed = check_.worst <= threshold_;
        break;
      case Kind::slack_positive:
        check_.passed = check_.worst > threshold_;
        break;
      case Kind::slack_at_least:
        check_.passed = check_.worst >= threshold_;
        break;
    }
    // NaN anywhere fails the check.
    if (std::isnan(check_.worst)) check_.passed = false;
    return check_;
  }

 private:
  InvariantCheck check_;
  Kind kind_;
  double threshold_;
};

}  // namespace

InvariantReport run_invariant_battery(int max_n, double grid_step) {
  if (max_n < 2) throw std::invalid_argument("invariant battery: max_n must be >= 2");
  const double steps_real = 1.0 / grid_step;
  const long steps = std::lround(steps_real);
  if (!(grid_step > 0) || steps < 2 || steps % 2 != 0 ||
      std::abs(steps_real - static_cast<double>(steps)) > 1e-6) {
    throw std::invalid_argument("invariant battery: grid step must split [0, 1] into an even number of steps");
  }
  const double tol = Tolerances::identity;

  Tracker normalization("pmf_normalization", Kind::residual_at_most, tol);
  Tracker robbins("robbins_sandwich", Kind::slack_positive, 0.0);
  Tracker central("central_binomial_bound", Kind::slack_positive, 0.0);
  Tracker identity("bias_tail_identity", Kind::residual_at_most, tol);
  Tracker nonneg("bias_nonnegative", Kind::slack_at_least, -tol);
  Tracker worst_case("bias_worst_case_at_half", Kind::residual_at_most, tol);
  Tracker equality("bias_half_equals_central_term", Kind::residual_at_most, tol);
  Tracker bias_bound("bias_upper_bound", Kind::slack_positive, 0.0);
  Tracker variance("variance_bound", Kind::slack_at_least, 0.0);
  Tracker symmetry("plugin_symmetry", Kind::residual_at_most, tol);

  for (int n = 1; n <= max_n; ++n) {
    const auto rb = robbins_bounds(n);
    const Wide lf = log_factorial_wide(n);
    const Wide slack = std::min(lf - rb.lower, rb.upper - lf);
    robbins.observe(static_cast<double>(slack), n);

    const bool even = n % 2 == 0;
    double bias_half = 0;
    if (even) {
      const double ratio = central_binom_ratio(n);
      central.observe(std::sqrt(2.0 / (std::numbers::pi * n)) - ratio, n);
      bias_half = bias_exact(n, 0.5).bias;
      equality.observe(std::abs(bias_half - 0.5 * ratio), n, 0.5);
      bias_bound.observe(bias_upper_bound(n).closed_form - bias_half, n, 0.5);
    }

    for (long j = 0; j <= steps; ++j) {
      const double p = static_cast<double>(j) / static_cast<double>(steps);
      CompensatedSum<double> total;
      for (double x : binom_pmf_row(n, p)) total += x;
      normalization.observe(std::abs(total.value() - 1.0), n, p);
      variance.observe(1.0 / (4.0 * n) - plugin_variance_exact(n, p), n, p);

      if (2 * j > steps) continue;
      const double mirrored = static_cast<double>(steps - j) / static_cast<double>(steps);
      const auto exact = bias_exact(n, p);
      symmetry.observe(std::abs(exact.expected_estimate - expected_plugin_error(n, mirrored)), n, p);
      if (even) {
        identity.observe(std::abs(bias_tail_identity(n, p) - exact.bias), n, p);
        nonneg.observe(exact.bias, n, p);
        worst_case.observe(exact.bias - bias_half, n, p);
      }
    }
  }

  InvariantReport report;
  report.max_n = max_n;
  report.grid_step = grid_step;
  for (auto* t : {&normalization, &robbins, &central, &identity, &nonneg, &worst_case, &equality,
                  &bias_bound, &variance, &symmetry}) {
    report.checks.push_back(t->finish());
  }
  return report;
}

}  // namespace selfcons
