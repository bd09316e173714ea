#pragma once

// Mean-squared-error bound for the domain estimator with m prompts and n
// calls per prompt, and the split of a call budget B between the two.

#include <cstdint>

namespace selfcons {

/// 1/(8m) + 1/(pi n) + 1/(2nm): prompt sampling, per-prompt bias, and
/// per-prompt variance.
struct BoundBreakdown {
  std::int64_t m = 0;
  std::int64_t n = 0;
  double term_prompt = 0;
  double term_bias = 0;
  double term_cross = 0;
  double total = 0;
};

BoundBreakdown bound_value(std::int64_t m, std::int64_t n);

struct ContinuousOptimum {
  double m_star = 0;  // sqrt(pi B / 8)
  double n_star = 0;  // sqrt(8 B / pi)
};

ContinuousOptimum continuous_optimum(double budget);

enum class PlanMethod { rounded, exhaustive };

const char* to_string(PlanMethod method);

struct BudgetPlan {
  std::int64_t budget = 0;
  double m_star = 0;
  double n_star = 0;
  std::int64_t m = 0;
  std::int64_t n = 0;
  std::int64_t calls_used = 0;
  BoundBreakdown bound;
  PlanMethod method = PlanMethod::exhaustive;
  bool even_n = true;
};

/// Closed-form optimum rounded to the nearest integers (n to the nearest
/// even value when requested), then n lowered until m n <= B.
BudgetPlan rounded_plan(std::int64_t budget, bool require_even_n = true);

/// Minimizer of bound_value over all m n <= B (n even when requested).
/// Ties go to the larger m n, then the smaller m.
BudgetPlan exhaustive_plan(std::int64_t budget, bool require_even_n = true);

BudgetPlan integer_plan(std::int64_t budget, bool require_even_n = true,
                        PlanMethod method = PlanMethod::exhaustive);

}  // namespace selfcons
