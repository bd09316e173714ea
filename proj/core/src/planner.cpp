#include "selfcons/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace selfcons {

const char* to_string(PlanMethod method) {
  return method == PlanMethod::rounded ? "rounded" : "exhaustive";
}

BoundBreakdown bound_value(std::int64_t m, std::int64_t n) {
  if (m < 1 || n < 1) {
    throw std::invalid_argument("bound_value: m and n must be >= 1 (got m=" + std::to_string(m) +
                                ", n=" + std::to_string(n) + ")");
  }
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  BoundBreakdown b;
  b.m = m;
  b.n = n;
  b.term_prompt = 1.0 / (8.0 * dm);
  b.term_bias = 1.0 / (std::numbers::pi * dn);
  b.term_cross = 1.0 / (2.0 * dn * dm);
  b.total = b.term_prompt + b.term_bias + b.term_cross;
  return b;
}

ContinuousOptimum continuous_optimum(double budget) {
  if (!(budget > 0) || !std::isfinite(budget)) {
    throw std::invalid_argument("continuous_optimum: budget must be a finite value > 0");
  }
  return {std::sqrt(std::numbers::pi * budget / 8.0), std::sqrt(8.0 * budget / std::numbers::pi)};
}

namespace {

std::int64_t min_calls_per_prompt(bool even) { return even ? 2 : 1; }

void require_feasible(std::int64_t budget, bool even) {
  if (budget < min_calls_per_prompt(even)) {
    throw std::invalid_argument("budget " + std::to_string(budget) + " is too small" +
                                (even ? " for an even number of calls per prompt (need >= 2)"
                                      : " (need >= 1)"));
  }
}

BudgetPlan make_plan(std::int64_t budget, bool even, PlanMethod method, std::int64_t m,
                     std::int64_t n) {
  const auto opt = continuous_optimum(static_cast<double>(budget));
  BudgetPlan plan;
  plan.budget = budget;
  plan.m_star = opt.m_star;
  plan.n_star = opt.n_star;
  plan.m = m;
  plan.n = n;
  plan.calls_used = m * n;
  plan.bound = bound_value(m, n);
  plan.method = method;
  plan.even_n = even;
  return plan;
}

}  // namespace

BudgetPlan rounded_plan(std::int64_t budget, bool require_even_n) {
  require_feasible(budget, require_even_n);
  const auto opt = continuous_optimum(static_cast<double>(budget));
  const std::int64_t step = require_even_n ? 2 : 1;
  const std::int64_t n_min = min_calls_per_prompt(require_even_n);

  std::int64_t m = std::max<std::int64_t>(1, std::llround(opt.m_star));
  std::int64_t n = require_even_n ? 2 * std::llround(opt.n_star / 2.0) : std::llround(opt.n_star);
  n = std::max(n, n_min);
  while (m * n > budget && n - step >= n_min) n -= step;
  while (m * n > budget && m > 1) --m;
  return make_plan(budget, require_even_n, PlanMethod::rounded, m, n);
}

BudgetPlan exhaustive_plan(std::int64_t budget, bool require_even_n) {
  require_feasible(budget, require_even_n);
  const std::int64_t n_min = min_calls_per_prompt(require_even_n);
  std::int64_t best_m = 0;
  std::int64_t best_n = 0;
  double best_total = 0;
  // For fixed m the bound falls as n grows, so only n = floor(B/m) matters.
  for (std::int64_t m = 1; m <= budget; ++m) {
    std::int64_t n = budget / m;
    if (require_even_n) n -= n % 2;
    if (n < n_min) break;
    const double total = bound_value(m, n).total;
    const bool better = best_m == 0 || total < best_total ||
                        (total == best_total && m * n > best_m * best_n);
    if (better) {
      best_m = m;
      best_n = n;
      best_total = total;
    }
  }
  return make_plan(budget, require_even_n, PlanMethod::exhaustive, best_m, best_n);
}

BudgetPlan integer_plan(std::int64_t budget, bool require_even_n, PlanMethod method) {
  return method == PlanMethod::rounded ? rounded_plan(budget, require_even_n)
                                       : exhaustive_plan(budget, require_even_n);
}

}  // namespace selfcons
