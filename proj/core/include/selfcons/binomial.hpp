#pragma once

// Exact binomial quantities behind the plug-in estimator's bias and variance.
//
// Every pmf term is assembled in log space (long double) from a cached
// log-factorial table and exponentiated once. Sums over k use compensated
// accumulation. All functions are pure; the default log-factorial table is
// built on first use behind a thread-safe static and is safe to share.

#include <cstdint>
#include <mutex>
#include <vector>

#include "selfcons/numeric.hpp"

namespace selfcons {

/// Cumulative table of ln n! kept in quad precision, with a long double
/// shadow for hot pmf loops. Entries up to `kEagerLimit` are built in the
/// constructor; the rest up to `cap` are built once on first request.
class LogFactorialTable {
 public:
  static constexpr std::int64_t kDefaultCap = 1'000'000;
  static constexpr std::int64_t kEagerLimit = 1 << 16;

  explicit LogFactorialTable(std::int64_t cap = kDefaultCap);

  LogFactorialTable(const LogFactorialTable&) = delete;
  LogFactorialTable& operator=(const LogFactorialTable&) = delete;

  std::int64_t cap() const { return cap_; }

  /// ln n! rounded to long double.
  long double narrow(std::int64_t n) const;
  /// ln n! in quad precision.
  Wide wide(std::int64_t n) const;

 private:
  void build_tail() const;

  std::int64_t cap_;
  std::int64_t eager_end_;
  std::vector<Wide> eager_wide_;
  std::vector<long double> eager_narrow_;
  mutable std::once_flag tail_once_;
  mutable std::vector<Wide> tail_wide_;
  mutable std::vector<long double> tail_narrow_;
};

/// Process-wide table with the default cap.
const LogFactorialTable& default_log_factorials();

/// ln n!; absolute error below 1e-12 for n <= 1e6.
long double log_factorial(std::int64_t n);
Wide log_factorial_wide(std::int64_t n);

/// Robbins' two-sided Stirling sandwich for ln n!:
///   ln sqrt(2 pi n) + n ln(n/e) + 1/(12n+1)  <=  ln n!  <=  ... + 1/(12n).
/// Kept in quad precision: near n = 1e4 the upper gap is ~1/(360 n^3),
/// far below a long double ulp of ln n!.
struct LogFactorialBounds {
  std::int64_t n = 0;
  Wide lower = 0;
  Wide upper = 0;

  double lower_value() const { return static_cast<double>(lower); }
  double upper_value() const { return static_cast<double>(upper); }
};

LogFactorialBounds robbins_bounds(std::int64_t n);

/// ln[C(n,k) p^k (1-p)^(n-k)], with 0 ln 0 = 0 at the endpoints.
/// Returns -infinity for outcomes of probability zero.
double binom_log_pmf(int n, int k, double p);

/// pmf(k) for k = 0..n.
std::vector<double> binom_pmf_row(int n, double p);

/// C(n, n/2) 2^-n for even n >= 2: the chance of an exact tie.
double central_binom_ratio(int n);

/// E[min{k, n-k}] / n for k ~ Binomial(n, p), by full enumeration.
double expected_plugin_error(int n, double p);

struct BiasDecomposition {
  int n = 0;
  double p = 0;
  double true_error = 0;         // min{p, 1-p}
  double expected_estimate = 0;  // E[min{k/n, 1-k/n}]
  double bias = 0;               // true_error - expected_estimate
};

BiasDecomposition bias_exact(int n, double p);

/// (1/n) sum_{k > n/2} (2k - n) pmf(k). Equals bias_exact(n, p).bias when n
/// is even and p <= 1/2; rejects anything else.
double bias_tail_identity(int n, double p);

struct BiasBound {
  double closed_form = 0;   // sqrt(1 / (2 pi n))
  double central_term = 0;  // (1/2) C(n, n/2) 2^-n, attained at p = 1/2
};

/// Even n only: the odd-n analogue is not proven and n = 1 breaks it.
BiasBound bias_upper_bound(int n);

/// Var[min{k/n, 1-k/n}] by enumeration; never exceeds 1/(4n).
double plugin_variance_exact(int n, double p);

}  // namespace selfcons
