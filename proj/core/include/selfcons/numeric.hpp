#pragma once

#include <cstddef>
#include <span>

namespace selfcons {

// Quad precision, used only where long double cannot resolve the quantity
// being checked (Stirling remainders near n = 1e4).
using Wide = __float128;

/// Numeric policy shared by every module. Changing a value here changes it
/// everywhere it is enforced.
struct Tolerances {
  /// Exact identities evaluated by two algebraic routes.
  static constexpr double identity = 1e-12;
  /// Aggregated Monte Carlo / floating-point bookkeeping comparisons
  /// (probability vectors summing to one, m* n* = B, ...).
  static constexpr double aggregation = 1e-9;
  /// Standard errors of slack granted to an empirical MSE against the bound.
  static constexpr double bound_margin_se = 3.0;
  /// Largest enumeration the brute-force MSE oracle will attempt.
  static constexpr double oracle_cells = 1e7;
};

/// Neumaier's variant of Kahan summation. Order-dependent but deterministic.
template <typename T>
class CompensatedSum {
 public:
  void add(T x) {
    T t = sum_ + x;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(T x) {
    add(x);
    return *this;
  }
  T value() const { return sum_ + carry_; }

 private:
  T sum_{0};
  T carry_{0};
};

double compensated_total(std::span<const double> xs);
double compensated_mean(std::span<const double> xs);

}  // namespace selfcons
