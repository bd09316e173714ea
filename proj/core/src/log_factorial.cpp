#include <quadmath.h>

#include <algorithm>
#include <stdexcept>
#include <string>

#include "selfcons/binomial.hpp"

namespace selfcons {

namespace {

void fill_cumulative(std::int64_t first, std::int64_t last, Wide start,
                     std::vector<Wide>& wide, std::vector<long double>& narrow) {
  wide.resize(static_cast<std::size_t>(last - first + 1));
  narrow.resize(wide.size());
  Wide acc = start;
  for (std::int64_t i = first; i <= last; ++i) {
    if (i > 1) acc += logq(static_cast<Wide>(i));
    const auto slot = static_cast<std::size_t>(i - first);
    wide[slot] = acc;
    narrow[slot] = static_cast<long double>(acc);
  }
}

}  // namespace

LogFactorialTable::LogFactorialTable(std::int64_t cap) : cap_(cap) {
  if (cap < 1) throw std::invalid_argument("log-factorial cap must be positive");
  eager_end_ = std::min(cap, kEagerLimit);
  fill_cumulative(0, eager_end_, 0, eager_wide_, eager_narrow_);
}

void LogFactorialTable::build_tail() const {
  std::call_once(tail_once_, [this] {
    if (cap_ > eager_end_) {
      fill_cumulative(eager_end_ + 1, cap_, eager_wide_.back(), tail_wide_,
                      tail_narrow_);
    }
  });
}

Wide LogFactorialTable::wide(std::int64_t n) const {
  if (n < 0) throw std::invalid_argument("log_factorial: negative argument " + std::to_string(n));
  if (n <= eager_end_) return eager_wide_[static_cast<std::size_t>(n)];
  build_tail();
  if (n <= cap_) return tail_wide_[static_cast<std::size_t>(n - eager_end_ - 1)];
  Wide acc = tail_wide_.empty() ? eager_wide_.back() : tail_wide_.back();
  for (std::int64_t i = cap_ + 1; i <= n; ++i) acc += logq(static_cast<Wide>(i));
  return acc;
}

long double LogFactorialTable::narrow(std::int64_t n) const {
  if (n >= 0 && n <= eager_end_) return eager_narrow_[static_cast<std::size_t>(n)];
  if (n > eager_end_ && n <= cap_) {
    build_tail();
    return tail_narrow_[static_cast<std::size_t>(n - eager_end_ - 1)];
  }
  return static_cast<long double>(wide(n));
}

const LogFactorialTable& default_log_factorials() {
  static const LogFactorialTable table;
  return table;
}

long double log_factorial(std::int64_t n) { return default_log_factorials().narrow(n); }

Wide log_factorial_wide(std::int64_t n) { return default_log_factorials().wide(n); }

LogFactorialBounds robbins_bounds(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("robbins_bounds: n must be >= 1");
  const Wide wn = static_cast<Wide>(n);
  const Wide stirling = 0.5Q * logq(2 * M_PIq * wn) + wn * (logq(wn) - 1);
  LogFactorialBounds b;
  b.n = n;
  b.lower = stirling + 1 / (12 * wn + 1);
  b.upper = stirling + 1 / (12 * wn);
  return b;
}

}  // namespace selfcons
