#include "selfcons/binomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace selfcons {

namespace {

void require_probability(double p, const char* where) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(where) + ": p must lie in [0, 1], got " +
                                std::to_string(p));
  }
}

void require_positive_n(int n, const char* where) {
  if (n < 1) {
    throw std::invalid_argument(std::string(where) + ": n must be >= 1, got " +
                                std::to_string(n));
  }
}

void require_even_n(int n, const char* where) {
  require_positive_n(n, where);
  if (n % 2 != 0) {
    throw std::invalid_argument(std::string(where) + ": n must be even, got " +
                                std::to_string(n));
  }
}

// Log-space pmf evaluator for a fixed (n, p). ln p and ln(1-p) are taken
// once; a zero probability contributes only through its k = 0 term.
class PmfRow {
 public:
  PmfRow(int n, double p)
      : n_(n),
        table_(default_log_factorials()),
        log_n_fact_(table_.narrow(n)),
        log_p_(p > 0 ? std::log(static_cast<long double>(p))
                     : -std::numeric_limits<long double>::infinity()),
        log_q_(p < 1 ? std::log1p(-static_cast<long double>(p))
                     : -std::numeric_limits<long double>::infinity()) {}

  long double log_at(int k) const {
    const int rest = n_ - k;
    if ((k > 0 && std::isinf(log_p_)) || (rest > 0 && std::isinf(log_q_))) {
      return -std::numeric_limits<long double>::infinity();
    }
    long double lp = log_n_fact_ - table_.narrow(k) - table_.narrow(rest);
    if (k > 0) lp += k * log_p_;
    if (rest > 0) lp += rest * log_q_;
    return lp;
  }

  double at(int k) const { return std::exp(static_cast<double>(log_at(k))); }

 private:
  int n_;
  const LogFactorialTable& table_;
  long double log_n_fact_;
  long double log_p_;
  long double log_q_;
};

struct PluginMoments {
  double mean = 0;
  double variance = 0;
};

// Moments of min{k, n-k} / n. Two passes so the variance is centred.
PluginMoments plugin_moments(int n, double p, bool want_variance) {
  const PmfRow row(n, p);
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  CompensatedSum<double> first;
  for (int k = 0; k <= n; ++k) {
    pmf[k] = row.at(k);
    first += std::min(k, n - k) * pmf[k];
  }
  PluginMoments out;
  out.mean = first.value() / n;
  if (want_variance) {
    CompensatedSum<double> second;
    for (int k = 0; k <= n; ++k) {
      const double d = static_cast<double>(std::min(k, n - k)) / n - out.mean;
      second += d * d * pmf[k];
    }
    out.variance = second.value();
  }
  return out;
}

}  // namespace

double binom_log_pmf(int n, int k, double p) {
  require_positive_n(n, "binom_log_pmf");
  if (k < 0 || k > n) {
    throw std::invalid_argument("binom_log_pmf: k must lie in [0, n], got k=" +
                                std::to_string(k) + " n=" + std::to_string(n));
  }
  require_probability(p, "binom_log_pmf");
  return static_cast<double>(PmfRow(n, p).log_at(k));
}

std::vector<double> binom_pmf_row(int n, double p) {
  require_positive_n(n, "binom_pmf_row");
  require_probability(p, "binom_pmf_row");
  const PmfRow row(n, p);
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) out[k] = row.at(k);
  return out;
}

double central_binom_ratio(int n) {
  require_even_n(n, "central_binom_ratio");
  const auto& t = default_log_factorials();
  const long double log_ratio =
      t.narrow(n) - 2 * t.narrow(n / 2) - n * std::numbers::ln2_v<long double>;
  return std::exp(static_cast<double>(log_ratio));
}

double expected_plugin_error(int n, double p) {
  require_positive_n(n, "expected_plugin_error");
  require_probability(p, "expected_plugin_error");
  return plugin_moments(n, p, false).mean;
}

BiasDecomposition bias_exact(int n, double p) {
  BiasDecomposition d;
  d.n = n;
  d.p = p;
  d.expected_estimate = expected_plugin_error(n, p);
  d.true_error = std::min(p, 1.0 - p);
  d.bias = d.true_error - d.expected_estimate;
  return d;
}

double bias_tail_identity(int n, double p) {
  require_even_n(n, "bias_tail_identity");
  require_probability(p, "bias_tail_identity");
  if (p > 0.5) throw std::invalid_argument("bias_tail_identity: requires p <= 1/2");
  const PmfRow row(n, p);
  CompensatedSum<double> acc;
  for (int k = n / 2 + 1; k <= n; ++k) acc += (2 * k - n) * row.at(k);
  return acc.value() / n;
}

BiasBound bias_upper_bound(int n) {
  require_even_n(n, "bias_upper_bound");
  BiasBound b;
  b.closed_form = std::sqrt(1.0 / (2.0 * std::numbers::pi * n));
  b.central_term = 0.5 * central_binom_ratio(n);
  return b;
}

double plugin_variance_exact(int n, double p) {
  require_positive_n(n, "plugin_variance_exact");
  require_probability(p, "plugin_variance_exact");
  return plugin_moments(n, p, true).variance;
}

}  // namespace selfcons
