#include "selfcons/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "selfcons/numeric.hpp"

namespace selfcons {

const char* to_string(ResponseKind kind) {
  return kind == ResponseKind::binary ? "binary" : "multiclass";
}

namespace {

void require_weight(const std::string& id, double weight) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("prompt '" + id + "': weight must be a finite value >= 0");
  }
}

}  // namespace

PromptSpec PromptSpec::binary(std::string id, double p, double weight) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("prompt '" + id + "': p must lie in [0, 1]");
  }
  require_weight(id, weight);
  PromptSpec s;
  s.id_ = std::move(id);
  s.kind_ = ResponseKind::binary;
  s.p_vec_ = {1.0 - p, p};
  s.weight_ = weight;
  return s;
}

PromptSpec PromptSpec::multiclass(std::string id, std::vector<double> p_vec, double weight) {
  if (p_vec.size() < 2) {
    throw std::invalid_argument("prompt '" + id + "': multiclass needs at least 2 classes");
  }
  CompensatedSum<double> total;
  for (double pc : p_vec) {
    if (!(pc >= 0.0 && pc <= 1.0)) {
      throw std::invalid_argument("prompt '" + id + "': class probabilities must lie in [0, 1]");
    }
    total += pc;
  }
  if (std::abs(total.value() - 1.0) > Tolerances::aggregation) {
    throw std::invalid_argument("prompt '" + id + "': class probabilities must sum to 1");
  }
  require_weight(id, weight);
  PromptSpec s;
  s.id_ = std::move(id);
  s.kind_ = ResponseKind::multiclass;
  s.p_vec_ = std::move(p_vec);
  s.weight_ = weight;
  return s;
}

double PromptSpec::p() const {
  if (kind_ != ResponseKind::binary) {
    throw std::logic_error("prompt '" + id_ + "' is multiclass; it has no scalar p");
  }
  return p_vec_[1];
}

PromptDomain::PromptDomain(std::vector<PromptSpec> prompts) : prompts_(std::move(prompts)) {
  if (prompts_.empty()) throw std::invalid_argument("prompt domain must contain at least one prompt");
  std::unordered_set<std::string> seen;
  const auto kind = prompts_.front().kind();
  const auto classes = prompts_.front().classes();
  CompensatedSum<double> total;
  cumulative_.reserve(prompts_.size());
  for (const auto& spec : prompts_) {
    if (!seen.insert(spec.id()).second) {
      throw std::invalid_argument("duplicate prompt id '" + spec.id() + "'");
    }
    if (spec.kind() != kind || spec.classes() != classes) {
      throw std::invalid_argument("prompt '" + spec.id() +
                                  "' differs in kind or class count from the rest of the domain");
    }
    total += spec.weight();
    cumulative_.push_back(total.value());
  }
  total_weight_ = total.value();
  if (!(total_weight_ > 0.0)) throw std::invalid_argument("prompt domain total weight must be > 0");
}

ResponseCounts ResponseCounts::binary(std::string prompt_id, int k, int n) {
  if (n < 1) throw std::invalid_argument("counts for '" + prompt_id + "': n must be >= 1");
  if (k < 0 || k > n) throw std::invalid_argument("counts for '" + prompt_id + "': k must lie in [0, n]");
  ResponseCounts c;
  c.prompt_id_ = std::move(prompt_id);
  c.kind_ = ResponseKind::binary;
  c.n_ = n;
  c.counts_ = {n - k, k};
  return c;
}

ResponseCounts ResponseCounts::multiclass(std::string prompt_id, std::vector<int> counts) {
  if (counts.size() < 2) {
    throw std::invalid_argument("counts for '" + prompt_id + "': multiclass needs at least 2 classes");
  }
  long long n = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("counts for '" + prompt_id + "': negative class count");
    n += c;
  }
  if (n < 1) throw std::invalid_argument("counts for '" + prompt_id + "': n must be >= 1");
  ResponseCounts r;
  r.prompt_id_ = std::move(prompt_id);
  r.kind_ = ResponseKind::multiclass;
  r.n_ = static_cast<int>(n);
  r.counts_ = std::move(counts);
  return r;
}

int ResponseCounts::k() const {
  if (kind_ != ResponseKind::binary) {
    throw std::logic_error("counts for '" + prompt_id_ + "' are multiclass; no scalar k");
  }
  return counts_[1];
}

double true_error(const PromptSpec& spec) {
  if (spec.kind() == ResponseKind::binary) return std::min(spec.p(), 1.0 - spec.p());
  return 1.0 - *std::max_element(spec.p_vec().begin(), spec.p_vec().end());
}

double domain_true_error(const PromptDomain& domain) {
  CompensatedSum<double> acc;
  for (const auto& spec : domain.prompts()) acc += true_error(spec) * spec.weight();
  return acc.value() / domain.total_weight();
}

double per_prompt_estimate(const ResponseCounts& counts) {
  const int n = counts.n();
  if (n < 1) throw std::invalid_argument("per_prompt_estimate: n must be >= 1");
  if (counts.kind() == ResponseKind::binary) {
    const int k = counts.k();
    return static_cast<double>(std::min(k, n - k)) / n;
  }
  const int top = *std::max_element(counts.counts().begin(), counts.counts().end());
  return static_cast<double>(n - top) / n;
}

DomainEstimate domain_estimate(std::span<const ResponseCounts> samples) {
  if (samples.empty()) throw std::invalid_argument("domain_estimate: no samples");
  DomainEstimate est;
  est.kind = samples.front().kind();
  est.m = samples.size();
  est.per_prompt.reserve(samples.size());
  std::optional<int> common = samples.front().n();
  CompensatedSum<double> acc;
  for (const auto& s : samples) {
    if (s.kind() != est.kind) {
      throw std::invalid_argument("domain_estimate: mixed binary and multiclass samples");
    }
    if (common && s.n() != *common) common.reset();
    const double e = per_prompt_estimate(s);
    est.per_prompt.emplace_back(s.prompt_id(), e);
    acc += e;
  }
  est.value = acc.value() / static_cast<double>(samples.size());
  est.common_n = common;
  return est;
}

int majority_label(const ResponseCounts& counts) {
  const auto& c = counts.counts();
  return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
}

}  // namespace selfcons
