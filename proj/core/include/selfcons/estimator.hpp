#pragma once

// Plug-in self-consistency estimators and the ground-truth errors they
// target. A binary prompt is described by the probability of a positive
// response; a multiclass prompt by a probability vector over its labels.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace selfcons {

enum class ResponseKind { binary, multiclass };

const char* to_string(ResponseKind kind);

/// One prompt of a synthetic world: its response distribution and its
/// (unnormalized) sampling weight q(x).
class PromptSpec {
 public:
  static PromptSpec binary(std::string id, double p, double weight = 1.0);
  static PromptSpec multiclass(std::string id, std::vector<double> p_vec, double weight = 1.0);

  const std::string& id() const { return id_; }
  ResponseKind kind() const { return kind_; }
  /// Positive-response probability; binary prompts only.
  double p() const;
  /// Class probabilities; for binary prompts this is (1-p, p).
  const std::vector<double>& p_vec() const { return p_vec_; }
  std::size_t classes() const { return p_vec_.size(); }
  double weight() const { return weight_; }

 private:
  PromptSpec() = default;

  std::string id_;
  ResponseKind kind_ = ResponseKind::binary;
  std::vector<double> p_vec_;
  double weight_ = 1.0;
};

/// A finite prompt domain with sampling distribution q = weight / total.
/// All prompts share one kind and one class count.
class PromptDomain {
 public:
  explicit PromptDomain(std::vector<PromptSpec> prompts);

  std::span<const PromptSpec> prompts() const { return prompts_; }
  std::size_t size() const { return prompts_.size(); }
  const PromptSpec& operator[](std::size_t i) const { return prompts_[i]; }
  ResponseKind kind() const { return prompts_.front().kind(); }
  std::size_t classes() const { return prompts_.front().classes(); }

  double total_weight() const { return total_weight_; }
  double probability(std::size_t i) const { return prompts_[i].weight() / total_weight_; }
  /// Running sums of weights, last element == total_weight().
  std::span<const double> cumulative_weights() const { return cumulative_; }

 private:
  std::vector<PromptSpec> prompts_;
  std::vector<double> cumulative_;
  double total_weight_ = 0;
};

/// Observed responses for one prompt: k positives of n (binary) or a
/// per-class tally summing to n (multiclass).
class ResponseCounts {
 public:
  static ResponseCounts binary(std::string prompt_id, int k, int n);
  static ResponseCounts multiclass(std::string prompt_id, std::vector<int> counts);

  const std::string& prompt_id() const { return prompt_id_; }
  ResponseKind kind() const { return kind_; }
  int n() const { return n_; }
  /// Number of label-1 responses; binary only.
  int k() const;
  /// Per-class tally; binary counts are (n-k, k).
  const std::vector<int>& counts() const { return counts_; }

  friend bool operator==(const ResponseCounts&, const ResponseCounts&) = default;

 private:
  ResponseCounts() = default;

  std::string prompt_id_;
  ResponseKind kind_ = ResponseKind::binary;
  int n_ = 0;
  std::vector<int> counts_;
};

struct DomainEstimate {
  std::size_t m = 0;
  std::vector<std::pair<std::string, double>> per_prompt;
  double value = 0;
  ResponseKind kind = ResponseKind::binary;
  /// Set when every prompt received the same number of calls.
  std::optional<int> common_n;
};

/// min{p, 1-p} or 1 - max_c p_c.
double true_error(const PromptSpec& spec);

/// sum_x true_error(x) q(x).
double domain_true_error(const PromptDomain& domain);

/// min{k, n-k}/n or (n - max_c count_c)/n, each as a single division.
double per_prompt_estimate(const ResponseCounts& counts);

/// Mean of the per-prompt plug-ins, in input order. Mixed n is allowed;
/// mixed kinds are not.
DomainEstimate domain_estimate(std::span<const ResponseCounts> samples);

/// Most frequent label, ties broken toward the lowest class index.
int majority_label(const ResponseCounts& counts);

}  // namespace selfcons
