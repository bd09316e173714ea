#pragma once

// Monte Carlo and brute-force checks of the estimator's mean squared error.
//
// Randomness: replicate r of a run with seed s draws only from
// substream(s, r), and per-replicate results are reduced in replicate order,
// so a report is bit-identical for any thread count.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "selfcons/estimator.hpp"
#include "selfcons/planner.hpp"

namespace selfcons {

using Engine = std::mt19937_64;

/// Independent engine for stream `stream` under `seed` (SplitMix64-mixed).
Engine substream(std::uint64_t seed, std::uint64_t stream);

struct BetaShape {
  double alpha = 0;
  double beta = 0;
};

/// Exchangeable calls with intraclass correlation rho, realized as a
/// beta-binomial: theta ~ Beta(p(1-rho)/rho, (1-p)(1-rho)/rho), then
/// k ~ Binomial(n, theta). rho = 0 is iid; rho = 1 makes all calls agree.
class CorrelationModel {
 public:
  explicit CorrelationModel(double rho = 0.0);

  double rho() const { return rho_; }
  bool iid() const { return rho_ == 0.0; }
  /// Requires 0 < rho < 1 and 0 < p < 1.
  BetaShape shape_for(double p) const;
  /// 1 / (alpha + beta + 1), the correlation between two calls.
  static double pairwise_correlation(BetaShape shape);
  std::string describe() const;

 private:
  double rho_;
};

std::size_t sample_prompt_index(const PromptDomain& domain, Engine& rng);
const PromptSpec& sample_prompt(const PromptDomain& domain, Engine& rng);

/// Binomial(n, p) or, for multiclass, Multinomial(n, p_vec) drawn as
/// sequential conditional binomials.
ResponseCounts sample_counts_iid(const PromptSpec& spec, int n, Engine& rng);

/// Binary prompts only.
ResponseCounts sample_counts_correlated(const PromptSpec& spec, int n,
                                        const CorrelationModel& model, Engine& rng);

struct ExperimentConfig {
  PromptDomain domain;
  int m = 1;
  int n = 1;
  std::int64_t replicates = 1;
  double rho = 0.0;
  std::uint64_t seed = 0;
  /// Worker threads; 0 picks the hardware concurrency. Does not affect results.
  unsigned threads = 1;

  void validate() const;
};

/// tilde_e = (1/m) sum E(x_i); a_i = E(x_i) - E[Ehat(x_i)];
/// b_i = E[Ehat(x_i)] - Ehat(x_i). E[Ehat] is the iid binomial expectation.
struct DecompositionTerms {
  double tilde_e = 0;
  std::vector<double> a;
  std::vector<double> b;
};

struct TrialOutcome {
  DomainEstimate estimate;
  double truth = 0;
  double sq_error = 0;
  /// Binary domains only.
  std::optional<DecompositionTerms> decomposition;
  std::vector<std::size_t> prompt_indices;
  std::vector<ResponseCounts> counts;
};

/// Per-run precomputation shared by all trials: the domain truth and each
/// prompt's true and expected plug-in error.
class TrialContext {
 public:
  explicit TrialContext(const ExperimentConfig& config);

  const ExperimentConfig& config() const { return *config_; }
  double truth() const { return truth_; }
  double prompt_error(std::size_t i) const { return prompt_error_[i]; }
  std::optional<double> expected_estimate(std::size_t i) const;
  const CorrelationModel& correlation() const { return correlation_; }

 private:
  const ExperimentConfig* config_;
  double truth_;
  std::vector<double> prompt_error_;
  std::vector<double> expected_estimate_;
  CorrelationModel correlation_;
};

TrialOutcome run_trial(const TrialContext& context, Engine& rng);
TrialOutcome run_trial(const ExperimentConfig& config, Engine& rng);

/// Summary row kept for every replicate.
struct ReplicateRecord {
  std::int64_t index = 0;
  double estimate = 0;
  double sq_error = 0;
  double abs_deviation = 0;
  double tilde_e = 0;
  double mean_ab = 0;  // (1/m) sum a_i b_i
  double max_a = 0;
};

struct MeanWithError {
  double mean = 0;
  double std_err = 0;
};

struct DecompositionSummary {
  MeanWithError ab;          // E[a_i b_i], zero in expectation
  MeanWithError tilde_e;     // unbiased for the domain truth
  double tilde_variance = 0;
  double tilde_variance_se = 0;
  double tilde_variance_cap = 0;  // 1/(16 m)
  double max_a = 0;
  std::optional<double> a_cap;    // sqrt(1/(2 pi n)), even n only
};

struct QuantilePoint {
  double level = 0;
  double value = 0;
};

struct ExperimentReport {
  std::string model;  // "iid" or "beta-binomial"
  double rho = 0;
  ResponseKind kind = ResponseKind::binary;
  std::size_t domain_size = 0;
  int m = 0;
  int n = 0;
  std::int64_t replicates = 0;
  std::uint64_t seed = 0;
  double true_error = 0;
  double empirical_mse = 0;
  double mse_std_err = 0;
  /// R = 1: the standard error is undefined and reported as 0.
  bool std_err_degenerate = false;
  double bias_of_estimate = 0;  // mean Ehat - E
  std::array<QuantilePoint, 3> deviation_quantiles{};  // |Ehat - E| at 0.5, 0.9, 0.99
  BoundBreakdown bound;
  bool bound_satisfied = false;  // mse <= bound + 3 SE
  /// The bound is a theorem only for iid binary calls.
  bool bound_enforced = false;
  std::optional<DecompositionSummary> decomposition;
};

struct ExperimentRun {
  ExperimentReport report;
  std::vector<ReplicateRecord> replicates;
};

ExperimentRun run_experiment_detailed(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Exact E[(E - Ehat)^2] by enumerating every prompt draw (|X|^m, weighted
/// by q) and every count outcome ((n+1)^m, weighted by the pmf). Binary
/// domains only; rejects enumerations above Tolerances::oracle_cells.
double exact_mse_oracle(const PromptDomain& domain, int m, int n);

struct Split {
  std::int64_t m = 0;
  std::int64_t n = 0;
};

/// One report per split in input order, all with the base config's seed.
std::vector<ExperimentReport> mse_sweep(std::int64_t budget, std::span<const Split> splits,
                                        const ExperimentConfig& base);

/// Type-7 (linear interpolation) sample quantile of an unsorted sample.
double sample_quantile(std::vector<double> values, double level);

}  // namespace selfcons
