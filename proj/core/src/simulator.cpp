#include "selfcons/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "selfcons/binomial.hpp"
#include "selfcons/numeric.hpp"

namespace selfcons {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int draw_binomial(int n, double p, Engine& rng) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<int>(n, p)(rng);
}

double draw_beta(BetaShape shape, Engine& rng) {
  const double x = std::gamma_distribution<double>(shape.alpha, 1.0)(rng);
  const double y = std::gamma_distribution<double>(shape.beta, 1.0)(rng);
  if (x + y > 0.0) return x / (x + y);
  // Both gammas underflowed (tiny shapes): theta is then essentially 0 or 1.
  const double u = std::generate_canonical<double, 53>(rng);
  return u < shape.alpha / (shape.alpha + shape.beta) ? 1.0 : 0.0;
}

}  // namespace

Engine substream(std::uint64_t seed, std::uint64_t stream) {
  return Engine(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

CorrelationModel::CorrelationModel(double rho) : rho_(rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("correlation rho must lie in [0, 1]");
  }
}

BetaShape CorrelationModel::shape_for(double p) const {
  if (!(rho_ > 0.0 && rho_ < 1.0) || !(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("beta shape needs 0 < rho < 1 and 0 < p < 1");
  }
  const double scale = (1.0 - rho_) / rho_;
  return {p * scale, (1.0 - p) * scale};
}

double CorrelationModel::pairwise_correlation(BetaShape shape) {
  return 1.0 / (shape.alpha + shape.beta + 1.0);
}

std::string CorrelationModel::describe() const {
  if (iid()) return "iid";
  std::ostringstream os;
  os << "beta-binomial (rho=" << rho_ << ")";
  return os.str();
}

std::size_t sample_prompt_index(const PromptDomain& domain, Engine& rng) {
  const auto cum = domain.cumulative_weights();
  const double u = std::generate_canonical<double, 53>(rng) * domain.total_weight();
  auto idx = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  if (idx >= cum.size()) {
    // u rounded up to the total; fall back to the last prompt with mass.
    idx = cum.size() - 1;
    while (idx > 0 && domain[idx].weight() == 0.0) --idx;
  }
  return idx;
}

const PromptSpec& sample_prompt(const PromptDomain& domain, Engine& rng) {
  return domain[sample_prompt_index(domain, rng)];
}

ResponseCounts sample_counts_iid(const PromptSpec& spec, int n, Engine& rng) {
  if (n < 1) throw std::invalid_argument("sample_counts_iid: n must be >= 1");
  if (spec.kind() == ResponseKind::binary) {
    return ResponseCounts::binary(spec.id(), draw_binomial(n, spec.p(), rng), n);
  }
  const auto& pv = spec.p_vec();
  const std::size_t c = pv.size();
  std::vector<double> suffix(c + 1, 0.0);
  for (std::size_t i = c; i-- > 0;) suffix[i] = suffix[i + 1] + pv[i];
  std::vector<int> counts(c, 0);
  int remaining = n;
  for (std::size_t i = 0; i + 1 < c && remaining > 0; ++i) {
    const double cond = suffix[i] > 0.0 ? std::clamp(pv[i] / suffix[i], 0.0, 1.0) : 0.0;
    counts[i] = draw_binomial(remaining, cond, rng);
    remaining -= counts[i];
  }
  counts[c - 1] += remaining;
  return ResponseCounts::multiclass(spec.id(), std::move(counts));
}

ResponseCounts sample_counts_correlated(const PromptSpec& spec, int n,
                                        const CorrelationModel& model, Engine& rng) {
  if (spec.kind() != ResponseKind::binary) {
    throw std::invalid_argument("correlated sampling supports binary prompts only");
  }
  if (n < 1) throw std::invalid_argument("sample_counts_correlated: n must be >= 1");
  if (model.iid()) return sample_counts_iid(spec, n, rng);
  const double p = spec.p();
  if (p <= 0.0 || p >= 1.0) return ResponseCounts::binary(spec.id(), p <= 0.0 ? 0 : n, n);
  if (model.rho() >= 1.0) {
    const bool all_positive = std::generate_canonical<double, 53>(rng) < p;
    return ResponseCounts::binary(spec.id(), all_positive ? n : 0, n);
  }
  const double theta = draw_beta(model.shape_for(p), rng);
  return ResponseCounts::binary(spec.id(), draw_binomial(n, theta, rng), n);
}

void ExperimentConfig::validate() const {
  if (m < 1) throw std::invalid_argument("experiment: m must be >= 1");
  if (n < 1) throw std::invalid_argument("experiment: n must be >= 1");
  if (replicates < 1) throw std::invalid_argument("experiment: replicates must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("experiment: rho must lie in [0, 1]");
  if (rho > 0.0 && domain.kind() != ResponseKind::binary) {
    throw std::invalid_argument("experiment: correlated calls are supported for binary domains only");
  }
}

TrialContext::TrialContext(const ExperimentConfig& config)
    : config_(&config), truth_(domain_true_error(config.domain)), correlation_(config.rho) {
  config.validate();
  const auto& domain = config.domain;
  prompt_error_.reserve(domain.size());
  for (const auto& spec : domain.prompts()) prompt_error_.push_back(true_error(spec));
  if (domain.kind() == ResponseKind::binary) {
    expected_estimate_.reserve(domain.size());
    for (const auto& spec : domain.prompts()) {
      expected_estimate_.push_back(expected_plugin_error(config.n, spec.p()));
    }
  }
}

std::optional<double> TrialContext::expected_estimate(std::size_t i) const {
  if (expected_estimate_.empty()) return std::nullopt;
  return expected_estimate_[i];
}

TrialOutcome run_trial(const TrialContext& context, Engine& rng) {
  const auto& cfg = context.config();
  TrialOutcome out;
  out.prompt_indices.reserve(cfg.m);
  out.counts.reserve(cfg.m);
  for (int i = 0; i < cfg.m; ++i) {
    const std::size_t idx = sample_prompt_index(cfg.domain, rng);
    out.prompt_indices.push_back(idx);
    out.counts.push_back(
        context.correlation().iid()
            ? sample_counts_iid(cfg.domain[idx], cfg.n, rng)
            : sample_counts_correlated(cfg.domain[idx], cfg.n, context.correlation(), rng));
  }
  out.estimate = domain_estimate(out.counts);
  out.truth = context.truth();
  const double dev = out.truth - out.estimate.value;
  out.sq_error = dev * dev;

  if (context.expected_estimate(0)) {
    DecompositionTerms d;
    d.a.reserve(cfg.m);
    d.b.reserve(cfg.m);
    CompensatedSum<double> tilde;
    for (int i = 0; i < cfg.m; ++i) {
      const std::size_t idx = out.prompt_indices[i];
      const double expected = *context.expected_estimate(idx);
      tilde += context.prompt_error(idx);
      d.a.push_back(context.prompt_error(idx) - expected);
      d.b.push_back(expected - out.estimate.per_prompt[i].second);
    }
    d.tilde_e = tilde.value() / cfg.m;
    out.decomposition = std::move(d);
  }
  return out;
}

TrialOutcome run_trial(const ExperimentConfig& config, Engine& rng) {
  const TrialContext context(config);
  return run_trial(context, rng);
}

double sample_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

ReplicateRecord summarize_trial(std::int64_t index, const TrialOutcome& t) {
  ReplicateRecord r;
  r.index = index;
  r.estimate = t.estimate.value;
  r.sq_error = t.sq_error;
  r.abs_deviation = std::abs(t.estimate.value - t.truth);
  if (t.decomposition) {
    const auto& d = *t.decomposition;
    r.tilde_e = d.tilde_e;
    CompensatedSum<double> ab;
    for (std::size_t i = 0; i < d.a.size(); ++i) {
      ab += d.a[i] * d.b[i];
      r.max_a = i == 0 ? d.a[i] : std::max(r.max_a, d.a[i]);
    }
    r.mean_ab = ab.value() / static_cast<double>(d.a.size());
  }
  return r;
}

template <typename Get>
MeanWithError mean_with_error(const std::vector<ReplicateRecord>& recs, Get get) {
  CompensatedSum<double> sum;
  for (const auto& r : recs) sum += get(r);
  const double count = static_cast<double>(recs.size());
  MeanWithError out;
  out.mean = sum.value() / count;
  if (recs.size() > 1) {
    CompensatedSum<double> ss;
    for (const auto& r : recs) {
      const double d = get(r) - out.mean;
      ss += d * d;
    }
    out.std_err = std::sqrt(ss.value() / (count - 1.0)) / std::sqrt(count);
  }
  return out;
}

DecompositionSummary summarize_decomposition(const std::vector<ReplicateRecord>& recs, int m,
                                             int n) {
  DecompositionSummary s;
  s.ab = mean_with_error(recs, [](const ReplicateRecord& r) { return r.mean_ab; });
  s.tilde_e = mean_with_error(recs, [](const ReplicateRecord& r) { return r.tilde_e; });
  const double count = static_cast<double>(recs.size());
  if (recs.size() > 1) {
    CompensatedSum<double> m2;
    CompensatedSum<double> m4;
    for (const auto& r : recs) {
      const double d = r.tilde_e - s.tilde_e.mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    s.tilde_variance = m2.value() / (count - 1.0);
    const double fourth = m4.value() / count;
    const double spread =
        fourth - s.tilde_variance * s.tilde_variance * (count - 3.0) / (count - 1.0);
    s.tilde_variance_se = std::sqrt(std::max(0.0, spread) / count);
  }
  s.tilde_variance_cap = 1.0 / (16.0 * m);
  for (const auto& r : recs) s.max_a = std::max(s.max_a, r.max_a);
  if (n % 2 == 0) s.a_cap = std::sqrt(1.0 / (2.0 * std::numbers::pi * n));
  return s;
}

void for_each_replicate(std::int64_t count, unsigned threads,
                        const std::function<void(std::int64_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, count));
  if (threads <= 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::int64_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(count, lo + chunk);
        for (std::int64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ExperimentRun run_experiment_detailed(const ExperimentConfig& config) {
  const TrialContext context(config);
  ExperimentRun run;
  run.replicates.resize(static_cast<std::size_t>(config.replicates));
  for_each_replicate(config.replicates, config.threads, [&](std::int64_t i) {
    Engine rng = substream(config.seed, static_cast<std::uint64_t>(i));
    run.replicates[static_cast<std::size_t>(i)] = summarize_trial(i, run_trial(context, rng));
  });

  auto& rep = run.report;
  const auto& recs = run.replicates;
  rep.model = context.correlation().iid() ? "iid" : "beta-binomial";
  rep.rho = config.rho;
  rep.kind = config.domain.kind();
  rep.domain_size = config.domain.size();
  rep.m = config.m;
  rep.n = config.n;
  rep.replicates = config.replicates;
  rep.seed = config.seed;
  rep.true_error = context.truth();

  const auto mse = mean_with_error(recs, [](const ReplicateRecord& r) { return r.sq_error; });
  rep.empirical_mse = mse.mean;
  rep.mse_std_err = mse.std_err;
  rep.std_err_degenerate = recs.size() < 2;
  rep.bias_of_estimate =
      mean_with_error(recs, [](const ReplicateRecord& r) { return r.estimate; }).mean -
      rep.true_error;

  std::vector<double> deviations;
  deviations.reserve(recs.size());
  for (const auto& r : recs) deviations.push_back(r.abs_deviation);
  std::sort(deviations.begin(), deviations.end());
  const std::array<double, 3> levels{0.5, 0.9, 0.99};
  for (std::size_t i = 0; i < levels.size(); ++i) {
    rep.deviation_quantiles[i] = {levels[i], sample_quantile(deviations, levels[i])};
  }

  rep.bound = bound_value(config.m, config.n);
  rep.bound_satisfied =
      rep.empirical_mse <= rep.bound.total + Tolerances::bound_margin_se * rep.mse_std_err;
  rep.bound_enforced = context.correlation().iid() && rep.kind == ResponseKind::binary;
  if (rep.kind == ResponseKind::binary) {
    rep.decomposition = summarize_decomposition(recs, config.m, config.n);
  }
  return run;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  return run_experiment_detailed(config).report;
}

double exact_mse_oracle(const PromptDomain& domain, int m, int n) {
  if (m < 1 || n < 1) throw std::invalid_argument("exact_mse_oracle: m and n must be >= 1");
  if (domain.kind() != ResponseKind::binary) {
    throw std::invalid_argument("exact_mse_oracle: binary domains only");
  }
  const double cells = std::pow(static_cast<double>(domain.size()), m) *
                       std::pow(static_cast<double>(n + 1), m);
  if (cells > Tolerances::oracle_cells) {
    throw std::invalid_argument("exact_mse_oracle: enumeration of " + std::to_string(cells) +
                                " cells exceeds the guard");
  }
  const std::size_t x = domain.size();
  const double truth = domain_true_error(domain);
  std::vector<std::vector<double>> pmf(x);
  for (std::size_t i = 0; i < x; ++i) pmf[i] = binom_pmf_row(n, domain[i].p());

  CompensatedSum<double> total;
  std::vector<std::size_t> draw(m, 0);
  std::vector<int> ks(m, 0);
  while (true) {
    double q = 1.0;
    for (int i = 0; i < m; ++i) q *= domain.probability(draw[i]);
    if (q > 0.0) {
      std::fill(ks.begin(), ks.end(), 0);
      while (true) {
        double prob = q;
        int mins = 0;
        for (int i = 0; i < m; ++i) {
          prob *= pmf[draw[i]][ks[i]];
          mins += std::min(ks[i], n - ks[i]);
        }
        if (prob > 0.0) {
          // Sum of the per-prompt plug-ins as one exact integer ratio.
          const double est = static_cast<double>(mins) / (static_cast<double>(n) * m);
          total += prob * (truth - est) * (truth - est);
        }
        int pos = 0;
        while (pos < m && ++ks[pos] > n) ks[pos++] = 0;
        if (pos == m) break;
      }
    }
    int pos = 0;
    while (pos < m && ++draw[pos] >= x) draw[pos++] = 0;
    if (pos == m) break;
  }
  return total.value();
}

std::vector<ExperimentReport> mse_sweep(std::int64_t budget, std::span<const Split> splits,
                                        const ExperimentConfig& base) {
  if (budget < 1) throw std::invalid_argument("mse_sweep: budget must be >= 1");
  for (const auto& s : splits) {
    if (s.m < 1 || s.n < 1 || s.m * s.n > budget) {
      throw std::invalid_argument("mse_sweep: split (" + std::to_string(s.m) + ", " +
                                  std::to_string(s.n) + ") violates m n <= " +
                                  std::to_string(budget));
    }
  }
  std::vector<ExperimentReport> out;
  out.reserve(splits.size());
  for (const auto& s : splits) {
    ExperimentConfig cfg = base;
    cfg.m = static_cast<int>(s.m);
    cfg.n = static_cast<int>(s.n);
    out.push_back(run_experiment(cfg));
  }
  return out;
}

}  // namespace selfcons
