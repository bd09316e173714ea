// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "selfcons/binomial.hpp"
#include "selfcons/planner.hpp"
#include "selfcons/simulator.hpp"
#include "support/oracles.hpp"

#ifndef SELFCONS_SOURCE_DIR
#error "SELFCONS_SOURCE_DIR must point at the source tree"
#endif

using namespace selfcons;
namespace ref = selfcons::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double p_grid(int j) { return j / 100.0; }

ExperimentConfig make_config(std::vector<PromptSpec> prompts, int m, int n, std::int64_t R, std::uint64_t seed,
                             double rho = 0.0) {
  ExperimentConfig c{PromptDomain(std::move(prompts))};
  c.m = m;
  c.n = n;
  c.replicates = R;
  c.seed = seed;
  c.rho = rho;
  c.threads = 0;
  return c;
}

std::vector<PromptSpec> grid_domain(int count, double lo, double hi) {
  std::vector<PromptSpec> ps;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    ps.push_back(PromptSpec::binary("g" + std::to_string(i), lo + (hi - lo) * t));
  }
  return ps;
}

// 1 ---------------------------------------------------------------------------
Verdict bias_identity() {
  double worst = 0;
  long cases = 0;
  for (int n = 2; n <= 256; n += 2) {
    for (int j = 0; j <= 50; ++j) {
      worst = std::max(worst, std::abs(bias_tail_identity(n, p_grid(j)) - bias_exact(n, p_grid(j)).bias));
      ++cases;
    }
  }
  return {worst <= 1e-12, "max |tail - exact| = " + sci(worst) + " over " + std::to_string(cases) + " (n, p)"};
}

// 2 ---------------------------------------------------------------------------
Verdict bias_chain() {
  double worst_max = -1, worst_eq = 0, min_slack = 1;
  int witness = 0;
  for (int n = 2; n <= 10000; n += 2) {
    const double at_half = bias_exact(n, 0.5).bias;
    for (int j = 0; j < 50; ++j) worst_max = std::max(worst_max, bias_exact(n, p_grid(j)).bias - at_half);
    const auto b = bias_upper_bound(n);
    worst_eq = std::max(worst_eq, std::abs(at_half - 0.5 * central_binom_ratio(n)));
    const double slack = b.closed_form - b.central_term;
    if (slack < min_slack) {
      min_slack = slack;
      witness = n;
    }
  }
  const bool ok = worst_max <= 1e-12 && worst_eq <= 1e-12 && min_slack > 0;
  return {ok, "max_p bias - bias(1/2) = " + sci(worst_max) + ", |bias(1/2) - C/2| <= " + sci(worst_eq) +
                  ", min sqrt(1/(2 pi n)) - C/2 = " + sci(min_slack) + " at n=" + std::to_string(witness)};
}

// 3 ---------------------------------------------------------------------------
Verdict robbins() {
  Wide min_slack = 1;
  std::int64_t witness = 0;
  for (std::int64_t n = 1; n <= 10000; ++n) {
    const auto b = robbins_bounds(n);
    const Wide lf = log_factorial_wide(n);
    const Wide slack = std::min(lf - b.lower, b.upper - lf);
    if (slack < min_slack) {
      min_slack = slack;
      witness = n;
    }
  }
  return {min_slack > 0, "min slack " + sci(static_cast<double>(min_slack)) + " at n=" + std::to_string(witness)};
}

// 4 ---------------------------------------------------------------------------
Verdict variance() {
  double min_slack = 1;
  bool n1_zero = true;
  for (int n = 1; n <= 256; ++n) {
    for (int j = 0; j <= 100; ++j) {
      const double v = plugin_variance_exact(n, p_grid(j));
      min_slack = std::min(min_slack, 1.0 / (4.0 * n) - v);
      if (n == 1 && v != 0.0) n1_zero = false;
    }
  }
  return {min_slack >= 0 && n1_zero,
          "min 1/(4n) - Var = " + sci(min_slack) + (n1_zero ? ", n=1 variance exactly 0" : ", n=1 variance NOT 0")};
}

// 5 ---------------------------------------------------------------------------
Verdict oracle_battery() {
  std::mt19937_64 rng(0x0acc5e7);
  std::uniform_int_distribution<int> size(1, 4), mdist(1, 4), ndist(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0, disagreements = 0;
  double min_gap = 1, worst_disagree = 0;
  const int configs = 240;
  for (int c = 0; c < configs; ++c) {
    const int X = size(rng), m = mdist(rng), n = 2 * ndist(rng);
    std::vector<double> p, w;
    std::vector<PromptSpec> ps;
    for (int i = 0; i < X; ++i) {
      p.push_back(unit(rng));
      w.push_back(0.05 + unit(rng));
      ps.push_back(PromptSpec::binary("x" + std::to_string(i), p.back(), w.back()));
    }
    const double mse = exact_mse_oracle(PromptDomain(ps), m, n);
    const double bound = bound_value(m, n).total;
    min_gap = std::min(min_gap, bound - mse);
    if (!(mse <= bound)) ++violations;
    const double alt = static_cast<double>(ref::closed_form_mse(p, w, m, n));
    worst_disagree = std::max(worst_disagree, std::abs(alt - mse));
    if (std::abs(alt - mse) > 1e-12) ++disagreements;
  }
  return {violations == 0 && disagreements == 0,
          std::to_string(configs) + " configs, " + std::to_string(violations) + " violations, min bound - mse = " +
              sci(min_gap) + ", enumeration vs closed form <= " + sci(worst_disagree)};
}

// 6 ---------------------------------------------------------------------------
Verdict monte_carlo_vs_oracle() {
  struct Case {
    std::vector<double> p;
    std::vector<double> w;
    int m, n;
  };
  const std::vector<Case> cases{
      {{0.5}, {1}, 1, 2},
      {{0.3}, {1}, 2, 4},
      {{0.1, 0.6}, {1, 1}, 2, 2},
      {{0.2, 0.5, 0.9}, {1, 2, 1}, 3, 4},
      {{0.45, 0.55}, {3, 1}, 1, 6},
      {{0.05, 0.35, 0.5, 0.75}, {1, 1, 1, 1}, 2, 6},
      {{0.4}, {1}, 4, 8},
      {{0.25, 0.7}, {2, 5}, 3, 3},
      {{0.15, 0.5, 0.85}, {1, 1, 1}, 4, 2},
      {{0.0, 1.0, 0.5}, {1, 1, 2}, 2, 5},
  };
  double worst = 0;
  int fails = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::vector<PromptSpec> ps;
    for (std::size_t j = 0; j < cases[i].p.size(); ++j) {
      ps.push_back(PromptSpec::binary("x" + std::to_string(j), cases[i].p[j], cases[i].w[j]));
    }
    const auto cfg = make_config(ps, cases[i].m, cases[i].n, 100000, 600 + i);
    const auto rep = run_experiment(cfg);
    const double exact = exact_mse_oracle(cfg.domain, cases[i].m, cases[i].n);
    const double z = std::abs(rep.empirical_mse - exact) / rep.mse_std_err;
    worst = std::max(worst, z);
    if (!(z <= 4.0)) ++fails;
  }
  return {fails == 0, "10 configs at R=1e5, max |mc - exact| / SE = " + sci(worst)};
}

// 7 ---------------------------------------------------------------------------
Verdict reference_point() {
  const auto setup = cli::load_experiment_file(std::string(SELFCONS_SOURCE_DIR) + "/configs/reference.json");
  const auto& cfg = setup.config;
  const bool shape = cfg.domain.size() == 1 && cfg.domain[0].p() == 0.5 && cfg.m == 1 && cfg.n == 2 &&
                     cfg.replicates == 100000;
  const double exact = exact_mse_oracle(cfg.domain, 1, 2);
  const double bound = bound_value(1, 2).total;
  const double want_bound = 1.0 / 8 + 1.0 / (2 * std::numbers::pi) + 1.0 / 4;
  const auto rep = run_experiment(cfg);
  const bool ok = shape && std::abs(exact - 0.125) <= 1e-15 && std::abs(bound - want_bound) <= 1e-15 &&
                  std::abs(bound - 0.5342) < 5e-5 && std::abs(rep.empirical_mse - 0.125) <= 3 * rep.mse_std_err;
  return {ok, "exact " + sci(exact) + ", bound " + std::to_string(bound) + ", empirical " + sci(rep.empirical_mse) +
                  " +/- " + sci(rep.mse_std_err)};
}

// 8 ---------------------------------------------------------------------------
Verdict planner() {
  double worst_rel = 0;
  for (double B : {10.0, 100.0, 1e4, 1e6}) {
    const auto o = continuous_optimum(B);
    worst_rel = std::max(worst_rel, std::abs(o.m_star * o.n_star / B - 1));
    worst_rel = std::max(worst_rel, std::abs((o.m_star / o.n_star) / (std::numbers::pi / 8) - 1));
  }
  const auto p100 = exhaustive_plan(100, true);
  const bool b100 = p100.m == 7 && p100.n == 14 && std::abs(p100.bound.total - 0.0456956) < 5e-8;
  long dominated = 0, violations = 0;
  for (std::int64_t B = 1; B <= 10000; ++B) {
    for (bool even : {true, false}) {
      if (even && B < 2) continue;
      ++dominated;
      if (!(exhaustive_plan(B, even).bound.total <= rounded_plan(B, even).bound.total)) ++violations;
    }
  }
  const bool ok = worst_rel <= 1e-9 && b100 && violations == 0;
  return {ok, "product/ratio rel err " + sci(worst_rel) + "; B=100 -> (" + std::to_string(p100.m) + ", " +
                  std::to_string(p100.n) + ") bound " + std::to_string(p100.bound.total) + "; exhaustive <= rounded in " +
                  std::to_string(dominated - violations) + "/" + std::to_string(dominated) + " budgets"};
}

// 9 ---------------------------------------------------------------------------
Verdict correlation() {
  std::ostringstream detail;
  bool ok = true;
  for (double p : {0.5, 0.2}) {
    for (double rho : {0.25, 0.5, 0.75}) {
      const auto spec = PromptSpec::binary("c", p);
      const CorrelationModel model(rho);
      Engine rng = substream(0xc0441, static_cast<std::uint64_t>(rho * 100 + p * 10));
      const long pairs = 1'000'000;
      long both = 0, ones = 0;
      for (long i = 0; i < pairs; ++i) {
        const int k = sample_counts_correlated(spec, 2, model, rng).k();
        both += k == 2;
        ones += k;
      }
      const double mean = static_cast<double>(ones) / (2.0 * pairs);
      const double corr = (static_cast<double>(both) / pairs - mean * mean) / (mean * (1 - mean));
      ok = ok && std::abs(corr - rho) <= 0.02;
      detail << "rho " << rho << " p " << p << " -> " << sci(corr) << "; ";
    }
  }
  std::vector<double> mse, se;
  for (double rho : {0.0, 0.25, 0.5, 0.75}) {
    const auto rep = run_experiment(make_config(grid_domain(11, 0.05, 0.95), 8, 16, 20000, 909, rho));
    mse.push_back(rep.empirical_mse);
    se.push_back(rep.mse_std_err);
  }
  for (std::size_t i = 1; i < mse.size(); ++i) {
    ok = ok && mse[i] >= mse[i - 1] - 3 * std::hypot(se[i], se[i - 1]);
  }
  detail << "MSE over rho {0,.25,.5,.75}: " << sci(mse[0]) << ", " << sci(mse[1]) << ", " << sci(mse[2]) << ", "
         << sci(mse[3]);
  return {ok, detail.str()};
}

// 10 --------------------------------------------------------------------------
Verdict multiclass() {
  std::vector<PromptSpec> ps;
  Engine gen = substream(0x3c1a55, 0);
  for (int i = 0; i < 12; ++i) {
    std::vector<double> g(3);
    double total = 0;
    for (auto& x : g) total += (x = std::gamma_distribution<double>(1.0, 1.0)(gen));
    for (auto& x : g) x /= total;
    ps.push_back(PromptSpec::multiclass("d" + std::to_string(i), g));
  }
  bool ok = true;
  std::ostringstream detail;
  auto series = [&](const char* label, std::vector<std::pair<int, int>> splits) {
    std::vector<double> mse, se;
    for (auto [m, n] : splits) {
      const auto rep = run_experiment(make_config(ps, m, n, 20000, 1010));
      mse.push_back(rep.empirical_mse);
      se.push_back(rep.mse_std_err);
    }
    detail << label << ":";
    for (std::size_t i = 0; i < mse.size(); ++i) {
      detail << " " << sci(mse[i]);
      if (i > 0) ok = ok && mse[i] <= mse[i - 1] + 3 * std::hypot(se[i], se[i - 1]);
    }
    detail << "; ";
  };
  series("m doubling (n=4)", {{1, 4}, {2, 4}, {4, 4}, {8, 4}});
  series("n doubling (m=2)", {{2, 2}, {2, 4}, {2, 8}, {2, 16}});
  return {ok, detail.str()};
}

// 11 --------------------------------------------------------------------------
Verdict decomposition() {
  struct Case {
    std::vector<PromptSpec> domain;
    int m, n;
  };
  std::vector<Case> battery{
      {grid_domain(1, 0.5, 0.5), 1, 2},
      {grid_domain(11, 0.05, 0.95), 8, 16},
      {grid_domain(5, 0.3, 0.7), 2, 4},
      {grid_domain(21, 0.0, 1.0), 4, 10},
      {grid_domain(3, 0.45, 0.55), 16, 6},
  };
  bool ok = true;
  double worst_z = 0, worst_var_excess = -1;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    const auto rep = run_experiment(make_config(battery[i].domain, battery[i].m, battery[i].n, 100000, 1100 + i));
    const auto& d = *rep.decomposition;
    const double z = d.ab.std_err > 0 ? std::abs(d.ab.mean) / d.ab.std_err : (d.ab.mean == 0 ? 0 : 1e9);
    worst_z = std::max(worst_z, z);
    ok = ok && z <= 4.0;
    const double excess = d.tilde_variance - (d.tilde_variance_cap + 3 * d.tilde_variance_se);
    worst_var_excess = std::max(worst_var_excess, excess);
    ok = ok && excess <= 0;
  }
  return {ok, std::to_string(battery.size()) + " configs at R=1e5: max |mean ab| / SE = " + sci(worst_z) +
                  ", max Var(tilde) - (1/(16m) + 3 SE) = " + sci(worst_var_excess)};
}

// 12 --------------------------------------------------------------------------
Verdict determinism() {
  const std::string cfg = std::string(SELFCONS_SOURCE_DIR) + "/configs/grid_binary.json";
  auto capture = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    args.insert(args.begin(), "selfcons");
    const int code = cli::run(args, out, err);
    return std::make_pair(code, out.str());
  };
  bool ok = true;
  int runs = 0;
  for (const char* cmd : {"simulate", "sweep"}) {
    std::string first;
    for (const char* threads : {"1", "2", "4", "0", "1"}) {
      std::vector<std::string> args{cmd, "--config", cfg, "--seed", "424242", "--threads", threads};
      if (std::string(cmd) == "sweep") {
        args.push_back("--budget");
        args.push_back("96");
      }
      const auto [code, out] = capture(args);
      ++runs;
      ok = ok && code == 0 && !out.empty();
      if (first.empty()) first = out;
      ok = ok && out == first;
    }
  }
  return {ok, std::to_string(runs) + " simulate/sweep runs across thread counts {1,2,4,all,1}, outputs byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
    double time_limit_s;  // 0: none stated
  };
  const std::vector<Criterion> criteria{
      {1, "bias identity", bias_identity, 10},
      {2, "bias bound chain", bias_chain, 60},
      {3, "Robbins sandwich", robbins, 0},
      {4, "variance bound", variance, 0},
      {5, "MSE bound vs exact enumeration", oracle_battery, 60},
      {6, "Monte Carlo vs exact oracle", monte_carlo_vs_oracle, 0},
      {7, "reference point", reference_point, 0},
      {8, "budget planner", planner, 0},
      {9, "correlation model", correlation, 0},
      {10, "multiclass monotonicity", multiclass, 0},
      {11, "decomposition checks", decomposition, 0},
      {12, "determinism", determinism, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = v.pass;
    std::string timing = sci(secs) + " s";
    if (c.time_limit_s > 0) {
      timing += " (limit " + sci(c.time_limit_s) + " s)";
      pass = pass && secs < c.time_limit_s;
    }
    std::printf("[%s] %2d %-32s %s [%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), timing.c_str());
    std::fflush(stdout);
    failed += !pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
