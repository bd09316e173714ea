#include <cstdio>
#include <ostream>

#include "cli.hpp"

namespace selfcons::cli {

using nlohmann::json;

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json to_json(const BoundBreakdown& b) {
  return {{"m", b.m},
          {"n", b.n},
          {"term_prompt", b.term_prompt},
          {"term_bias", b.term_bias},
          {"term_cross", b.term_cross},
          {"total", b.total}};
}

json to_json(const BudgetPlan& plan) {
  return {{"budget", plan.budget},
          {"m_star", plan.m_star},
          {"n_star", plan.n_star},
          {"m", plan.m},
          {"n", plan.n},
          {"calls_used", plan.calls_used},
          {"method", to_string(plan.method)},
          {"require_even_n", plan.even_n},
          {"bound", to_json(plan.bound)}};
}

json to_json(const ExperimentReport& r) {
  json j;
  j["kind"] = "experiment_report";
  j["model"] = r.model;
  j["model_note"] = r.model == "iid"
                        ? "independent calls"
                        : "exchangeable beta-binomial calls with intraclass correlation rho";
  j["rho"] = r.rho;
  j["response_kind"] = to_string(r.kind);
  j["domain_size"] = r.domain_size;
  j["m"] = r.m;
  j["n"] = r.n;
  j["replicates"] = r.replicates;
  j["seed"] = r.seed;
  j["true_error"] = r.true_error;
  j["empirical_mse"] = r.empirical_mse;
  j["mse_std_err"] = r.mse_std_err;
  j["std_err_degenerate"] = r.std_err_degenerate;
  j["bias_of_estimate"] = r.bias_of_estimate;
  json q = json::object();
  for (const auto& pt : r.deviation_quantiles) {
    char key[16];
    std::snprintf(key, sizeof key, "%g", pt.level);
    q[key] = pt.value;
  }
  j["deviation_quantiles"] = q;
  j["bound"] = to_json(r.bound);
  j["bound_satisfied"] = r.bound_satisfied;
  j["bound_enforced"] = r.bound_enforced;
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    j["decomposition"] = {
        {"mean_ab", d.ab.mean},
        {"mean_ab_std_err", d.ab.std_err},
        {"tilde_mean", d.tilde_e.mean},
        {"tilde_mean_std_err", d.tilde_e.std_err},
        {"tilde_variance", d.tilde_variance},
        {"tilde_variance_std_err", d.tilde_variance_se},
        {"tilde_variance_cap", d.tilde_variance_cap},
        {"max_a", d.max_a},
        {"a_cap", d.a_cap ? json(*d.a_cap) : json(nullptr)},
        {"expectation_model", "iid binomial"}};
  } else {
    j["decomposition"] = nullptr;
  }
  return j;
}

json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_digest", m.config_digest},
          {"seed", m.seed},
          {"tool_version", m.tool_version},
          {"timestamp", m.timestamp}};
}

void write_replicate_csv(std::ostream& out, const std::vector<ReplicateRecord>& records) {
  out << "replicate,estimate,sq_error,abs_deviation,tilde_e,mean_ab,max_a\n";
  for (const auto& r : records) {
    out << r.index << ',' << format_real(r.estimate) << ',' << format_real(r.sq_error) << ','
        << format_real(r.abs_deviation) << ',' << format_real(r.tilde_e) << ','
        << format_real(r.mean_ab) << ',' << format_real(r.max_a) << '\n';
  }
}

}  // namespace selfcons::cli
