#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cli.hpp"
#include "selfcons/external_source.hpp"
#include "selfcons/sources.hpp"
#include "selfcons/verify.hpp"

namespace selfcons::cli {

using nlohmann::json;

namespace {

constexpr const char* kBoundLabel = "upper bound on the mean squared error of the estimate; not a confidence interval";

// Usage problems detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The source could not deliver usable data.
class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string command_line;
};

void write_text(const std::string& text, const std::string& path, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
  if (!f) throw UsageError("failed writing '" + path + "'");
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// Sidecar next to the primary output, or one line on stderr when the
// primary output goes to stdout.
void emit_manifest(const Context& ctx, const std::string& out_path, const RunManifest& m) {
  const json j = to_json(m);
  if (out_path.empty()) {
    ctx.err << "manifest: " << j.dump() << "\n";
  } else {
    write_text(pretty(j), out_path + ".manifest.json", ctx.err);
  }
}

std::optional<std::uint64_t> opt_seed(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() == 0) return std::nullopt;
  return value;
}

std::string fmt(double x, const char* spec = "%.10g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

void bound_table(std::ostream& os, const BoundBreakdown& b) {
  os << "  1/(8m)            " << fmt(b.term_prompt) << "\n"
     << "  1/(pi n)          " << fmt(b.term_bias) << "\n"
     << "  1/(2nm)           " << fmt(b.term_cross) << "\n"
     << "  total             " << fmt(b.total) << "\n";
}

// ---- plan -----------------------------------------------------------------

struct PlanArgs {
  std::int64_t budget = 0;
  std::string method = "exhaustive";
  bool even_n = true;
  std::string format = "table";
  std::string out;
};

int cmd_plan(const Context& ctx, const PlanArgs& a) {
  if (a.budget < 1) throw UsageError("--budget must be a positive integer");
  if (a.even_n && a.budget < 2) throw UsageError("--budget must be at least 2 when n must be even (use --no-even-n)");
  const auto method = a.method == "rounded" ? PlanMethod::rounded : PlanMethod::exhaustive;
  const BudgetPlan plan = integer_plan(a.budget, a.even_n, method);

  std::string text;
  if (a.format == "json") {
    json j{{"kind", "plan"}};
    j.update(to_json(plan));
    text = pretty(j);
  } else {
    std::ostringstream os;
    os << "budget B          " << plan.budget << "\n"
       << "continuous m*     " << fmt(plan.m_star) << "\n"
       << "continuous n*     " << fmt(plan.n_star) << "\n"
       << "method            " << to_string(plan.method) << (plan.even_n ? ", even n" : ", any n") << "\n"
       << "plan              m=" << plan.m << " n=" << plan.n << " (" << plan.calls_used << " calls)\n"
       << "MSE bound at plan\n";
    bound_table(os, plan.bound);
    text = os.str();
  }
  write_text(text, a.out, ctx.out);
  json digest_src{{"budget", a.budget}, {"method", to_string(method)}, {"require_even_n", a.even_n}};
  if (!a.out.empty()) emit_manifest(ctx, a.out, make_manifest(ctx.command_line, digest_hex(digest_src.dump()), 0));
  return kExitOk;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::optional<unsigned> threads;
  std::string out;
  std::string csv;
  std::string emit_replay;
  std::string format = "json";
};

void report_table(std::ostream& os, const ExperimentReport& r) {
  os << "model             " << r.model;
  if (r.model != "iid") os << " (rho=" << fmt(r.rho) << ")";
  os << "\n"
     << "responses         " << to_string(r.kind) << ", |X|=" << r.domain_size << "\n"
     << "split             m=" << r.m << " n=" << r.n << ", replicates=" << r.replicates << "\n"
     << "seed              " << r.seed << "\n"
     << "true error E      " << fmt(r.true_error) << "\n"
     << "empirical MSE     " << fmt(r.empirical_mse) << " +/- " << fmt(r.mse_std_err)
     << (r.std_err_degenerate ? " (single replicate)" : "") << "\n"
     << "bias of estimate  " << fmt(r.bias_of_estimate) << "\n";
  for (const auto& q : r.deviation_quantiles) {
    os << "|dev| q" << fmt(q.level, "%-11g") << fmt(q.value) << "\n";
  }
  os << "MSE bound\n";
  bound_table(os, r.bound);
  os << "bound satisfied   " << (r.bound_satisfied ? "yes" : "no")
     << (r.bound_enforced ? "" : " (reported only; not a theorem for this model)") << "\n";
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    os << "mean a*b          " << fmt(d.ab.mean) << " +/- " << fmt(d.ab.std_err) << "\n"
       << "Var(tilde E)      " << fmt(d.tilde_variance) << " +/- " << fmt(d.tilde_variance_se)
       << " (cap " << fmt(d.tilde_variance_cap) << ")\n"
       << "max a             " << fmt(d.max_a);
    if (d.a_cap) os << " (cap " << fmt(*d.a_cap) << ")";
    os << "\n";
  }
}

int cmd_simulate(const Context& ctx, const SimulateArgs& a) {
  ExperimentSetup setup = load_experiment_file(a.config, opt_seed(a.seed_opt, a.seed));
  if (!setup.has_split) throw ConfigError("config field 'm': missing (simulate needs m and n)");
  if (a.threads) setup.config.threads = *a.threads;
  ctx.err << "seed: " << setup.config.seed << " (" << setup.seed_origin << ")\n";

  const ExperimentRun run = run_experiment_detailed(setup.config);
  const ExperimentReport& r = run.report;

  if (a.format == "table") {
    std::ostringstream os;
    report_table(os, r);
    write_text(os.str(), a.out, ctx.out);
  } else {
    write_text(pretty(to_json(r)), a.out, ctx.out);
  }
  if (!a.csv.empty()) {
    std::ostringstream os;
    write_replicate_csv(os, run.replicates);
    write_text(os.str(), a.csv, ctx.err);
  }
  if (!a.emit_replay.empty()) {
    const TrialContext trial_ctx(setup.config);
    Engine rng = substream(setup.config.seed, 0);
    const TrialOutcome trial = run_trial(trial_ctx, rng);
    std::vector<ReplayRecord> records;
    for (const auto& c : trial.counts) records.push_back(record_from_counts(c));
    write_replay(std::filesystem::path(a.emit_replay), records);
  }
  emit_manifest(ctx, a.out, make_manifest(ctx.command_line, setup.digest, setup.config.seed));

  if (r.bound_enforced && !r.bound_satisfied) {
    ctx.err << "finding: empirical MSE " << format_real(r.empirical_mse) << " exceeds bound "
            << format_real(r.bound.total) << " by more than 3 standard errors\n";
    return kExitBoundViolation;
  }
  return kExitOk;
}

// ---- verify ---------------------------------------------------------------

struct VerifyArgs {
  int max_n = 256;
  double grid_step = 0.01;
  std::string format = "table";
  std::string out;
};

int cmd_verify(const Context& ctx, const VerifyArgs& a) {
  if (a.max_n < 2) throw UsageError("--max-n must be at least 2");
  const InvariantReport rep = run_invariant_battery(a.max_n, a.grid_step);

  std::string text;
  if (a.format == "json") {
    json checks = json::array();
    for (const auto& c : rep.checks) {
      checks.push_back({{"name", c.name},
                        {"relation", c.relation},
                        {"worst", c.worst},
                        {"witness_n", c.witness_n},
                        {"witness_p", c.witness_p ? json(*c.witness_p) : json(nullptr)},
                        {"cases", c.cases},
                        {"passed", c.passed}});
    }
    text = pretty({{"kind", "verify_report"},
                   {"max_n", rep.max_n},
                   {"grid_step", rep.grid_step},
                   {"all_passed", rep.all_passed()},
                   {"checks", checks}});
  } else {
    std::ostringstream os;
    os << "invariants for n <= " << rep.max_n << ", p step " << fmt(rep.grid_step) << "\n";
    char line[200];
    std::snprintf(line, sizeof line, "%-31s %-10s %-24s %-16s %10s  %s\n", "check", "relation", "worst",
                  "witness", "cases", "result");
    os << line;
    for (const auto& c : rep.checks) {
      std::string witness = "n=" + std::to_string(c.witness_n);
      if (c.witness_p) witness += " p=" + fmt(*c.witness_p, "%g");
      std::snprintf(line, sizeof line, "%-31s %-10s %-24s %-16s %10lld  %s\n", c.name.c_str(),
                    c.relation.c_str(), format_real(c.worst).c_str(), witness.c_str(), c.cases,
                    c.passed ? "PASS" : "FAIL");
      os << line;
    }
    os << (rep.all_passed() ? "all checks passed" : "some checks FAILED") << "\n";
    text = os.str();
  }
  write_text(text, a.out, ctx.out);
  json digest_src{{"max_n", a.max_n}, {"grid_step", a.grid_step}};
  if (!a.out.empty()) emit_manifest(ctx, a.out, make_manifest(ctx.command_line, digest_hex(digest_src.dump()), 0));
  return rep.all_passed() ? kExitOk : kExitBoundViolation;
}

// ---- estimate -------------------------------------------------------------

struct EstimateArgs {
  std::string replay;
  std::string external;
  int classes = 2;
  std::vector<std::string> prompts;
  std::string prompts_file;
  int draws = 0;
  int timeout_ms = 5000;
  int retries = 2;
  int window = 8;
  std::vector<std::string> subsample;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string record;
  std::string format = "table";
  std::string out;
};

struct Subsample {
  std::optional<std::int64_t> m;
  std::optional<std::int64_t> n;
};

Subsample parse_subsample(const std::vector<std::string>& tokens) {
  Subsample s;
  for (const auto& t : tokens) {
    const auto eq = t.find('=');
    const std::string key = t.substr(0, eq);
    std::int64_t value = 0;
    bool ok = eq != std::string::npos && (key == "m" || key == "n");
    if (ok) {
      try {
        std::size_t used = 0;
        value = std::stoll(t.substr(eq + 1), &used);
        ok = used == t.size() - eq - 1 && value >= 1;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) throw UsageError("--subsample expects m=<count> and/or n=<count>, got '" + t + "'");
    (key == "m" ? s.m : s.n) = value;
  }
  return s;
}

std::vector<std::string> read_prompt_ids(const EstimateArgs& a) {
  std::vector<std::string> ids = a.prompts;
  if (!a.prompts_file.empty()) {
    std::ifstream in(a.prompts_file);
    if (!in) throw UsageError("cannot open prompts file '" + a.prompts_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
  }
  if (ids.empty()) throw UsageError("--external needs prompt ids (--prompts or --prompts-file)");
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw UsageError("duplicate prompt id '" + id + "'");
  }
  return ids;
}

// Prompts drawn without replacement, then calls without replacement within
// each prompt; both keep file order.
std::vector<ReplayRecord> apply_subsample(std::vector<ReplayRecord> records, const Subsample& s,
                                          std::uint64_t seed) {
  if (s.m) {
    if (*s.m > static_cast<std::int64_t>(records.size())) {
      throw UsageError("--subsample m=" + std::to_string(*s.m) + " exceeds the " +
                       std::to_string(records.size()) + " available prompts");
    }
    std::vector<ReplayRecord> chosen;
    Engine rng = substream(seed, 0);
    std::sample(records.begin(), records.end(), std::back_inserter(chosen), *s.m, rng);
    records = std::move(chosen);
  }
  if (s.n) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto& rec = records[i];
      if (*s.n > static_cast<std::int64_t>(rec.responses.size())) {
        throw UsageError("--subsample n=" + std::to_string(*s.n) + " exceeds the " +
                         std::to_string(rec.responses.size()) + " responses of prompt '" +
                         rec.prompt_id + "'");
      }
      std::vector<int> kept;
      Engine rng = substream(seed, 1 + i);
      std::sample(rec.responses.begin(), rec.responses.end(), std::back_inserter(kept), *s.n, rng);
      rec.responses = std::move(kept);
    }
  }
  return records;
}

int cmd_estimate(const Context& ctx, const EstimateArgs& a) {
  if (a.replay.empty() == a.external.empty()) throw UsageError("give exactly one of --replay or --external");
  if (a.classes < 2) throw UsageError("--classes must be at least 2");
  const Subsample sub = parse_subsample(a.subsample);
  const bool subsampling = sub.m || sub.n;

  std::vector<ReplayRecord> records;
  std::vector<PromptFailure> failures;
  json source;
  if (!a.replay.empty()) {
    records = open_replay(a.replay, a.classes);
    source = {{"type", "replay"}, {"path", a.replay}};
  } else {
    if (a.draws < 1) throw UsageError("--external needs --draws >= 1");
    if (a.timeout_ms < 1 || a.retries < 0 || a.window < 1) {
      throw UsageError("--timeout-ms and --window must be positive, --retries nonnegative");
    }
    const auto ids = read_prompt_ids(a);
    const auto argv = split_command(a.external);
    if (argv.empty()) throw UsageError("--external command is empty");
    ExternalSourceOptions opts;
    opts.timeout = std::chrono::milliseconds(a.timeout_ms);
    opts.retries = a.retries;
    opts.window = static_cast<std::size_t>(a.window);
    opts.classes = a.classes;
    ExternalSource src(argv, opts);
    CollectionResult got = src.collect(ids, a.draws);
    records = std::move(got.records);
    failures = std::move(got.failures);
    source = {{"type", "external"}, {"command", a.external}, {"draws", a.draws}, {"requested_prompts", ids.size()}};
    if (!a.record.empty()) write_replay(std::filesystem::path(a.record), records);
  }
  for (const auto& f : failures) {
    ctx.err << "warning: prompt '" << f.prompt_id << "' failed after " << f.draws_completed
            << " draws (" << f.reason << "); excluded from the estimate\n";
  }
  if (records.empty()) throw SourceError("the source delivered no usable prompts");

  std::optional<std::uint64_t> seed_used;
  if (subsampling) {
    const SeedChoice seed = resolve_seed(opt_seed(a.seed_opt, a.seed), std::nullopt);
    ctx.err << "seed: " << seed.value << " (" << seed.origin << ")\n";
    seed_used = seed.value;
    records = apply_subsample(std::move(records), sub, seed.value);
  }

  std::vector<ResponseCounts> counts;
  counts.reserve(records.size());
  for (const auto& r : records) counts.push_back(counts_from_record(r, a.classes));
  const DomainEstimate est = domain_estimate(counts);

  std::optional<BoundBreakdown> bound;
  std::string bound_note;
  if (est.kind != ResponseKind::binary) {
    bound_note = "bound not reported: it covers binary responses only";
  } else if (!est.common_n) {
    bound_note = "bound not reported: prompts received different numbers of calls";
    ctx.err << "warning: ragged n across prompts; MSE bound suppressed\n";
  } else if (*est.common_n % 2 != 0) {
    bound_note = "bound not reported: it covers even n only";
  } else {
    bound = bound_value(static_cast<std::int64_t>(est.m), *est.common_n);
    if (!failures.empty()) bound_note = "bound evaluated at the effective m after failed prompts were excluded";
  }

  std::string text;
  if (a.format == "json") {
    json per = json::array();
    for (std::size_t i = 0; i < est.per_prompt.size(); ++i) {
      per.push_back({{"prompt_id", est.per_prompt[i].first},
                     {"estimate", est.per_prompt[i].second},
                     {"n", counts[i].n()}});
    }
    json fail = json::array();
    for (const auto& f : failures) {
      fail.push_back({{"prompt_id", f.prompt_id}, {"reason", f.reason}, {"draws_completed", f.draws_completed}});
    }
    json j{{"kind", "estimate_report"},
           {"source", source},
           {"classes", a.classes},
           {"response_kind", to_string(est.kind)},
           {"m", est.m},
           {"n", est.common_n ? json(*est.common_n) : json(nullptr)},
           {"estimate", est.value},
           {"per_prompt", per},
           {"bound", bound ? to_json(*bound) : json(nullptr)},
           {"bound_label", kBoundLabel},
           {"bound_note", bound_note.empty() ? json(nullptr) : json(bound_note)},
           {"failures", fail}};
    j["subsample"] = subsampling ? json{{"m", sub.m ? json(*sub.m) : json(nullptr)},
                                        {"n", sub.n ? json(*sub.n) : json(nullptr)},
                                        {"seed", *seed_used}}
                                 : json(nullptr);
    text = pretty(j);
  } else {
    std::ostringstream os;
    os << "estimate          " << format_real(est.value) << "\n"
       << "prompts m         " << est.m << "\n"
       << "calls per prompt  " << (est.common_n ? std::to_string(*est.common_n) : std::string("ragged")) << "\n"
       << "per-prompt estimates\n";
    for (const auto& [id, v] : est.per_prompt) os << "  " << id << "  " << format_real(v) << "\n";
    if (bound) {
      os << "MSE bound at m=" << bound->m << " n=" << bound->n << " (" << kBoundLabel << ")\n";
      bound_table(os, *bound);
    }
    if (!bound_note.empty()) os << bound_note << "\n";
    if (!failures.empty()) os << failures.size() << " prompt(s) failed and were excluded\n";
    text = os.str();
  }
  write_text(text, a.out, ctx.out);

  json digest_src{{"source", source}, {"classes", a.classes}};
  if (subsampling) digest_src["subsample"] = {{"m", sub.m.value_or(0)}, {"n", sub.n.value_or(0)}, {"seed", *seed_used}};
  if (!a.out.empty()) {
    emit_manifest(ctx, a.out, make_manifest(ctx.command_line, digest_hex(digest_src.dump()), seed_used.value_or(0)));
  }
  return kExitOk;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  std::int64_t budget = 0;
  std::string splits = "auto";
  bool even_n = true;
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::optional<unsigned> threads;
  std::string out;
  std::string csv;
};

struct SweepRow {
  std::string label;
  Split split;
};

std::vector<SweepRow> parse_splits(const std::string& spec, std::int64_t budget) {
  std::vector<SweepRow> rows;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    std::int64_t m = 0, n = 0;
    bool ok = x != std::string::npos;
    if (ok) {
      try {
        std::size_t um = 0, un = 0;
        m = std::stoll(item.substr(0, x), &um);
        n = std::stoll(item.substr(x + 1), &un);
        ok = um == x && un == item.size() - x - 1 && m >= 1 && n >= 1;
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) throw UsageError("--splits: '" + item + "' is not of the form <m>x<n> with positive integers");
    if (m > budget / n) {
      throw UsageError("--splits: " + item + " needs " + std::to_string(m * n) + " calls, over the budget of " +
                       std::to_string(budget));
    }
    rows.push_back({"custom", {m, n}});
  }
  if (rows.empty()) throw UsageError("--splits is empty");
  return rows;
}

int cmd_sweep(const Context& ctx, const SweepArgs& a) {
  if (a.budget < 1) throw UsageError("--budget must be a positive integer");
  if (a.even_n && a.budget < 2) throw UsageError("--budget must be at least 2 when n must be even (use --no-even-n)");
  const BudgetPlan planner = exhaustive_plan(a.budget, a.even_n);

  std::vector<SweepRow> rows;
  if (a.splits == "auto") {
    const BudgetPlan rounded = rounded_plan(a.budget, a.even_n);
    rows = {{"planner", {planner.m, planner.n}},
            {"rounded", {rounded.m, rounded.n}},
            {"one_prompt", {1, a.budget}},
            {"one_call", {a.budget, 1}}};
  } else {
    rows = parse_splits(a.splits, a.budget);
    bool found = false;
    for (auto& r : rows) {
      if (r.split.m == planner.m && r.split.n == planner.n) {
        r.label = "planner";
        found = true;
      }
    }
    if (!found) rows.push_back({"planner", {planner.m, planner.n}});
  }

  ExperimentSetup setup = load_experiment_file(a.config, opt_seed(a.seed_opt, a.seed));
  if (a.threads) setup.config.threads = *a.threads;
  ctx.err << "seed: " << setup.config.seed << " (" << setup.seed_origin << ")\n";

  std::vector<Split> splits;
  for (const auto& r : rows) splits.push_back(r.split);
  const auto reports = mse_sweep(a.budget, splits, setup.config);

  json jrows = json::array();
  std::ostringstream csv;
  csv << "label,m,n,calls_used,term_prompt,term_bias,term_cross,bound_total,empirical_mse,mse_std_err,"
         "bound_satisfied,bound_enforced\n";
  bool violated = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = reports[i];
    const auto calls = rows[i].split.m * rows[i].split.n;
    jrows.push_back({{"label", rows[i].label},
                     {"m", rows[i].split.m},
                     {"n", rows[i].split.n},
                     {"calls_used", calls},
                     {"bound", to_json(r.bound)},
                     {"true_error", r.true_error},
                     {"empirical_mse", r.empirical_mse},
                     {"mse_std_err", r.mse_std_err},
                     {"bias_of_estimate", r.bias_of_estimate},
                     {"bound_satisfied", r.bound_satisfied},
                     {"bound_enforced", r.bound_enforced}});
    csv << rows[i].label << ',' << rows[i].split.m << ',' << rows[i].split.n << ',' << calls << ','
        << format_real(r.bound.term_prompt) << ',' << format_real(r.bound.term_bias) << ','
        << format_real(r.bound.term_cross) << ',' << format_real(r.bound.total) << ','
        << format_real(r.empirical_mse) << ',' << format_real(r.mse_std_err) << ','
        << (r.bound_satisfied ? "true" : "false") << ',' << (r.bound_enforced ? "true" : "false") << '\n';
    violated = violated || (r.bound_enforced && !r.bound_satisfied);
  }
  const json j{{"kind", "sweep_report"},
               {"budget", a.budget},
               {"require_even_n", a.even_n},
               {"seed", setup.config.seed},
               {"replicates", setup.config.replicates},
               {"rho", setup.config.rho},
               {"planner", {{"m", planner.m}, {"n", planner.n}}},
               {"rows", jrows}};
  write_text(pretty(j), a.out, ctx.out);
  if (!a.csv.empty()) write_text(csv.str(), a.csv, ctx.err);

  json digest_src = setup.resolved;
  digest_src.erase("m");
  digest_src.erase("n");
  digest_src["budget"] = a.budget;
  digest_src["splits"] = json::array();
  for (const auto& r : rows) digest_src["splits"].push_back({r.split.m, r.split.n});
  emit_manifest(ctx, a.out, make_manifest(ctx.command_line, digest_hex(digest_src.dump()), setup.config.seed));

  if (violated) {
    ctx.err << "finding: at least one split has empirical MSE above its bound by more than 3 standard errors\n";
    return kExitBoundViolation;
  }
  return kExitOk;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s = "selfcons";
  for (std::size_t i = 1; i < args.size(); ++i) s += " " + args[i];
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-consistency error estimation: budget planning, simulation, bound checks, estimation."};
  app.name("selfcons");
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);

  const auto formats = CLI::IsMember({"table", "json"});

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Split a call budget between prompts and calls per prompt");
  p->add_option("--budget,-B", plan.budget, "Total number of calls B")->required();
  p->add_option("--method", plan.method, "exhaustive or rounded")
      ->check(CLI::IsMember({"exhaustive", "rounded"}))
      ->capture_default_str();
  p->add_flag("--even-n,!--no-even-n", plan.even_n, "Restrict n to even values (default on)");
  p->add_option("--format", plan.format, "table or json")->check(formats)->capture_default_str();
  p->add_option("--out,-o", plan.out, "Write output here instead of stdout");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Monte Carlo estimate of the estimator's MSE against the bound");
  s->add_option("--config,-c", sim.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim.seed_opt = s->add_option("--seed", sim.seed, "Top-level seed (overrides config and SELFCONS_SEED)");
  s->add_option("--threads", sim.threads, "Worker threads, 0 = all cores (results do not depend on it)");
  s->add_option("--out,-o", sim.out, "Report path (default stdout)");
  s->add_option("--csv", sim.csv, "Per-replicate CSV path");
  s->add_option("--emit-replay", sim.emit_replay, "Write replicate 0's draws as a replay file");
  s->add_option("--format", sim.format, "json or table")->check(formats)->capture_default_str();

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Check the analytic inequalities by exact enumeration");
  v->add_option("--max-n", ver.max_n, "Largest n checked")->capture_default_str();
  v->add_option("--grid-step", ver.grid_step, "Spacing of the p grid")->capture_default_str();
  v->add_option("--format", ver.format, "table or json")->check(formats)->capture_default_str();
  v->add_option("--out,-o", ver.out, "Write output here instead of stdout");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate the domain error from recorded or live responses");
  auto* replay_opt = e->add_option("--replay", est.replay, "Replay file (one JSON record per line)");
  auto* ext_opt = e->add_option("--external", est.external, "Command of a process speaking the label protocol");
  replay_opt->excludes(ext_opt);
  e->add_option("--classes", est.classes, "Number of labels")->capture_default_str();
  e->add_option("--prompts", est.prompts, "Prompt ids for --external")->delimiter(',');
  e->add_option("--prompts-file", est.prompts_file, "File with one prompt id per line")->check(CLI::ExistingFile);
  e->add_option("--draws", est.draws, "Calls per prompt for --external");
  e->add_option("--timeout-ms", est.timeout_ms, "Per-call timeout")->capture_default_str();
  e->add_option("--retries", est.retries, "Re-sends per call after a timeout")->capture_default_str();
  e->add_option("--window", est.window, "Requests in flight at once")->capture_default_str();
  e->add_option("--subsample", est.subsample, "m=<prompts> and/or n=<calls per prompt>")->expected(1, 2);
  est.seed_opt = e->add_option("--seed", est.seed, "Seed for --subsample");
  e->add_option("--record", est.record, "Save responses from --external as a replay file");
  e->add_option("--format", est.format, "table or json")->check(formats)->capture_default_str();
  e->add_option("--out,-o", est.out, "Write output here instead of stdout");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Empirical MSE across budget splits");
  w->add_option("--budget,-B", sw.budget, "Total number of calls B")->required();
  w->add_option("--splits", sw.splits, "auto, or a list like 7x14,1x100")->capture_default_str();
  w->add_flag("--even-n,!--no-even-n", sw.even_n, "Planner restricts n to even values (default on)");
  w->add_option("--config,-c", sw.config, "Experiment config (JSON); m and n are ignored")
      ->required()
      ->check(CLI::ExistingFile);
  sw.seed_opt = w->add_option("--seed", sw.seed, "Top-level seed");
  w->add_option("--threads", sw.threads, "Worker threads, 0 = all cores");
  w->add_option("--out,-o", sw.out, "JSON path (default stdout)");
  w->add_option("--csv", sw.csv, "CSV path");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    for (auto* sub : app.get_subcommands()) {
      err << "run 'selfcons " << sub->get_name() << " --help' for usage\n";
    }
    return kExitUsage;
  }

  const Context ctx{out, err, join_args(args)};
  try {
    if (p->parsed()) return cmd_plan(ctx, plan);
    if (s->parsed()) return cmd_simulate(ctx, sim);
    if (v->parsed()) return cmd_verify(ctx, ver);
    if (e->parsed()) return cmd_estimate(ctx, est);
    if (w->parsed()) return cmd_sweep(ctx, sw);
  } catch (const SourceFailure& ex) {
    err << "source failure: " << ex.what() << "\n";
    for (const auto& f : ex.failures()) {
      err << "  prompt '" << f.prompt_id << "': " << f.reason << " (" << f.draws_completed << " draws completed)\n";
    }
    return kExitSourceFailure;
  } catch (const ProtocolError& ex) {
    err << "source protocol error: " << ex.what() << "\n";
    return kExitSourceFailure;
  } catch (const ReplayError& ex) {
    err << "replay error: " << ex.what() << "\n";
    return kExitSourceFailure;
  } catch (const SourceError& ex) {
    err << "source failure: " << ex.what() << "\n";
    return kExitSourceFailure;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace selfcons::cli
