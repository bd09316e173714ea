#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>

#include "cli.hpp"

namespace selfcons::cli {

using nlohmann::json;

const char* tool_version() { return SELFCONS_VERSION; }

std::string digest_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

RunManifest make_manifest(std::string command, std::string digest, std::uint64_t seed) {
  RunManifest m;
  m.command = std::move(command);
  m.config_digest = std::move(digest);
  m.seed = seed;
  m.tool_version = tool_version();
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  m.timestamp = buf;
  return m;
}

SeedChoice resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config) {
  if (flag) return {*flag, "flag"};
  if (config) return {*config, "config"};
  if (const char* env = std::getenv(kSeedEnvVar); env && *env) {
    try {
      std::size_t used = 0;
      const auto value = std::stoull(env, &used);
      if (used == std::string(env).size()) return {value, "environment"};
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string(kSeedEnvVar) + " must be an unsigned integer, got '" + env + "'");
  }
  std::random_device rd;
  const std::uint64_t value = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return {value, "generated"};
}

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError("config field '" + path + key + "': missing");
  return obj.at(key);
}

double number_at(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) throw ConfigError("config field '" + path + key + "': must be a number");
  return v.get<double>();
}

std::int64_t positive_int_at(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
    throw ConfigError("config field '" + path + key + "': must be a positive integer");
  }
  return v.get<std::int64_t>();
}

std::optional<std::uint64_t> seed_at(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) return std::nullopt;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config field '" + path + key + "': must be an unsigned integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<double> weights_at(const json& gen, std::size_t count, const std::string& path) {
  std::vector<double> w(count, 1.0);
  if (!gen.contains("weights")) return w;
  const auto& arr = gen.at("weights");
  if (!arr.is_array() || arr.size() != count) {
    throw ConfigError("config field '" + path + "weights': must be an array of " +
                      std::to_string(count) + " numbers");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!arr[i].is_number()) throw ConfigError("config field '" + path + "weights': must hold numbers");
    w[i] = arr[i].get<double>();
  }
  return w;
}

template <typename Fn>
auto wrap_domain_errors(const std::string& path, Fn fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config field '" + path + "': " + e.what());
  }
}

PromptSpec explicit_prompt(const json& item, std::size_t i) {
  const std::string path = "domain.prompts[" + std::to_string(i) + "].";
  if (!item.is_object()) throw ConfigError("config field '" + path + "': must be an object");
  const auto& id = require(item, "id", path);
  if (!id.is_string()) throw ConfigError("config field '" + path + "id': must be a string");
  const double weight = item.contains("weight") ? number_at(item, "weight", path) : 1.0;
  const bool has_p = item.contains("p");
  const bool has_vec = item.contains("p_vec");
  if (has_p == has_vec) throw ConfigError("config field '" + path + "p': give exactly one of p or p_vec");
  return wrap_domain_errors(path.substr(0, path.size() - 1), [&] {
    if (has_p) return PromptSpec::binary(id.get<std::string>(), number_at(item, "p", path), weight);
    const auto& vec = item.at("p_vec");
    if (!vec.is_array()) throw ConfigError("config field '" + path + "p_vec': must be an array");
    std::vector<double> pv;
    for (const auto& x : vec) {
      if (!x.is_number()) throw ConfigError("config field '" + path + "p_vec': must hold numbers");
      pv.push_back(x.get<double>());
    }
    return PromptSpec::multiclass(id.get<std::string>(), std::move(pv), weight);
  });
}

std::vector<PromptSpec> generated_prompts(const json& gen, std::uint64_t top_seed) {
  const std::string path = "domain.generator.";
  if (!gen.is_object()) throw ConfigError("config field 'domain.generator': must be an object");
  const auto& kind_v = require(gen, "kind", path);
  if (!kind_v.is_string()) throw ConfigError("config field 'domain.generator.kind': must be a string");
  const std::string kind = kind_v.get<std::string>();
  const auto count = static_cast<std::size_t>(positive_int_at(gen, "count", path));
  const auto weights = weights_at(gen, count, path);
  const std::uint64_t seed = seed_at(gen, "seed", path).value_or(top_seed ^ 0x5eedd0a1a1ULL);
  std::vector<PromptSpec> out;
  out.reserve(count);

  if (kind == "grid") {
    const double lo = number_at(gen, "p_min", path);
    const double hi = number_at(gen, "p_max", path);
    for (std::size_t i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      out.push_back(wrap_domain_errors("domain.generator", [&] {
        return PromptSpec::binary("g" + std::to_string(i), lo + (hi - lo) * t, weights[i]);
      }));
    }
  } else if (kind == "beta") {
    const double a = number_at(gen, "alpha", path);
    const double b = number_at(gen, "beta", path);
    if (!(a > 0) || !(b > 0)) throw ConfigError("config field 'domain.generator.alpha': alpha and beta must be > 0");
    for (std::size_t i = 0; i < count; ++i) {
      Engine rng = substream(seed, i);
      const double x = std::gamma_distribution<double>(a, 1.0)(rng);
      const double y = std::gamma_distribution<double>(b, 1.0)(rng);
      const double p = x + y > 0 ? x / (x + y) : 0.5;
      out.push_back(PromptSpec::binary("b" + std::to_string(i), p, weights[i]));
    }
  } else if (kind == "dirichlet") {
    const auto classes = static_cast<std::size_t>(positive_int_at(gen, "classes", path));
    if (classes < 2) throw ConfigError("config field 'domain.generator.classes': must be >= 2");
    const double conc = number_at(gen, "concentration", path);
    if (!(conc > 0)) throw ConfigError("config field 'domain.generator.concentration': must be > 0");
    for (std::size_t i = 0; i < count; ++i) {
      Engine rng = substream(seed, i);
      std::vector<double> g(classes);
      double total = 0;
      for (auto& x : g) total += (x = std::gamma_distribution<double>(conc, 1.0)(rng));
      if (total > 0) {
        for (auto& x : g) x /= total;
      } else {
        std::fill(g.begin(), g.end(), 0.0);
        g[std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng)] = 1.0;
      }
      out.push_back(PromptSpec::multiclass("d" + std::to_string(i), std::move(g), weights[i]));
    }
  } else {
    throw ConfigError("config field 'domain.generator.kind': unknown generator '" + kind +
                      "' (expected grid, beta or dirichlet)");
  }
  return out;
}

json resolved_prompt(const PromptSpec& s) {
  json p;
  p["id"] = s.id();
  if (s.kind() == ResponseKind::binary) {
    p["p"] = s.p();
  } else {
    p["p_vec"] = s.p_vec();
  }
  p["weight"] = s.weight();
  return p;
}

}  // namespace

ExperimentSetup load_experiment(const json& doc, std::optional<std::uint64_t> seed_flag) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  static const std::vector<std::string> known{"domain", "m", "n", "replicates", "rho", "seed", "threads"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("config field '" + key + "': unknown field");
    }
  }
  const auto seed = resolve_seed(seed_flag, seed_at(doc, "seed", ""));

  const auto& domain_doc = require(doc, "domain", "");
  if (!domain_doc.is_object()) throw ConfigError("config field 'domain': must be an object");
  const bool has_list = domain_doc.contains("prompts");
  const bool has_gen = domain_doc.contains("generator");
  if (has_list == has_gen) {
    throw ConfigError("config field 'domain': give exactly one of 'prompts' or 'generator'");
  }
  std::vector<PromptSpec> prompts;
  if (has_list) {
    const auto& arr = domain_doc.at("prompts");
    if (!arr.is_array()) throw ConfigError("config field 'domain.prompts': must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) prompts.push_back(explicit_prompt(arr[i], i));
  } else {
    prompts = generated_prompts(domain_doc.at("generator"), seed.value);
  }
  PromptDomain domain = wrap_domain_errors("domain", [&] { return PromptDomain(std::move(prompts)); });

  const bool has_m = doc.contains("m");
  const bool has_n = doc.contains("n");
  if (has_m != has_n) throw ConfigError(std::string("config field '") + (has_m ? "n" : "m") + "': missing (m and n go together)");
  ExperimentSetup setup{ExperimentConfig{std::move(domain)}, false, {}, {}, {}};
  auto& cfg = setup.config;
  setup.has_split = has_m;
  if (has_m) {
    cfg.m = static_cast<int>(positive_int_at(doc, "m", ""));
    cfg.n = static_cast<int>(positive_int_at(doc, "n", ""));
  }
  cfg.replicates = positive_int_at(doc, "replicates", "");
  cfg.rho = doc.contains("rho") ? number_at(doc, "rho", "") : 0.0;
  if (!(cfg.rho >= 0.0 && cfg.rho <= 1.0)) throw ConfigError("config field 'rho': must lie in [0, 1]");
  if (cfg.rho > 0.0 && cfg.domain.kind() != ResponseKind::binary) {
    throw ConfigError("config field 'rho': correlated calls need a binary domain");
  }
  cfg.seed = seed.value;
  setup.seed_origin = seed.origin;
  if (doc.contains("threads")) {
    const auto& t = doc.at("threads");
    if (!t.is_number_integer() || t.get<std::int64_t>() < 0) {
      throw ConfigError("config field 'threads': must be a nonnegative integer");
    }
    cfg.threads = static_cast<unsigned>(t.get<std::int64_t>());
  } else {
    cfg.threads = 0;
  }

  json resolved;
  json plist = json::array();
  for (const auto& s : cfg.domain.prompts()) plist.push_back(resolved_prompt(s));
  resolved["domain"] = {{"prompts", plist}};
  if (has_m) {
    resolved["m"] = cfg.m;
    resolved["n"] = cfg.n;
  }
  resolved["replicates"] = cfg.replicates;
  resolved["rho"] = cfg.rho;
  resolved["seed"] = cfg.seed;
  setup.resolved = std::move(resolved);
  setup.digest = digest_hex(setup.resolved.dump());
  return setup;
}

ExperimentSetup load_experiment_file(const std::string& path, std::optional<std::uint64_t> seed_flag) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return load_experiment(doc, seed_flag);
}

}  // namespace selfcons::cli
