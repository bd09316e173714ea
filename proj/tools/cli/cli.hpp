#pragma once

// Command-line front end: plan, simulate, verify, estimate, sweep.
//
// Exit codes: 0 success, 1 usage/config error, 2 bound-violation finding,
// 3 source failure.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "selfcons/planner.hpp"
#include "selfcons/simulator.hpp"

namespace selfcons::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitBoundViolation = 2;
inline constexpr int kExitSourceFailure = 3;

inline constexpr const char* kSeedEnvVar = "SELFCONS_SEED";

const char* tool_version();

/// Schema violation in a config document; the message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fully resolved experiment: generators expanded, seed fixed.
struct ExperimentSetup {
  ExperimentConfig config;
  bool has_split = false;  // config carried m and n
  nlohmann::json resolved;
  std::string digest;
  std::string seed_origin;
};

/// Where the seed came from: flag > config > environment > fresh entropy.
struct SeedChoice {
  std::uint64_t value = 0;
  std::string origin;
};

SeedChoice resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config);

/// Parses a config document (format in configs/README.md). `seed_flag`
/// overrides the document's seed.
ExperimentSetup load_experiment(const nlohmann::json& doc,
                                std::optional<std::uint64_t> seed_flag = std::nullopt);
ExperimentSetup load_experiment_file(const std::string& path,
                                     std::optional<std::uint64_t> seed_flag = std::nullopt);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string digest_hex(std::string_view text);

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string timestamp;  // ISO-8601 UTC
};

RunManifest make_manifest(std::string command, std::string digest, std::uint64_t seed);

nlohmann::json to_json(const BoundBreakdown& b);
nlohmann::json to_json(const BudgetPlan& plan);
nlohmann::json to_json(const ExperimentReport& report);
nlohmann::json to_json(const RunManifest& manifest);

/// Per-replicate CSV: replicate,estimate,sq_error,abs_deviation,tilde_e,mean_ab,max_a
void write_replicate_csv(std::ostream& out, const std::vector<ReplicateRecord>& records);

/// Round-trip decimal formatting used in every CSV.
std::string format_real(double x);

/// Runs the tool. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace selfcons::cli
