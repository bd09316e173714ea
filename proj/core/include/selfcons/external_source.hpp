#pragma once

// Live response source: a child process speaking line-delimited JSON.
//
//   child -> us   {"ready": true}                              (once, first)
//   us -> child   {"prompt_id": "<id>", "draw": <int>}
//   child -> us   {"prompt_id": "<id>", "draw": <int>, "label": <int>}
//
// Up to `window` requests are in flight at once; replies may arrive in any
// order and are matched by (prompt_id, draw). A request that times out is
// re-sent up to `retries` times; after that its prompt is marked failed and
// dropped from the estimate. Malformed or unsolicited replies are protocol
// violations and abort the run.

#include <chrono>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfcons/sources.hpp"

namespace selfcons {

struct ExternalSourceOptions {
  std::chrono::milliseconds timeout{5000};
  int retries = 2;
  std::size_t window = 8;
  int classes = 2;
};

struct PromptFailure {
  std::string prompt_id;
  std::string reason;
  int draws_completed = 0;
};

struct CollectionResult {
  /// Successful prompts only, in request order, responses ordered by draw.
  std::vector<ReplayRecord> records;
  std::vector<PromptFailure> failures;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The process could not be used at all: launch failure, no ready line,
/// early exit, or every prompt failed.
class SourceFailure : public std::runtime_error {
 public:
  SourceFailure(const std::string& what, std::vector<PromptFailure> failures = {})
      : std::runtime_error(what), failures_(std::move(failures)) {}
  const std::vector<PromptFailure>& failures() const { return failures_; }

 private:
  std::vector<PromptFailure> failures_;
};

using LabelCallback = std::function<void(const std::string& prompt_id, int draw, int label)>;

class ExternalSource {
 public:
  /// Launches argv[0] (searched on PATH) and waits for the ready line.
  ExternalSource(std::vector<std::string> argv, ExternalSourceOptions options = {});
  ~ExternalSource();

  ExternalSource(const ExternalSource&) = delete;
  ExternalSource& operator=(const ExternalSource&) = delete;

  /// Requests `draws` labels for every prompt id. `on_label` (optional) sees
  /// each accepted label as it streams in.
  CollectionResult collect(std::span<const std::string> prompt_ids, int draws,
                           const LabelCallback& on_label = {});

  const ExternalSourceOptions& options() const { return options_; }

 private:
  ExternalSourceOptions options_;
  int pid_ = -1;
  int fd_ = -1;
  std::string buffer_;

  bool read_lines(std::chrono::steady_clock::time_point deadline, std::vector<std::string>& lines);
  void send_line(const std::string& line);
};

/// Splits a shell-like command string on whitespace; single and double
/// quotes group words. No expansion is performed.
std::vector<std::string> split_command(const std::string& command);

}  // namespace selfcons
