#pragma once

// Response sources feeding the estimator: recorded replay files and live
// external processes. Both deliver already-classified labels (0/1 for
// binary, 0..C-1 for C classes); turning response text into labels is the
// caller's job.
//
// Replay file: UTF-8, one JSON object per line,
//   {"prompt_id": "<id>", "responses": [<label>, ...], "meta": {...}}
// where "meta" is optional. Blank lines are ignored.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfcons/estimator.hpp"

namespace selfcons {

struct ReplayRecord {
  std::string prompt_id;
  std::vector<int> responses;
  /// Non-string meta values are kept as their compact JSON text.
  std::map<std::string, std::string> meta;

  friend bool operator==(const ReplayRecord&, const ReplayRecord&) = default;
};

/// Malformed replay input. `line()` is 1-based; 0 when not tied to a line.
class ReplayError : public std::runtime_error {
 public:
  ReplayError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

ReplayRecord parse_replay_line(const std::string& line, int declared_classes,
                               std::size_t line_number = 0);
std::vector<ReplayRecord> read_replay(std::istream& in, int declared_classes);
std::vector<ReplayRecord> open_replay(const std::filesystem::path& path, int declared_classes);

std::string format_replay_line(const ReplayRecord& record);
void write_replay(std::ostream& out, std::span<const ReplayRecord> records);
void write_replay(const std::filesystem::path& path, std::span<const ReplayRecord> records);

/// Binary (classes == 2): k = number of label-1 responses. Otherwise a
/// per-class tally of length `classes`.
ResponseCounts counts_from_record(const ReplayRecord& record, int classes);

/// A label sequence consistent with `counts`, in class order. Exchangeable
/// calls make the order immaterial to every estimator here.
ReplayRecord record_from_counts(const ResponseCounts& counts);

}  // namespace selfcons
