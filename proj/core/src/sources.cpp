#include "selfcons/sources.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace selfcons {

using nlohmann::json;

namespace {

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::string where(std::size_t line) {
  return line ? "line " + std::to_string(line) + ": " : std::string();
}

}  // namespace

ReplayRecord parse_replay_line(const std::string& line, int declared_classes,
                               std::size_t line_number) {
  if (declared_classes < 2) throw std::invalid_argument("declared class count must be >= 2");
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ReplayError(where(line_number) + "malformed JSON (" + e.what() + ")", line_number);
  }
  if (!doc.is_object()) throw ReplayError(where(line_number) + "record must be a JSON object", line_number);
  for (const auto& [key, value] : doc.items()) {
    if (key != "prompt_id" && key != "responses" && key != "meta") {
      throw ReplayError(where(line_number) + "unexpected field '" + key + "'", line_number);
    }
  }
  if (!doc.contains("prompt_id") || !doc["prompt_id"].is_string()) {
    throw ReplayError(where(line_number) + "'prompt_id' must be a string", line_number);
  }
  if (!doc.contains("responses") || !doc["responses"].is_array()) {
    throw ReplayError(where(line_number) + "'responses' must be an array", line_number);
  }
  ReplayRecord rec;
  rec.prompt_id = doc["prompt_id"].get<std::string>();
  const auto& responses = doc["responses"];
  if (responses.empty()) {
    throw ReplayError(where(line_number) + "record '" + rec.prompt_id + "' has no responses",
                      line_number);
  }
  rec.responses.reserve(responses.size());
  for (const auto& label : responses) {
    if (!label.is_number_integer()) {
      throw ReplayError(where(line_number) + "record '" + rec.prompt_id +
                            "': labels must be integers, got " + label.dump(),
                        line_number);
    }
    const auto value = label.get<std::int64_t>();
    if (value < 0 || value >= declared_classes) {
      throw ReplayError(where(line_number) + "record '" + rec.prompt_id + "': label " +
                            std::to_string(value) + " outside [0, " +
                            std::to_string(declared_classes - 1) + "]",
                        line_number);
    }
    rec.responses.push_back(static_cast<int>(value));
  }
  if (doc.contains("meta")) {
    const auto& meta = doc["meta"];
    if (!meta.is_object()) throw ReplayError(where(line_number) + "'meta' must be an object", line_number);
    for (const auto& [key, value] : meta.items()) {
      rec.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return rec;
}

std::vector<ReplayRecord> read_replay(std::istream& in, int declared_classes) {
  std::vector<ReplayRecord> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (is_blank(line)) continue;
    records.push_back(parse_replay_line(line, declared_classes, number));
  }
  return records;
}

std::vector<ReplayRecord> open_replay(const std::filesystem::path& path, int declared_classes) {
  std::ifstream in(path);
  if (!in) throw ReplayError("cannot open replay file '" + path.string() + "'", 0);
  return read_replay(in, declared_classes);
}

std::string format_replay_line(const ReplayRecord& record) {
  json doc;
  doc["prompt_id"] = record.prompt_id;
  doc["responses"] = record.responses;
  if (!record.meta.empty()) doc["meta"] = record.meta;
  return doc.dump();
}

void write_replay(std::ostream& out, std::span<const ReplayRecord> records) {
  for (const auto& r : records) out << format_replay_line(r) << '\n';
}

void write_replay(const std::filesystem::path& path, std::span<const ReplayRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write replay file '" + path.string() + "'");
  write_replay(out, records);
}

ResponseCounts counts_from_record(const ReplayRecord& record, int classes) {
  if (classes < 2) throw std::invalid_argument("class count must be >= 2");
  if (record.responses.empty()) {
    throw std::invalid_argument("record '" + record.prompt_id + "' has no responses");
  }
  std::vector<int> tally(static_cast<std::size_t>(classes), 0);
  for (int label : record.responses) {
    if (label < 0 || label >= classes) {
      throw std::invalid_argument("record '" + record.prompt_id + "': label " +
                                  std::to_string(label) + " out of range");
    }
    ++tally[static_cast<std::size_t>(label)];
  }
  const int n = static_cast<int>(record.responses.size());
  if (classes == 2) return ResponseCounts::binary(record.prompt_id, tally[1], n);
  return ResponseCounts::multiclass(record.prompt_id, std::move(tally));
}

ReplayRecord record_from_counts(const ResponseCounts& counts) {
  ReplayRecord rec;
  rec.prompt_id = counts.prompt_id();
  rec.responses.reserve(static_cast<std::size_t>(counts.n()));
  const auto& tally = counts.counts();
  for (std::size_t label = 0; label < tally.size(); ++label) {
    rec.responses.insert(rec.responses.end(), static_cast<std::size_t>(tally[label]),
                         static_cast<int>(label));
  }
  return rec;
}

}  // namespace selfcons
