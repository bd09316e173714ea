#include "selfcons/external_source.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <deque>
#include <map>
#include <optional>
#include <thread>
#include <unordered_map>

#include <json.hpp>

extern char** environ;

namespace selfcons {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> out;
  std::string word;
  bool in_word = false;
  char quote = 0;
  for (char c : command) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        word += c;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_word) out.push_back(std::move(word));
      word.clear();
      in_word = false;
    } else {
      word += c;
      in_word = true;
    }
  }
  if (quote) throw std::invalid_argument("unterminated quote in command: " + command);
  if (in_word) out.push_back(std::move(word));
  return out;
}

ExternalSource::ExternalSource(std::vector<std::string> argv, ExternalSourceOptions options)
    : options_(options) {
  if (argv.empty()) throw SourceFailure("external source: empty command");
  if (options_.window == 0) throw std::invalid_argument("external source: window must be >= 1");
  if (options_.retries < 0) throw std::invalid_argument("external source: retries must be >= 0");
  if (options_.classes < 2) throw std::invalid_argument("external source: classes must be >= 2");

  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw SourceFailure(std::string("external source: socketpair failed: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);

  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(sv[1]);
  if (rc != 0) {
    close(sv[0]);
    throw SourceFailure("external source: cannot launch '" + argv[0] + "': " + std::strerror(rc));
  }
  pid_ = pid;
  fd_ = sv[0];

  const auto deadline = Clock::now() + options_.timeout * (options_.retries + 1);
  std::vector<std::string> lines;
  while (lines.empty()) {
    if (!read_lines(deadline, lines)) {
      throw SourceFailure("external source: process exited before signalling readiness");
    }
    if (lines.empty() && Clock::now() >= deadline) {
      throw SourceFailure("external source: no ready line within the timeout");
    }
  }
  json ready;
  try {
    ready = json::parse(lines.front());
  } catch (const json::parse_error&) {
    throw ProtocolError("external source: first line is not JSON: " + lines.front());
  }
  if (!ready.is_object() || ready.value("ready", false) != true) {
    throw ProtocolError("external source: expected {\"ready\": true}, got " + lines.front());
  }
  if (lines.size() > 1) {
    throw ProtocolError("external source: unsolicited output after ready line: " + lines[1]);
  }
}

ExternalSource::~ExternalSource() {
  if (fd_ >= 0) {
    shutdown(fd_, SHUT_WR);
  }
  if (pid_ > 0) {
    int status = 0;
    const auto give_up = Clock::now() + std::chrono::milliseconds(200);
    while (waitpid(pid_, &status, WNOHANG) == 0) {
      if (Clock::now() >= give_up) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  if (fd_ >= 0) close(fd_);
}

void ExternalSource::send_line(const std::string& line) {
  std::string payload = line + '\n';
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const ssize_t n = send(fd_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SourceFailure(std::string("external source: write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

// Appends complete lines available before `deadline`. Returns false on EOF.
bool ExternalSource::read_lines(Clock::time_point deadline, std::vector<std::string>& lines) {
  const auto start_count = lines.size();
  while (lines.size() == start_count) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::max<long long>(0, left.count())));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw SourceFailure(std::string("external source: poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) return true;
    char chunk[4096];
    const ssize_t n = recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SourceFailure(std::string("external source: read failed: ") + std::strerror(errno));
    }
    if (n == 0) return false;
    buffer_.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer_.find('\n')) != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back(std::move(line));
    }
  }
  return true;
}

namespace {

struct InFlight {
  Clock::time_point deadline;
  int attempts = 1;
};

using RequestKey = std::pair<std::size_t, int>;  // (prompt index, draw)

}  // namespace

CollectionResult ExternalSource::collect(std::span<const std::string> prompt_ids, int draws,
                                         const LabelCallback& on_label) {
  if (draws < 1) throw std::invalid_argument("external source: draws per prompt must be >= 1");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < prompt_ids.size(); ++i) {
    if (!index.emplace(prompt_ids[i], i).second) {
      throw std::invalid_argument("external source: duplicate prompt id '" + prompt_ids[i] + "'");
    }
  }

  std::vector<std::vector<std::optional<int>>> labels(
      prompt_ids.size(), std::vector<std::optional<int>>(static_cast<std::size_t>(draws)));
  std::vector<int> done(prompt_ids.size(), 0);
  std::vector<std::optional<std::string>> failed(prompt_ids.size());
  std::deque<RequestKey> queue;
  for (std::size_t i = 0; i < prompt_ids.size(); ++i) {
    for (int d = 0; d < draws; ++d) queue.emplace_back(i, d);
  }
  std::map<RequestKey, InFlight> in_flight;

  auto request = [&](const RequestKey& key) {
    json req;
    req["prompt_id"] = prompt_ids[key.first];
    req["draw"] = key.second;
    send_line(req.dump());
  };

  auto fail_prompt = [&](std::size_t p, std::string reason) {
    failed[p] = std::move(reason);
    for (auto it = in_flight.begin(); it != in_flight.end();) {
      it = it->first.first == p ? in_flight.erase(it) : std::next(it);
    }
  };

  auto handle_reply = [&](const std::string& line) {
    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::parse_error&) {
      throw ProtocolError("external source: reply is not JSON: " + line);
    }
    if (!reply.is_object() || !reply.contains("prompt_id") || !reply["prompt_id"].is_string() ||
        !reply.contains("draw") || !reply["draw"].is_number_integer() ||
        !reply.contains("label") || !reply["label"].is_number_integer()) {
      throw ProtocolError("external source: reply lacks prompt_id/draw/label: " + line);
    }
    const auto it = index.find(reply["prompt_id"].get<std::string>());
    const auto draw = reply["draw"].get<std::int64_t>();
    if (it == index.end() || draw < 0 || draw >= draws) {
      throw ProtocolError("external source: reply for a request never sent: " + line);
    }
    const auto label = reply["label"].get<std::int64_t>();
    if (label < 0 || label >= options_.classes) {
      throw ProtocolError("external source: label " + std::to_string(label) + " for prompt '" +
                          it->first + "' outside [0, " + std::to_string(options_.classes - 1) + "]");
    }
    const RequestKey key{it->second, static_cast<int>(draw)};
    const auto pending = in_flight.find(key);
    if (pending == in_flight.end()) {
      // Late answer to a retried request, or to a prompt already given up on.
      const bool known = labels[key.first][key.second].has_value() || failed[key.first];
      if (!known) throw ProtocolError("external source: reply for a request never sent: " + line);
      return;
    }
    in_flight.erase(pending);
    labels[key.first][key.second] = static_cast<int>(label);
    ++done[key.first];
    if (on_label) on_label(it->first, key.second, static_cast<int>(label));
  };

  std::vector<std::string> lines;
  while (!queue.empty() || !in_flight.empty()) {
    while (in_flight.size() < options_.window && !queue.empty()) {
      const RequestKey key = queue.front();
      queue.pop_front();
      if (failed[key.first]) continue;
      in_flight[key] = InFlight{Clock::now() + options_.timeout, 1};
      request(key);
    }
    if (in_flight.empty()) continue;

    auto next_deadline = in_flight.begin()->second.deadline;
    for (const auto& [key, f] : in_flight) next_deadline = std::min(next_deadline, f.deadline);

    lines.clear();
    if (!read_lines(next_deadline, lines)) {
      for (const auto& l : lines) handle_reply(l);
      std::vector<PromptFailure> failures;
      for (std::size_t p = 0; p < prompt_ids.size(); ++p) {
        if (done[p] < draws) {
          failures.push_back({prompt_ids[p], failed[p].value_or("process exited"), done[p]});
        }
      }
      throw SourceFailure("external source: process exited with requests outstanding",
                          std::move(failures));
    }
    for (const auto& l : lines) handle_reply(l);

    const auto now = Clock::now();
    std::vector<RequestKey> expired;
    for (const auto& [key, f] : in_flight) {
      if (f.deadline <= now) expired.push_back(key);
    }
    for (const auto& key : expired) {
      auto it = in_flight.find(key);
      if (it == in_flight.end()) continue;  // prompt already failed this round
      if (it->second.attempts > options_.retries) {
        fail_prompt(key.first, "timed out on draw " + std::to_string(key.second) + " after " +
                                   std::to_string(it->second.attempts) + " attempts");
        continue;
      }
      ++it->second.attempts;
      it->second.deadline = now + options_.timeout;
      request(key);
    }
  }

  CollectionResult result;
  for (std::size_t p = 0; p < prompt_ids.size(); ++p) {
    if (failed[p]) {
      result.failures.push_back({prompt_ids[p], *failed[p], done[p]});
      continue;
    }
    ReplayRecord rec;
    rec.prompt_id = prompt_ids[p];
    rec.responses.reserve(static_cast<std::size_t>(draws));
    for (const auto& l : labels[p]) rec.responses.push_back(*l);
    result.records.push_back(std::move(rec));
  }
  if (result.records.empty() && !prompt_ids.empty()) {
    throw SourceFailure("external source: every prompt failed", std::move(result.failures));
  }
  return result;
}

}  // namespace selfcons
