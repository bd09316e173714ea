// Test double for the external label protocol. Reads requests
// {"prompt_id": ..., "draw": ...} from stdin and answers on stdout.
//
//   --mode constant   always --label
//   --mode bernoulli  label 1 with probability --p, decided by a hash of
//                     (--seed, prompt_id, draw) so retries agree
//   --mode silent     reads but never answers
//   --mode garbage    answers with a line that is not JSON
//   --mode unsolicited answers with a draw nobody asked for
//   --mode flaky      ignores the first copy of each request, answers re-sends
//   --no-ready        skip the ready line
//   --exit-after K    exit after answering K requests
//   --reverse         answer each batch of already-buffered requests in reverse

#include <poll.h>
#include <unistd.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace {

struct Options {
  std::string mode = "constant";
  int label = 0;
  double p = 0.5;
  std::uint64_t seed = 0;
  bool ready = true;
  long exit_after = -1;
  bool reverse = false;
};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool write_all(const std::string& s) {
  std::size_t done = 0;
  while (done < s.size()) {
    const ssize_t w = ::write(1, s.data() + done, s.size() - done);
    if (w <= 0) return false;
    done += static_cast<std::size_t>(w);
  }
  return true;
}

Options parse(int argc, char** argv) {
  Options o;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "stub_responder: %s needs a value\n", a.c_str());
        std::exit(64);
      }
      return argv[++i];
    };
    if (a == "--mode") o.mode = next();
    else if (a == "--label") o.label = std::atoi(next().c_str());
    else if (a == "--p") o.p = std::atof(next().c_str());
    else if (a == "--seed") o.seed = std::strtoull(next().c_str(), nullptr, 10);
    else if (a == "--no-ready") o.ready = false;
    else if (a == "--exit-after") o.exit_after = std::atol(next().c_str());
    else if (a == "--reverse") o.reverse = true;
    else {
      std::fprintf(stderr, "stub_responder: unknown argument %s\n", a.c_str());
      std::exit(64);
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const Options opt = parse(argc, argv);
  if (opt.ready && !write_all("{\"ready\":true}\n")) return 1;

  std::string buffer;
  std::set<std::pair<std::string, long>> seen;
  long answered = 0;
  char chunk[4096];
  for (;;) {
    const ssize_t r = ::read(0, chunk, sizeof chunk);
    if (r <= 0) return 0;
    buffer.append(chunk, static_cast<std::size_t>(r));
    // Drain whatever else is already waiting so --reverse sees a batch.
    for (;;) {
      pollfd pfd{0, POLLIN, 0};
      if (::poll(&pfd, 1, 0) <= 0 || !(pfd.revents & POLLIN)) break;
      const ssize_t more = ::read(0, chunk, sizeof chunk);
      if (more <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(more));
    }

    std::vector<std::string> replies;
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.empty()) continue;
      const auto req = nlohmann::json::parse(line, nullptr, false);
      if (req.is_discarded()) continue;
      const std::string id = req.value("prompt_id", "");
      const long draw = req.value("draw", -1L);
      if (opt.mode == "silent") continue;
      if (opt.mode == "flaky" && seen.insert({id, draw}).second) continue;
      if (opt.mode == "garbage") {
        replies.push_back("this is not json\n");
        continue;
      }
      int label = opt.label;
      long reply_draw = draw;
      if (opt.mode == "bernoulli") {
        const std::uint64_t h = mix(opt.seed ^ mix(fnv(id) ^ mix(static_cast<std::uint64_t>(draw))));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        label = u < opt.p ? 1 : 0;
      } else if (opt.mode == "unsolicited") {
        reply_draw = draw + 1000000;
      }
      replies.push_back(nlohmann::json{{"prompt_id", id}, {"draw", reply_draw}, {"label", label}}.dump() + "\n");
    }
    if (opt.reverse) std::reverse(replies.begin(), replies.end());
    for (const auto& line : replies) {
      if (!write_all(line)) return 1;
      if (opt.exit_after >= 0 && ++answered >= opt.exit_after) return 0;
    }
  }
}
