#pragma once
// Entailment oracle: drives an external SMT solver over a persistent
// stdin/stdout pipe, with memoization keyed on the alpha-renamed script.
//
// The solver command is anything that accepts SMT-LIB on stdin and prints one
// result line (sat/unsat/unknown) per (check-sat). Plain `z3 -in` works; so
// does the bundled solver/z3pipe.mjs wrapper. A query that exceeds the
// timeout kills and respawns the child and is reported as "not entailed".

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "logic.hpp"

namespace qsyn::smt {

enum class Verdict { Sat, Unsat, Unknown, Timeout };

struct OracleStats {
  uint64_t queries = 0;      // semantic questions asked (incl. cache hits)
  uint64_t solverCalls = 0;  // scripts actually sent to the solver
  uint64_t cacheHits = 0;
  uint64_t timeouts = 0;
  double solverTimeS = 0.0;
};

namespace detail {

inline std::vector<std::string> splitCommand(const std::string& cmd) {
  std::vector<std::string> out;
  std::istringstream ss(cmd);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

// A child process with line-buffered bidirectional pipes.
class SolverPipe {
 public:
  explicit SolverPipe(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw std::runtime_error("solver command is empty");
    // A dead child must surface as a write error, not a fatal signal.
    signal(SIGPIPE, SIG_IGN);
  }
  ~SolverPipe() { stop(); }

  SolverPipe(const SolverPipe&) = delete;
  SolverPipe& operator=(const SolverPipe&) = delete;

  Verdict query(const std::string& script, int timeoutMs) {
    return queryBatch({script}, timeoutMs)[0];
  }

  // Send several scripts in one round trip. Each script must contain exactly
  // one (check-sat); queries are separated by (reset) and terminated by a
  // flush marker the server (or a native `z3 -in`) echoes back. One verdict
  // is returned per script; a timeout or desync yields Timeout for the whole
  // remainder and respawns the child.
  std::vector<Verdict> queryBatch(const std::vector<std::string>& scripts,
                                  int timeoutMs) {
    std::vector<Verdict> out(scripts.size(), Verdict::Unknown);
    if (scripts.empty()) return out;
    if (pid_ < 0) start();
    std::string payload;
    for (const auto& s : scripts) {
      payload += "(reset)\n";
      payload += s;
      if (payload.back() != '\n') payload += '\n';
    }
    payload += "(echo \"#flush#\")\n";
    if (!writeAll(payload)) {
      // Child died; restart once and retry.
      stop();
      start();
      if (!writeAll(payload)) return out;
    }
    // The whole batch shares one deadline: scripts are tiny and uniform, and
    // a single stuck query leaves the pipe unusable anyway.
    int budget = timeoutMs * static_cast<int>(scripts.size());
    for (size_t i = 0; i < scripts.size();) {
      std::string line;
      if (!readLine(line, budget)) {
        stop();  // desynchronized or hung: a fresh child is the only safe state
        for (size_t j = i; j < scripts.size(); ++j) out[j] = Verdict::Timeout;
        return out;
      }
      if (line == "unsat") out[i++] = Verdict::Unsat;
      else if (line == "sat") out[i++] = Verdict::Sat;
      else if (line == "unknown") out[i++] = Verdict::Unknown;
      else {
        stop();  // unexpected output (solver error text): resync via respawn
        for (size_t j = i; j < scripts.size(); ++j) out[j] = Verdict::Timeout;
        return out;
      }
    }
    // Consume the trailing marker so the stream stays aligned.
    std::string marker;
    if (!readLine(marker, budget) || marker != "#flush#") stop();
    return out;
  }

 private:
  void start() {
    int toChild[2], fromChild[2];
    if (pipe(toChild) != 0 || pipe(fromChild) != 0)
      throw std::runtime_error("pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw std::runtime_error("fork() failed");
    if (pid_ == 0) {
      dup2(toChild[0], STDIN_FILENO);
      dup2(fromChild[1], STDOUT_FILENO);
      close(toChild[0]);
      close(toChild[1]);
      close(fromChild[0]);
      close(fromChild[1]);
      std::vector<char*> argv;
      for (auto& a : argv_) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(toChild[0]);
    close(fromChild[1]);
    inFd_ = toChild[1];
    outFd_ = fromChild[0];
    rdbuf_.clear();
  }

  void stop() {
    if (pid_ > 0) {
      close(inFd_);
      close(outFd_);
      kill(pid_, SIGKILL);
      int status = 0;
      waitpid(pid_, &status, 0);
    }
    pid_ = -1;
    inFd_ = outFd_ = -1;
  }

  bool writeAll(const std::string& s) {
    size_t off = 0;
    while (off < s.size()) {
      ssize_t n = write(inFd_, s.data() + off, s.size() - off);
      if (n <= 0) return false;
      off += static_cast<size_t>(n);
    }
    return true;
  }

  bool readLine(std::string& line, int timeoutMs) {
    auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeoutMs);
    for (;;) {
      auto nl = rdbuf_.find('\n');
      if (nl != std::string::npos) {
        line = rdbuf_.substr(0, nl);
        rdbuf_.erase(0, nl + 1);
        return true;
      }
      auto now = std::chrono::steady_clock::now();
      if (now >= deadline) return false;
      int waitMs = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now)
              .count());
      struct pollfd pfd { outFd_, POLLIN, 0 };
      int pr = poll(&pfd, 1, waitMs);
      if (pr <= 0) return false;
      char buf[4096];
      ssize_t n = read(outFd_, buf, sizeof buf);
      if (n <= 0) return false;
      rdbuf_.append(buf, static_cast<size_t>(n));
    }
  }

  std::vector<std::string> argv_;
  pid_t pid_ = -1;
  int inFd_ = -1, outFd_ = -1;
  std::string rdbuf_;
};

// Entailment oracle with memoization. Thread-safe: a single mutex serializes
// solver access and cache updates.
class Oracle {
 public:
  explicit Oracle(const std::string& command, int timeoutMs = 2000)
      : pipe_(detail::splitCommand(command)), timeoutMs_(timeoutMs) {}

  // Does (env.facts /\ lhs) entail rhs?  Timeouts and unknowns are reported
  // as "not entailed" (the sound direction for all of our callers).
  bool entails(const logic::TypingEnv& env, const logic::FormulaPtr& lhs,
               const logic::FormulaPtr& rhs) {
    std::lock_guard<std::mutex> lock(mu_);
    stats_.queries++;
    // Syntactic fast paths; these also keep trivially-true obligations out
    // of the solver entirely.
    if (logic::isTrue(rhs)) return true;
    if (logic::isFalse(lhs)) return true;
    if (logic::render(lhs) == logic::render(rhs) && env.facts.empty())
      return true;
    std::string script = canonicalScript(env, lhs, rhs);
    auto it = cache_.find(script);
    if (it != cache_.end()) {
      stats_.cacheHits++;
      return it->second;
    }
    stats_.solverCalls++;
    auto t0 = std::chrono::steady_clock::now();
    Verdict v = pipe_.query(script, timeoutMs_);
    stats_.solverTimeS +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (v == Verdict::Timeout) stats_.timeouts++;
    bool entailed = (v == Verdict::Unsat);
    cache_.emplace(std::move(script), entailed);
    return entailed;
  }

  // A pending entailment question, for batched evaluation.
  struct Query {
    logic::TypingEnv env;
    logic::FormulaPtr lhs, rhs;
  };

  // Warm the cache for a set of upcoming questions in as few solver round
  // trips as possible. Verdicts land in the memo table, so subsequent
  // entails() calls are cache hits. Failed batch entries (timeouts,
  // desyncs) are left uncached and will be retried individually.
  void prefetch(const std::vector<Query>& queries) {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> scripts;
    std::unordered_map<std::string, size_t> pending;
    for (const auto& q : queries) {
      if (logic::isTrue(q.rhs) || logic::isFalse(q.lhs)) continue;
      if (logic::render(q.lhs) == logic::render(q.rhs) && q.env.facts.empty())
        continue;
      std::string script = canonicalScript(q.env, q.lhs, q.rhs);
      if (cache_.count(script) || pending.count(script)) continue;
      pending.emplace(script, scripts.size());
      scripts.push_back(std::move(script));
    }
    const size_t chunk = 64;
    for (size_t off = 0; off < scripts.size(); off += chunk) {
      std::vector<std::string> part(
          scripts.begin() + off,
          scripts.begin() + std::min(off + chunk, scripts.size()));
      stats_.solverCalls += part.size();
      auto t0 = std::chrono::steady_clock::now();
      auto verdicts = pipe_.queryBatch(part, timeoutMs_);
      stats_.solverTimeS +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      for (size_t i = 0; i < part.size(); ++i) {
        if (verdicts[i] == Verdict::Timeout) {
          stats_.timeouts++;
          continue;  // retried (and then cached) by the next entails()
        }
        cache_.emplace(std::move(part[i]), verdicts[i] == Verdict::Unsat);
      }
    }
  }

  // Raw script evaluation (no cache); used by reference-comparison tests.
  Verdict checkSatRaw(const std::string& script) {
    std::lock_guard<std::mutex> lock(mu_);
    return pipe_.query(script, timeoutMs_);
  }

  const OracleStats& stats() const { return stats_; }
  void resetStats() { stats_ = OracleStats{}; }
  int timeoutMs() const { return timeoutMs_; }
  void setTimeoutMs(int ms) { timeoutMs_ = ms; }

  // The cache key: the emitted script with all program variables renamed in
  // order of first occurrence. Binder names (t17 vs t3) then no longer
  // matter, which is where most of the hit rate comes from.
  static std::string canonicalScript(const logic::TypingEnv& env,
                                     const logic::FormulaPtr& lhs,
                                     const logic::FormulaPtr& rhs) {
    std::map<std::string, logic::ExprPtr> ren;
    int i = 0;
    auto renameIn = [&](const logic::FormulaPtr& f) {
      for (const auto& [n, s] : logic::freeVars(f)) {
        if (!ren.count(n)) ren[n] = logic::mkVar("c" + std::to_string(i++), s);
      }
    };
    for (const auto& f : env.facts) renameIn(f);
    renameIn(lhs);
    renameIn(rhs);
    logic::TypingEnv env2;
    for (const auto& f : env.facts) env2.addFact(logic::substitute(f, ren));
    return logic::emitSmtLib(env2, logic::substitute(lhs, ren),
                             logic::substitute(rhs, ren));
  }

 private:
  SolverPipe pipe_;
  int timeoutMs_;
  std::mutex mu_;
  std::unordered_map<std::string, bool> cache_;
  OracleStats stats_;
};

// Resolve the solver command: explicit flag > QTA_SOLVER env var > `z3 -in`.
inline std::string resolveSolverCommand(const std::string& flagValue) {
  if (!flagValue.empty()) return flagValue;
  if (const char* env = std::getenv("QTA_SOLVER"); env && *env) return env;
  return "z3 -in";
}

}  // namespace qsyn::smt
