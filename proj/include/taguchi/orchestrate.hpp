#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "taguchi/design.hpp"
#include "taguchi/error.hpp"
#include "taguchi/response.hpp"
#include "taguchi/store.hpp"

namespace taguchi {

// Environment variable naming the runner's working directory.
inline constexpr const char* runner_cwd_env = "TAGUCHI_RUNNER_CWD";

// Synthetic RunRecord::runner_exit values for failures that are not a
// plain process exit status.
inline constexpr int exit_spawn_failed = -1;
inline constexpr int exit_protocol_error = -2;
inline constexpr int exit_timed_out = -3;

struct ProcessResult {
  int exit_status = 0;  // exit code, or 128 + signal number
  std::string out;
  std::string err;
  bool timed_out = false;
};

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct Pipe {
  Fd read;
  Fd write;
};

inline Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::runner, std::string("pipe: ") + std::strerror(errno));
  }
  return Pipe{Fd(fds[0]), Fd(fds[1])};
}

}  // namespace detail

// Runs `command` through /bin/sh, feeding `input` on stdin and capturing
// stdout and stderr. On timeout the whole process group is killed.
inline ProcessResult run_process(const std::string& command, std::string_view input,
                                 std::optional<std::chrono::milliseconds> timeout = std::nullopt,
                                 const std::optional<std::filesystem::path>& cwd = std::nullopt) {
  auto in = detail::make_pipe();
  auto out = detail::make_pipe();
  auto err = detail::make_pipe();

  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::runner, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in.read.get(), STDIN_FILENO);
    ::dup2(out.write.get(), STDOUT_FILENO);
    ::dup2(err.write.get(), STDERR_FILENO);
    if (cwd && ::chdir(cwd->c_str()) != 0) _exit(127);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::setpgid(pid, pid);
  in.read.reset();
  out.write.reset();
  err.write.reset();

  for (int fd : {in.write.get(), out.read.get(), err.read.get()}) {
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
  }

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) in.write.reset();
  const auto deadline = timeout ? std::optional(std::chrono::steady_clock::now() + *timeout)
                                : std::nullopt;

  while (out.read || err.read) {
    std::vector<pollfd> fds;
    if (in.write) fds.push_back({in.write.get(), POLLOUT, 0});
    if (out.read) fds.push_back({out.read.get(), POLLIN, 0});
    if (err.read) fds.push_back({err.read.get(), POLLIN, 0});

    int wait_ms = -1;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          *deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        result.timed_out = true;
        break;
      }
      wait_ms = static_cast<int>(std::min<long long>(left.count(), 1000));
    }
    const int ready = ::poll(fds.data(), fds.size(), wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }

    for (const auto& p : fds) {
      if (p.revents == 0) continue;
      if (in.write && p.fd == in.write.get()) {
        const ssize_t n = ::write(p.fd, input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN && errno != EINTR) written = input.size();  // reader gone
        if (written >= input.size()) in.write.reset();
        continue;
      }
      detail::Fd& src = p.fd == out.read.get() ? out.read : err.read;
      std::string& sink = p.fd == out.read.get() ? result.out : result.err;
      char buf[4096];
      const ssize_t n = ::read(p.fd, buf, sizeof buf);
      if (n > 0) {
        sink.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        src.reset();
      }
    }
  }

  if (result.timed_out) ::kill(-pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status)) {
    result.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_status = 128 + WTERMSIG(status);
  }
  return result;
}

// The JSON document a runner receives on stdin for one trial.
inline std::string trial_request(const DesignMatrix& m, std::size_t row, std::size_t replicate,
                                 bool include_replicate) {
  nlohmann::ordered_json j;
  j["row"] = row;
  auto factors = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < m.factor_count(); ++c) factors[m.factors()[c].name] = m.label(row - 1, c);
  j["factors"] = std::move(factors);
  if (include_replicate) j["replicate"] = replicate;
  return j.dump();
}

struct ParsedMetrics {
  std::optional<TrialMetrics> metrics;
  std::string diagnostic;                // set when metrics is empty
  std::vector<std::string> other_lines;  // stdout lines that are not the metrics object
};

namespace detail {

inline std::optional<TrialMetrics> metrics_from_json(const nlohmann::json& j) {
  if (!j.is_object()) return std::nullopt;
  for (const char* key : {"ta", "va", "tl", "vl"}) {
    if (!j.contains(key) || !j[key].is_number()) return std::nullopt;
  }
  return TrialMetrics{j["ta"].get<double>(), j["va"].get<double>(), j["tl"].get<double>(),
                      j["vl"].get<double>()};
}

}  // namespace detail

// Finds the single `{"ta":..,"va":..,"tl":..,"vl":..}` object in runner
// stdout. Either one line holds it, or the whole output is that object.
inline ParsedMetrics parse_runner_output(std::string_view out) {
  ParsedMetrics parsed;
  std::vector<TrialMetrics> found;
  std::istringstream lines{std::string(out)};
  std::string line;
  while (std::getline(lines, line)) {
    const auto t = csv::trim(line);
    std::optional<TrialMetrics> m;
    if (!t.empty() && t.front() == '{') {
      const auto j = nlohmann::json::parse(t, nullptr, false);
      if (!j.is_discarded()) m = detail::metrics_from_json(j);
    }
    if (m) {
      found.push_back(*m);
    } else if (!t.empty()) {
      parsed.other_lines.push_back(line);
    }
  }
  if (found.empty()) {
    const auto j = nlohmann::json::parse(out, nullptr, false);
    if (!j.is_discarded()) {
      if (auto m = detail::metrics_from_json(j)) {
        found.push_back(*m);
        parsed.other_lines.clear();
      }
    }
  }

  if (found.size() != 1) {
    parsed.diagnostic = "expected exactly one metrics object {\"ta\",\"va\",\"tl\",\"vl\"} on stdout, found " +
                        std::to_string(found.size());
    return parsed;
  }
  if (auto bad = check_metrics(found.front()); !bad.empty()) {
    parsed.diagnostic = "runner metrics out of range: " + bad;
    return parsed;
  }
  parsed.metrics = found.front();
  return parsed;
}

struct RunOptions {
  std::string command;
  std::size_t parallelism = 1;
  std::optional<std::chrono::milliseconds> timeout;  // unlimited by default
  std::optional<std::filesystem::path> working_dir;  // falls back to $TAGUCHI_RUNNER_CWD
  std::size_t replicates = 1;
  std::vector<std::size_t> rows;  // 1-based subset; empty = every row
  // Receives runner output lines and warnings, one call per line, serialized.
  std::function<void(std::string_view)> log;
};

struct RunSummary {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::vector<std::string> warnings;
};

// Executes each (row, replicate) through the runner with up to
// `parallelism` trials in flight and records every outcome in `store`.
// Runner failures are recorded per row; the run continues.
inline RunSummary run_plan(const DesignMatrix& m, const RunOptions& opts, ResultStore& store) {
  if (opts.command.empty()) throw Error(ErrorCode::config, "runner command is empty");
  if (opts.parallelism < 1) throw Error(ErrorCode::config, "parallelism must be >= 1");
  if (opts.replicates < 1) throw Error(ErrorCode::config, "replicates must be >= 1");
  if (store.plan() != plan_hash(m)) throw Error(ErrorCode::config, "result store belongs to another plan");

  std::vector<std::size_t> rows = opts.rows;
  if (rows.empty()) {
    for (std::size_t r = 1; r <= m.runs(); ++r) rows.push_back(r);
  }
  for (std::size_t r : rows) {
    if (r < 1 || r > m.runs()) throw Error(ErrorCode::config, "row " + std::to_string(r) + " not in plan");
  }

  std::optional<std::filesystem::path> cwd = opts.working_dir;
  if (!cwd) {
    if (const char* env = std::getenv(runner_cwd_env); env && *env) cwd = std::filesystem::path(env);
  }

  // A runner that exits without reading stdin must not kill the engine.
  ::signal(SIGPIPE, SIG_IGN);

  struct Job {
    std::size_t row;
    std::size_t replicate;
  };
  std::vector<Job> jobs;
  for (std::size_t r : rows) {
    for (std::size_t k = 1; k <= opts.replicates; ++k) jobs.push_back({r, k});
  }

  RunSummary summary;
  std::mutex mu;
  auto log_line = [&](const std::string& line) {
    if (opts.log) opts.log(line);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job job = jobs[i];
      RunRecord rec;
      rec.plan_hash = store.plan();
      rec.row = job.row;
      rec.replicate = job.replicate;
      rec.levels = row_levels(m, job.row - 1);
      rec.started = utc_timestamp();

      const std::string tag = "[row " + std::to_string(job.row) +
                              (opts.replicates > 1 ? "/" + std::to_string(job.replicate) : "") + "] ";
      ProcessResult pr;
      std::string spawn_error;
      try {
        pr = run_process(opts.command, trial_request(m, job.row, job.replicate, opts.replicates > 1) + "\n",
                         opts.timeout, cwd);
      } catch (const Error& e) {
        spawn_error = e.what();
      }
      rec.finished = utc_timestamp();

      ParsedMetrics parsed;
      if (!spawn_error.empty()) {
        rec.runner_exit = exit_spawn_failed;
        rec.note = spawn_error;
      } else if (pr.timed_out) {
        rec.runner_exit = exit_timed_out;
        rec.note = "runner timed out";
      } else if (pr.exit_status != 0) {
        rec.runner_exit = pr.exit_status;
        rec.note = "runner exited with status " + std::to_string(pr.exit_status);
      } else {
        parsed = parse_runner_output(pr.out);
        if (parsed.metrics) {
          rec.metrics = parsed.metrics;
        } else {
          rec.runner_exit = exit_protocol_error;
          rec.note = parsed.diagnostic;
        }
      }

      std::lock_guard lock(mu);
      if (!parsed.metrics) {
        std::istringstream outs(pr.out);
        for (std::string l; std::getline(outs, l);) log_line(tag + "stdout: " + l);
      } else {
        for (const auto& l : parsed.other_lines) log_line(tag + "stdout: " + l);
      }
      std::istringstream errs(pr.err);
      for (std::string l; std::getline(errs, l);) log_line(tag + "stderr: " + l);
      if (!rec.note.empty()) log_line(tag + "failed: " + rec.note);

      const bool ok = rec.succeeded();
      if (store.add(std::move(rec)) == AddOutcome::replaced) {
        std::string w = tag + "replaces an earlier result (last write wins)";
        summary.warnings.push_back(w);
        log_line("warning: " + w);
      }
      ok ? ++summary.succeeded : ++summary.failed;
    }
  };

  const std::size_t n_threads = std::min(opts.parallelism, jobs.size());
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  threads.clear();  // join before reading summary
  return summary;
}

inline ResultStore run_plan(const DesignMatrix& m, const RunOptions& opts) {
  ResultStore store = ResultStore::for_plan(m);
  run_plan(m, opts, store);
  return store;
}

}  // namespace taguchi
