#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "taguchi/csv.hpp"
#include "taguchi/design.hpp"
#include "taguchi/error.hpp"
#include "taguchi/response.hpp"

namespace taguchi {

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(t);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(t - secs).count();
  const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(millis));
  return buf;
}

// One executed (or ingested) design row.
struct RunRecord {
  std::string plan_hash;
  std::size_t row = 0;  // 1-based
  std::size_t replicate = 1;
  std::vector<std::pair<std::string, std::string>> levels;  // factor name -> label, plan order
  std::optional<TrialMetrics> metrics;  // present iff runner_exit == 0
  std::string note;
  std::string started;
  std::string finished;
  int runner_exit = 0;
  std::string source = "run";

  bool succeeded() const { return runner_exit == 0 && metrics.has_value(); }

  // Equality ignoring timestamps.
  bool same_outcome(const RunRecord& o) const {
    return plan_hash == o.plan_hash && row == o.row && replicate == o.replicate &&
           levels == o.levels && metrics == o.metrics && note == o.note &&
           runner_exit == o.runner_exit && source == o.source;
  }
};

inline std::vector<std::pair<std::string, std::string>> row_levels(const DesignMatrix& m,
                                                                   std::size_t row) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t c = 0; c < m.factor_count(); ++c) {
    out.emplace_back(m.factors()[c].name, m.label(row, c));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["plan"] = r.plan_hash;
  j["row"] = r.row;
  j["replicate"] = r.replicate;
  auto levels = nlohmann::ordered_json::object();
  for (const auto& [name, label] : r.levels) levels[name] = label;
  j["factors"] = std::move(levels);
  if (r.metrics) {
    j["metrics"] = {{"ta", r.metrics->ta}, {"va", r.metrics->va}, {"tl", r.metrics->tl},
                    {"vl", r.metrics->vl}};
  } else {
    j["metrics"] = nullptr;
  }
  j["note"] = r.note;
  j["started"] = r.started;
  j["finished"] = r.finished;
  j["exit"] = r.runner_exit;
  j["source"] = r.source;
  return j;
}

inline RunRecord run_record_from_json(const nlohmann::ordered_json& j) {
  RunRecord r;
  r.plan_hash = j.at("plan").get<std::string>();
  r.row = j.at("row").get<std::size_t>();
  r.replicate = j.value("replicate", std::size_t{1});
  for (const auto& [name, label] : j.at("factors").items()) {
    r.levels.emplace_back(name, label.get<std::string>());
  }
  if (const auto& m = j.at("metrics"); !m.is_null()) {
    r.metrics = TrialMetrics{m.at("ta").get<double>(), m.at("va").get<double>(),
                             m.at("tl").get<double>(), m.at("vl").get<double>()};
  }
  r.note = j.value("note", std::string{});
  r.started = j.value("started", std::string{});
  r.finished = j.value("finished", std::string{});
  r.runner_exit = j.value("exit", 0);
  r.source = j.value("source", std::string{"run"});
  return r;
}

// Appends lines to a file and fsyncs after each one.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
      throw Error(ErrorCode::config, "cannot open " + path.string() + ": " + std::strerror(errno));
    }
  }
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;
  ~JsonlWriter() {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_line(std::string line) {
    line += '\n';
    std::string_view rest = line;
    while (!rest.empty()) {
      const ssize_t n = ::write(fd_, rest.data(), rest.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::config, std::string("run log write failed: ") + std::strerror(errno));
      }
      rest.remove_prefix(static_cast<std::size_t>(n));
    }
    ::fsync(fd_);
  }

 private:
  int fd_ = -1;
};

enum class AddOutcome { appended, replaced, unchanged };

// Append-only log of RunRecords for one plan. The latest record per
// (row, replicate) wins; re-adding an identical outcome is a no-op.
// Optionally mirrored to a JSONL file. add() is safe to call from
// several threads.
class ResultStore {
 public:
  ResultStore(std::string plan_hash, std::size_t runs)
      : plan_hash_(std::move(plan_hash)), runs_(runs) {}

  ResultStore(const ResultStore& o)
      : plan_hash_(o.plan_hash_), runs_(o.runs_), log_(o.log_), latest_(o.latest_), writer_(o.writer_) {}
  ResultStore(ResultStore&& o) noexcept
      : plan_hash_(std::move(o.plan_hash_)),
        runs_(o.runs_),
        log_(std::move(o.log_)),
        latest_(std::move(o.latest_)),
        writer_(std::move(o.writer_)) {}

  static ResultStore for_plan(const DesignMatrix& m) { return ResultStore(plan_hash(m), m.runs()); }

  // Replays an existing log (if any) and mirrors future records into it.
  static ResultStore open(const std::filesystem::path& path, const DesignMatrix& m) {
    ResultStore store = for_plan(m);
    if (std::filesystem::exists(path)) {
      std::ifstream in(path);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (csv::trim(line).empty()) continue;
        RunRecord r;
        try {
          r = run_record_from_json(nlohmann::ordered_json::parse(line));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        store.add(std::move(r));
      }
    }
    store.writer_ = std::make_shared<JsonlWriter>(path);
    return store;
  }

  const std::string& plan() const { return plan_hash_; }
  std::size_t runs() const { return runs_; }

  AddOutcome add(RunRecord r) {
    if (r.plan_hash != plan_hash_) {
      throw Error(ErrorCode::config, "record for plan " + r.plan_hash + " rejected by store for plan " +
                                         plan_hash_);
    }
    if (r.row < 1 || r.row > runs_) {
      throw Error(ErrorCode::config, "row " + std::to_string(r.row) + " outside plan rows 1.." +
                                         std::to_string(runs_));
    }
    if (r.replicate < 1) throw Error(ErrorCode::config, "replicate index must be >= 1");
    if ((r.runner_exit == 0) != r.metrics.has_value()) {
      throw Error(ErrorCode::config, "row " + std::to_string(r.row) +
                                         ": metrics must be present exactly when the runner succeeded");
    }

    std::lock_guard lock(mutex_);
    const Key key{r.row, r.replicate};
    AddOutcome outcome = AddOutcome::appended;
    if (auto it = latest_.find(key); it != latest_.end()) {
      if (log_[it->second].same_outcome(r)) return AddOutcome::unchanged;
      outcome = AddOutcome::replaced;
    }
    if (writer_) writer_->write_line(to_json(r).dump());
    log_.push_back(std::move(r));
    latest_[key] = log_.size() - 1;
    return outcome;
  }

  const std::vector<RunRecord>& log() const { return log_; }

  // Latest record per (row, replicate), ordered by row then replicate.
  std::vector<RunRecord> latest() const {
    std::vector<RunRecord> out;
    for (const auto& [key, idx] : latest_) out.push_back(log_[idx]);
    return out;
  }

  std::size_t size() const { return latest_.size(); }
  bool empty() const { return latest_.empty(); }

  // Successful replicates per row (index = row - 1); empty = no usable result.
  std::vector<std::vector<TrialMetrics>> metrics_by_row() const {
    std::vector<std::vector<TrialMetrics>> out(runs_);
    for (const auto& [key, idx] : latest_) {
      const auto& r = log_[idx];
      if (r.succeeded()) out[key.first - 1].push_back(*r.metrics);
    }
    return out;
  }

  // 1-based rows whose latest record is a failure.
  std::vector<std::size_t> failed_rows() const {
    std::vector<std::size_t> out;
    for (const auto& [key, idx] : latest_) {
      if (!log_[idx].succeeded() && (out.empty() || out.back() != key.first)) out.push_back(key.first);
    }
    return out;
  }

 private:
  using Key = std::pair<std::size_t, std::size_t>;

  std::string plan_hash_;
  std::size_t runs_ = 0;
  std::vector<RunRecord> log_;
  std::map<Key, std::size_t> latest_;
  std::shared_ptr<JsonlWriter> writer_;
  mutable std::mutex mutex_;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t unchanged = 0;
  std::vector<std::string> rejected;  // one diagnostic per rejected row
};

namespace detail {

inline std::optional<double> parse_real(std::string_view s) {
  s = csv::trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_index(std::string_view s) {
  s = csv::trim(s);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// Results CSV: header `exp,ta,va,tl,vl` (any column order, optional
// `replicate`). Bad rows are rejected with a diagnostic; good rows land in
// the store.
inline IngestReport ingest_results(const DesignMatrix& m, std::string_view text, ResultStore& store) {
  IngestReport report;
  const auto records = csv::parse(text);
  if (records.empty()) return report;

  const auto& header = records.front();
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"exp", "ta", "va", "tl", "vl"}) {
    if (!col.count(need)) {
      throw Error(ErrorCode::parse, std::string("results csv: header lacks column '") + need +
                                        "' (expected exp,ta,va,tl,vl)");
    }
  }
  const bool has_replicate = col.count("replicate") > 0;
  const std::string now = utc_timestamp();

  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::string where = "results csv line " + std::to_string(i + 1);
    if (rec.size() != header.size()) {
      report.rejected.push_back(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                std::to_string(rec.size()));
      continue;
    }
    const auto row = detail::parse_index(rec[col["exp"]]);
    if (!row || *row < 1 || *row > m.runs()) {
      report.rejected.push_back(where + ": unknown row index '" + rec[col["exp"]] + "' (plan has rows 1.." +
                                std::to_string(m.runs()) + ")");
      continue;
    }
    std::size_t replicate = 1;
    if (has_replicate) {
      const auto rep = detail::parse_index(rec[col["replicate"]]);
      if (!rep || *rep < 1) {
        report.rejected.push_back(where + " (row " + std::to_string(*row) + "): bad replicate '" +
                                  rec[col["replicate"]] + "'");
        continue;
      }
      replicate = *rep;
    }

    TrialMetrics metrics;
    std::string bad;
    for (auto [name, slot] : {std::pair<const char*, double*>{"ta", &metrics.ta},
                              {"va", &metrics.va}, {"tl", &metrics.tl}, {"vl", &metrics.vl}}) {
      const auto v = detail::parse_real(rec[col[name]]);
      if (!v) {
        bad = std::string("field '") + name + "' is not a number: '" + rec[col[name]] + "'";
        break;
      }
      *slot = *v;
    }
    if (bad.empty()) bad = check_metrics(metrics);
    if (!bad.empty()) {
      report.rejected.push_back(where + " (row " + std::to_string(*row) + "): " + bad);
      continue;
    }

    RunRecord r;
    r.plan_hash = store.plan();
    r.row = *row;
    r.replicate = replicate;
    r.levels = row_levels(m, *row - 1);
    r.metrics = metrics;
    r.started = r.finished = now;
    r.source = "ingest";
    if (store.add(std::move(r)) == AddOutcome::unchanged) {
      ++report.unchanged;
    } else {
      ++report.accepted;
    }
  }
  return report;
}

inline ResultStore ingest_results(const DesignMatrix& m, std::string_view text) {
  ResultStore store = ResultStore::for_plan(m);
  const auto report = ingest_results(m, text, store);
  if (!report.rejected.empty()) throw Error(ErrorCode::degenerate, report.rejected.front());
  return store;
}

}  // namespace taguchi
