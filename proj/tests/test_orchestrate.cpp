#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <mutex>

#include "support.hpp"

using namespace taguchi;
using test_support::cnn_plan;
using test_support::TempDir;

namespace {

const std::string runner = TAGUCHI_FAKE_RUNNER;

RunOptions opts(std::string extra = {}, std::size_t parallelism = 1) {
  RunOptions o;
  o.command = "'" + runner + "'" + (extra.empty() ? "" : " " + extra);
  o.parallelism = parallelism;
  return o;
}

// Store content without timestamps, in key order.
std::string content(const ResultStore& s) {
  std::string out;
  for (auto r : s.latest()) {
    r.started.clear();
    r.finished.clear();
    out += to_json(r).dump() + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("trial request wire format", "[orchestrate]") {
  const auto m = cnn_plan();
  const auto j = nlohmann::json::parse(trial_request(m, 1, 1, false));
  CHECK(j["row"] == 1);
  CHECK(j["factors"]["Image Size"] == "256×256");
  CHECK(j["factors"]["H-Flip"] == "True");
  CHECK(j["factors"].size() == 8);
  CHECK_FALSE(j.contains("replicate"));
  CHECK(nlohmann::json::parse(trial_request(m, 2, 3, true))["replicate"] == 3);
}

TEST_CASE("runner output parsing", "[orchestrate]") {
  auto p = parse_runner_output("epoch 1\n{\"ta\":0.9,\"va\":0.8,\"tl\":0.1,\"vl\":0.2}\ndone\n");
  REQUIRE(p.metrics);
  CHECK(p.metrics->va == 0.8);
  CHECK(p.other_lines == std::vector<std::string>{"epoch 1", "done"});

  p = parse_runner_output("{\n  \"ta\": 0.5, \"va\": 0.5,\n  \"tl\": 1, \"vl\": 2\n}\n");
  REQUIRE(p.metrics);
  CHECK(p.metrics->vl == 2.0);

  CHECK_FALSE(parse_runner_output("nothing").metrics);
  CHECK_FALSE(parse_runner_output("{\"ta\":1}").metrics);
  const auto two = parse_runner_output("{\"ta\":1,\"va\":1,\"tl\":1,\"vl\":1}\n{\"ta\":1,\"va\":1,\"tl\":1,\"vl\":1}\n");
  CHECK_FALSE(two.metrics);
  CHECK(two.diagnostic.find("found 2") != std::string::npos);
  const auto range = parse_runner_output("{\"ta\":1.2,\"va\":1,\"tl\":1,\"vl\":1}");
  CHECK_FALSE(range.metrics);
  CHECK(range.diagnostic.find("ta") != std::string::npos);
}

TEST_CASE("full L12 run gives 12 successful records", "[orchestrate]") {
  const auto m = cnn_plan();
  const auto store = run_plan(m, opts());
  REQUIRE(store.size() == 12);
  for (const auto& r : store.latest()) {
    CHECK(r.succeeded());
    CHECK(std::isfinite(r.metrics->ta));
    CHECK(std::isfinite(r.metrics->vl));
    CHECK(r.levels.size() == 8);
  }
  // The surface makes learning rate the strongest factor.
  const auto t = ResponseTable::from_metrics(m, store.metrics_by_row(), Approach::log_combined);
  CHECK(main_effects(t, EffectBasis::snr).factors[fixture::learning_rate_column].rank == 1);
}

TEST_CASE("failing row is recorded and blocks analysis", "[orchestrate]") {
  const auto m = cnn_plan();
  auto store = ResultStore::for_plan(m);
  const auto summary = run_plan(m, opts("--fail-row 6"), store);
  CHECK(summary.succeeded == 11);
  CHECK(summary.failed == 1);
  CHECK(store.failed_rows() == std::vector<std::size_t>{6});
  const auto failed = store.latest()[5];
  CHECK(failed.runner_exit == 3);
  CHECK_FALSE(failed.metrics);

  const auto t = ResponseTable::from_metrics(m, store.metrics_by_row(), Approach::accuracy);
  CHECK_THROWS_AS(analyze(t), Error);
  CHECK_NOTHROW(analyze(ResponseTable::from_metrics(m, store.metrics_by_row(), Approach::accuracy, {}, true)));

  // Re-running row 6 completes the store.
  auto rerun = opts();
  rerun.rows = {6};
  const auto s2 = run_plan(m, rerun, store);
  CHECK(s2.succeeded == 1);
  CHECK(s2.warnings.size() == 1);
  CHECK(store.failed_rows().empty());
  CHECK_NOTHROW(analyze(ResponseTable::from_metrics(m, store.metrics_by_row(), Approach::accuracy)));
}

TEST_CASE("parallelism 1 and 4 give identical stores", "[orchestrate]") {
  const auto m = cnn_plan();
  const auto serial = run_plan(m, opts("--sleep-ms 20", 1));
  const auto parallel = run_plan(m, opts("--sleep-ms 20", 4));
  CHECK(content(serial) == content(parallel));
}

TEST_CASE("malformed and duplicated metrics fail with diagnostics", "[orchestrate]") {
  const auto m = cnn_plan();
  auto store = ResultStore::for_plan(m);
  run_plan(m, opts("--garbage-row 2 --double-row 3 --ta-over-row 4"), store);
  CHECK(store.failed_rows() == std::vector<std::size_t>{2, 3, 4});
  const auto latest = store.latest();
  CHECK(latest[1].runner_exit == exit_protocol_error);
  CHECK(latest[1].note.find("found 0") != std::string::npos);
  CHECK(latest[2].note.find("found 2") != std::string::npos);
  CHECK(latest[3].note.find("ta") != std::string::npos);
}

TEST_CASE("timeout kills the trial", "[orchestrate]") {
  const auto m = cnn_plan();
  auto o = opts("--sleep-ms 5000");
  o.rows = {1};
  o.timeout = std::chrono::milliseconds(200);
  const auto start = std::chrono::steady_clock::now();
  const auto store = run_plan(m, o);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));
  REQUIRE(store.size() == 1);
  CHECK(store.latest()[0].runner_exit == exit_timed_out);
}

TEST_CASE("runner output is logged verbatim and tagged", "[orchestrate]") {
  const auto m = cnn_plan();
  std::vector<std::string> lines;
  auto o = opts("--chatter");
  o.rows = {2};
  o.log = [&](std::string_view l) { lines.emplace_back(l); };
  run_plan(m, o);
  CHECK(std::find(lines.begin(), lines.end(), "[row 2] stdout: epoch 1/10 loss=0.5") != lines.end());
  CHECK(std::find(lines.begin(), lines.end(), "[row 2] stderr: done") != lines.end());
}

TEST_CASE("working directory from option and environment", "[orchestrate]") {
  TempDir dir;
  const auto m = cnn_plan();
  std::vector<std::string> lines;
  auto o = opts("--report-cwd");
  o.rows = {1};
  o.log = [&](std::string_view l) { lines.emplace_back(l); };
  const auto want = "[row 1] stderr: cwd=" + std::filesystem::canonical(dir.path).string();

  ::setenv(runner_cwd_env, dir.path.c_str(), 1);
  run_plan(m, o);
  ::unsetenv(runner_cwd_env);
  CHECK(std::find(lines.begin(), lines.end(), want) != lines.end());

  lines.clear();
  o.working_dir = dir.path;
  run_plan(m, o);
  CHECK(std::find(lines.begin(), lines.end(), want) != lines.end());
}

TEST_CASE("replicates send the replicate index and key separately", "[orchestrate]") {
  const auto m = cnn_plan();
  auto o = opts();
  o.replicates = 2;
  o.rows = {1, 2};
  const auto store = run_plan(m, o);
  CHECK(store.size() == 4);
  CHECK(store.metrics_by_row()[0].size() == 2);
}

TEST_CASE("bad options and unknown commands", "[orchestrate]") {
  const auto m = cnn_plan();
  RunOptions o;
  CHECK_THROWS_AS(run_plan(m, o), Error);
  o.command = "/nonexistent/runner";
  const auto store = run_plan(m, o);
  CHECK(store.failed_rows().size() == 12);
  CHECK(store.latest()[0].runner_exit == 127);
  auto bad_rows = opts();
  bad_rows.rows = {13};
  CHECK_THROWS_AS(run_plan(m, bad_rows), Error);
}

TEST_CASE("run log is mirrored to disk", "[orchestrate]") {
  TempDir dir;
  const auto m = cnn_plan();
  {
    auto store = ResultStore::open(dir.path / "runs.jsonl", m);
    run_plan(m, opts("", 3), store);
  }
  const auto back = ResultStore::open(dir.path / "runs.jsonl", m);
  CHECK(back.size() == 12);
  CHECK(back.failed_rows().empty());
}
