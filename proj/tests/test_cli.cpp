#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"
#include "taguchi/cli.hpp"

using namespace taguchi;
using test_support::slurp;
using test_support::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "taguchi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = taguchi::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const std::string fixture_csv = TAGUCHI_FIXTURE_CSV;

}  // namespace

TEST_CASE("design writes plan files deterministically", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  auto r = invoke({"design", "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("256×256") != std::string::npos);
  const auto csv1 = slurp(dir.path / "plan.csv");
  const auto json1 = slurp(dir.path / "plan.json");
  CHECK(import_plan(json1, PlanFormat::json) == test_support::cnn_plan());
  REQUIRE(invoke({"design", "--out", out}).code == 0);
  CHECK(slurp(dir.path / "plan.csv") == csv1);
  CHECK(slurp(dir.path / "plan.json") == json1);
}

TEST_CASE("twelve factors is a config error", "[cli]") {
  TempDir dir;
  std::string conf = "[factors]\n";
  for (int i = 0; i < 12; ++i) conf += "F" + std::to_string(i) + " = a, b\n";
  std::ofstream(dir.path / "c.conf") << conf;
  const auto r = invoke({"design", "--config", (dir.path / "c.conf").string(), "--out", dir.path.string()});
  CHECK(r.code == taguchi::cli::exit_config);
  CHECK(r.err.find("capacity") != std::string::npos);
}

TEST_CASE("ingest then analyze approach 3", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  auto r = invoke({"ingest", fixture_csv, "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ingested 12") != std::string::npos);
  r = invoke({"analyze", "--approach", "3", "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("1.58702") != std::string::npos);
  CHECK(r.out.find("-20.0902") != std::string::npos);
  CHECK(r.out.find("6.5838") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir.path / "approach3_analysis.json"));
  CHECK(j["prediction"]["levels"]["H-Flip"] == "True");

  // Re-ingesting the same file changes nothing.
  r = invoke({"ingest", fixture_csv, "--out", out});
  CHECK(r.code == 0);
  CHECK(r.out.find("12 unchanged") != std::string::npos);
}

TEST_CASE("analyze all emits five bundles from one store", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  REQUIRE(invoke({"ingest", fixture_csv, "--out", out}).code == 0);
  const auto r = invoke({"analyze", "--approach", "all", "--out", out});
  REQUIRE(r.code == 0);
  for (int k = 1; k <= 5; ++k) {
    CHECK(std::filesystem::exists(dir.path / ("approach" + std::to_string(k) + "_analysis.json")));
    CHECK(r.out.find("Approach " + std::to_string(k)) != std::string::npos);
  }
}

TEST_CASE("predict approach 2 picks Shuffle False", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  REQUIRE(invoke({"ingest", fixture_csv, "--out", out}).code == 0);
  const auto r = invoke({"predict", "--approach", "2", "--out", out});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  bool found = false;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("Shuffle", 0) == 0) {
      found = true;
      CHECK(line.find("False") != std::string::npos);
    }
  }
  CHECK(found);
  CHECK(r.out.find("13.6573") != std::string::npos);
}

TEST_CASE("analyze on an empty store is incomplete", "[cli]") {
  TempDir dir;
  const auto r = invoke({"analyze", "--out", dir.path.string()});
  CHECK(r.code == taguchi::cli::exit_incomplete);
}

TEST_CASE("rejected rows exit with the degenerate code", "[cli]") {
  TempDir dir;
  std::ofstream(dir.path / "bad.csv") << "exp,ta,va,tl,vl\n1,1.2,0.5,0.1,0.2\n2,0.9,0.8,0.1,0.2\n";
  const auto r = invoke({"ingest", (dir.path / "bad.csv").string(), "--out", dir.path.string()});
  CHECK(r.code == taguchi::cli::exit_degenerate);
  CHECK(r.err.find("row 1") != std::string::npos);
  CHECK(r.out.find("1 of 12") != std::string::npos);
}

TEST_CASE("degenerate metrics under a log approach exit 4", "[cli]") {
  TempDir dir;
  std::string csv = "exp,ta,va,tl,vl\n";
  for (int i = 1; i <= 12; ++i) csv += std::to_string(i) + ",0.9,0.8," + (i == 7 ? "0" : "0.1") + ",0.2\n";
  std::ofstream(dir.path / "z.csv") << csv;
  REQUIRE(invoke({"ingest", (dir.path / "z.csv").string(), "--out", dir.path.string()}).code == 0);
  CHECK(invoke({"analyze", "--approach", "1", "--out", dir.path.string()}).code == 0);
  const auto r = invoke({"analyze", "--approach", "4", "--out", dir.path.string()});
  CHECK(r.code == taguchi::cli::exit_degenerate);
  CHECK(r.err.find("row 7") != std::string::npos);
}

TEST_CASE("missing rows need the explicit flag", "[cli]") {
  TempDir dir;
  const auto text = slurp(fixture_csv);
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);  // drop row 12
  std::ofstream(dir.path / "eleven.csv") << cut;
  const auto out = dir.path.string();
  REQUIRE(invoke({"ingest", (dir.path / "eleven.csv").string(), "--out", out}).code == 0);
  auto r = invoke({"analyze", "--approach", "1", "--out", out});
  CHECK(r.code == taguchi::cli::exit_incomplete);
  CHECK(r.err.find("12") != std::string::npos);
  r = invoke({"report", "--approach", "1", "--allow-missing-rows", "--format", "csv", "--out", out});
  CHECK(r.code == 0);
  CHECK(slurp(dir.path / "approach1_snr.csv").find("excluded from analysis: 12") != std::string::npos);
}

TEST_CASE("report writes tables and plot data", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  REQUIRE(invoke({"ingest", fixture_csv, "--out", out}).code == 0);
  const auto r = invoke({"report", "--format", "markdown", "--out", out});
  REQUIRE(r.code == 0);
  for (int k = 1; k <= 5; ++k) {
    const std::string p = "approach" + std::to_string(k);
    CHECK(std::filesystem::exists(dir.path / (p + "_snr.md")));
    CHECK(std::filesystem::exists(dir.path / (p + "_prediction.md")));
    CHECK(std::filesystem::exists(dir.path / (p + "_interactions.csv")));
  }
}

TEST_CASE("report on an empty store writes a no-results document", "[cli]") {
  TempDir dir;
  const auto r = invoke({"report", "--approach", "1", "--out", dir.path.string()});
  CHECK(r.code == taguchi::cli::exit_incomplete);
  CHECK(slurp(dir.path / "approach1_report.txt").find("no results") != std::string::npos);
}

TEST_CASE("pipeline is deterministic end to end", "[cli]") {
  auto run_all = [](const std::filesystem::path& d) {
    const auto out = d.string();
    invoke({"design", "--out", out});
    invoke({"ingest", fixture_csv, "--out", out});
    std::string text = invoke({"analyze", "--out", out}).out + invoke({"predict", "--out", out}).out;
    invoke({"report", "--format", "csv", "--out", out});
    for (const auto& e : std::filesystem::directory_iterator(d)) {
      if (e.path().extension() == ".csv" || e.path().extension() == ".json") text += slurp(e.path());
    }
    return text;
  };
  TempDir a, b;
  CHECK(run_all(a.path) == run_all(b.path));
}

TEST_CASE("flags override weights and base", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  REQUIRE(invoke({"ingest", fixture_csv, "--out", out}).code == 0);
  auto r = invoke({"analyze", "--approach", "3", "--weights", "3=0.33,0.33,0.34", "--out", out});
  CHECK(r.code == 0);
  CHECK(r.out.find("1.58702") == std::string::npos);
  r = invoke({"analyze", "--approach", "3", "--log-base", "1.5", "--out", out});
  CHECK(r.code == taguchi::cli::exit_config);
  r = invoke({"analyze", "--approach", "3", "--weights", "3=0.33,0.33,0.33", "--out", out});
  CHECK(r.code == taguchi::cli::exit_config);
}

TEST_CASE("run drives the runner and records failures", "[cli]") {
  TempDir dir;
  const auto out = dir.path.string();
  const std::string runner = std::string("'") + TAGUCHI_FAKE_RUNNER + "'";
  auto r = invoke({"run", "--runner-cmd", runner + " --fail-row 6", "--parallelism", "3", "--out", out});
  CHECK(r.code == taguchi::cli::exit_runner);
  CHECK(r.out.find("11 trial(s) succeeded, 1 failed") != std::string::npos);
  CHECK(invoke({"analyze", "--approach", "3", "--out", out}).code == taguchi::cli::exit_incomplete);
  r = invoke({"run", "--runner-cmd", runner, "--rows", "6", "--out", out});
  CHECK(r.code == 0);
  CHECK(invoke({"analyze", "--approach", "3", "--out", out}).code == 0);
  CHECK(std::filesystem::exists(dir.path / "runner.log"));
}

TEST_CASE("run without a command is a config error", "[cli]") {
  TempDir dir;
  CHECK(invoke({"run", "--out", dir.path.string()}).code == taguchi::cli::exit_config);
}

TEST_CASE("usage errors", "[cli]") {
  CHECK(invoke({}).code == taguchi::cli::exit_config);
  CHECK(invoke({"frobnicate"}).code == taguchi::cli::exit_config);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("installed binary runs", "[cli]") {
  TempDir dir;
  const auto cmd = std::string("'") + TAGUCHI_CLI + "' design --out '" + dir.path.string() + "' > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(std::filesystem::exists(dir.path / "plan.json"));
}
