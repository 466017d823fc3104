#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "taguchi/analysis.hpp"
#include "taguchi/config.hpp"
#include "taguchi/design.hpp"
#include "taguchi/error.hpp"
#include "taguchi/orchestrate.hpp"
#include "taguchi/report.hpp"
#include "taguchi/store.hpp"

namespace taguchi::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_incomplete = 3,
  exit_degenerate = 4,
  exit_runner = 5,
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::incomplete: return exit_incomplete;
    case ErrorCode::degenerate: return exit_degenerate;
    case ErrorCode::runner: return exit_runner;
    default: return exit_config;
  }
}

inline constexpr const char* plan_json_name = "plan.json";
inline constexpr const char* plan_csv_name = "plan.csv";
inline constexpr const char* run_log_name = "runs.jsonl";
inline constexpr const char* runner_log_name = "runner.log";

// Command-line values layered over the config file.
struct Options {
  std::string config_path;
  std::optional<std::string> approach;
  std::optional<double> log_base;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> out;
  std::optional<std::string> runner_cmd;
  std::optional<double> timeout_s;
  std::optional<std::size_t> replicates;
  std::optional<std::string> approach5_accuracy;
  std::vector<std::string> weights;
  bool allow_missing_rows = false;
  std::string results_file;
  std::string format = "text";
  std::vector<std::size_t> rows;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::config, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::config, "cannot write " + p.string());
  out << content;
}

inline ProjectConfig resolve_config(const Options& o) {
  ProjectConfig cfg;
  if (!o.config_path.empty()) cfg = parse_config(read_file(o.config_path));
  if (o.approach) cfg.approaches = parse_approach_selection(*o.approach);
  if (o.log_base) cfg.response.log_base = *o.log_base;
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (o.out) cfg.out = *o.out;
  if (o.runner_cmd) cfg.runner_cmd = *o.runner_cmd;
  if (o.timeout_s) {
    if (*o.timeout_s < 0) throw Error(ErrorCode::config, "--timeout must be >= 0");
    cfg.timeout = *o.timeout_s == 0
                      ? std::nullopt
                      : std::optional(std::chrono::milliseconds(static_cast<long long>(*o.timeout_s * 1000)));
  }
  if (o.replicates) cfg.replicates = *o.replicates;
  if (o.approach5_accuracy) cfg.response.approach5_accuracy = parse_accuracy_term(*o.approach5_accuracy);
  for (const auto& w : o.weights) apply_weight_override(cfg.response, w);
  if (o.allow_missing_rows) cfg.allow_missing_rows = true;
  cfg.validate();
  return cfg;
}

// The plan in the output directory, or a fresh L12 for the configured factors.
inline DesignMatrix load_plan(const ProjectConfig& cfg) {
  const auto path = cfg.out / plan_json_name;
  if (std::filesystem::exists(path)) return import_plan(read_file(path), PlanFormat::json);
  return build_l12(cfg.factors);
}

inline void save_plan(const ProjectConfig& cfg, const DesignMatrix& plan) {
  write_file(cfg.out / plan_json_name, export_plan(plan, PlanFormat::json));
  write_file(cfg.out / plan_csv_name, export_plan(plan, PlanFormat::csv));
}

inline TextTable plan_table(const DesignMatrix& plan) {
  TextTable t;
  t.name = "plan";
  t.title = "L" + std::to_string(plan.runs()) + " plan";
  t.header = {"Exp"};
  for (const auto& f : plan.factors()) t.header.push_back(f.name);
  for (std::size_t r = 0; r < plan.runs(); ++r) {
    std::vector<std::string> row{std::to_string(r + 1)};
    for (std::size_t c = 0; c < plan.factor_count(); ++c) row.push_back(plan.label(r, c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline ResponseTable response_table(const DesignMatrix& plan, const ResultStore& store, Approach a,
                                    const ProjectConfig& cfg) {
  return ResponseTable::from_metrics(plan, store.metrics_by_row(), a, cfg.response, cfg.allow_missing_rows);
}

inline nlohmann::ordered_json analysis_json(const DesignMatrix& plan, const AnalysisBundle& b,
                                            const std::vector<std::size_t>& excluded) {
  nlohmann::ordered_json j;
  j["approach"] = number(b.approach);
  j["direction"] = direction_of(b.approach) == Direction::larger_is_better ? "larger" : "smaller";
  auto ex = nlohmann::ordered_json::array();
  for (std::size_t r : excluded) ex.push_back(r + 1);
  j["excluded_rows"] = ex;
  auto effects = [&](const MainEffects& e) {
    nlohmann::ordered_json out;
    out["grand_mean"] = e.grand_mean;
    out["factors"] = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < e.factors.size(); ++f) {
      const auto& fe = e.factors[f];
      out["factors"].push_back({{"factor", plan.factors()[f].name},
                                {"level_means", {fe.level_means[0], fe.level_means[1]}},
                                {"delta", fe.delta},
                                {"rank", fe.rank}});
    }
    return out;
  };
  j["main_effects_snr"] = effects(b.effects_snr);
  j["main_effects_means"] = effects(b.effects_means);
  if (b.anova) {
    auto& a = j["anova"];
    a["factors"] = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < b.anova->factors.size(); ++f) {
      const auto& t = b.anova->factors[f];
      a["factors"].push_back({{"factor", plan.factors()[f].name}, {"df", t.df}, {"ss", t.ss},
                              {"ms", t.ms}, {"f", t.f}, {"p", t.p}});
    }
    a["error"] = {{"df", b.anova->error.df}, {"ss", b.anova->error.ss}, {"ms", b.anova->error.ms}};
    a["total"] = {{"df", b.anova->total.df}, {"ss", b.anova->total.ss}};
  } else {
    j["anova"] = nullptr;
  }
  j["regression"]["intercept"] = b.regression.intercept;
  j["regression"]["coefficients"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < b.regression.half_effects.size(); ++f) {
    const auto& factor = plan.factors()[f];
    j["regression"]["coefficients"].push_back(
        {{"factor", factor.name},
         {factor.levels[0], b.regression.coefficient(f, Level::one)},
         {factor.levels[1], b.regression.coefficient(f, Level::two)}});
  }
  auto& p = j["prediction"];
  p["levels"] = nlohmann::ordered_json::object();
  for (std::size_t f = 0; f < b.prediction.chosen.size(); ++f) {
    p["levels"][plan.factors()[f].name] = plan.factors()[f].label(b.prediction.chosen[f]);
  }
  p["predicted_snr"] = b.prediction.predicted_snr;
  p["predicted_response"] = b.prediction.predicted_response;
  p["mean_optimal_response"] = b.prediction.mean_optimal_response;
  auto ties = nlohmann::ordered_json::array();
  for (std::size_t f : b.prediction.ties) ties.push_back(plan.factors()[f].name);
  p["ties"] = ties;
  return j;
}

inline int cmd_design(const Options& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto plan = build_l12(cfg.factors);
  save_plan(cfg, plan);
  out << render(plan_table(plan), TableFormat::text);
  out << "wrote " << (cfg.out / plan_csv_name).string() << " and " << (cfg.out / plan_json_name).string()
      << "\n";
  return exit_ok;
}

inline int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_config(o);
  if (cfg.runner_cmd.empty()) throw Error(ErrorCode::config, "no runner command (--runner-cmd or runner_cmd)");
  const auto plan = load_plan(cfg);
  save_plan(cfg, plan);
  auto store = ResultStore::open(cfg.out / run_log_name, plan);

  std::ofstream runner_log(cfg.out / runner_log_name, std::ios::app);
  RunOptions ro;
  ro.command = cfg.runner_cmd;
  ro.parallelism = cfg.parallelism;
  ro.timeout = cfg.timeout;
  ro.replicates = cfg.replicates;
  ro.rows = o.rows;
  ro.log = [&](std::string_view line) {
    runner_log << line << "\n";
    if (line.rfind("warning:", 0) == 0) err << line << "\n";
  };
  const auto summary = run_plan(plan, ro, store);
  runner_log.flush();

  out << summary.succeeded << " trial(s) succeeded, " << summary.failed << " failed\n";
  for (std::size_t r : store.failed_rows()) {
    for (const auto& rec : store.latest()) {
      if (rec.row == r && !rec.succeeded()) err << "row " << r << ": " << rec.note << "\n";
    }
  }
  return summary.failed > 0 ? exit_runner : exit_ok;
}

inline int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_config(o);
  const auto plan = load_plan(cfg);
  save_plan(cfg, plan);
  auto store = ResultStore::open(cfg.out / run_log_name, plan);
  const auto report = ingest_results(plan, read_file(o.results_file), store);
  out << "ingested " << report.accepted << " row(s)";
  if (report.unchanged) out << ", " << report.unchanged << " unchanged";
  out << "; store holds " << store.size() << " of " << plan.runs() << " rows\n";
  for (const auto& d : report.rejected) err << "rejected: " << d << "\n";
  return report.rejected.empty() ? exit_ok : exit_degenerate;
}

inline int cmd_analyze(const Options& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto plan = load_plan(cfg);
  const auto store = ResultStore::open(cfg.out / run_log_name, plan);
  for (Approach a : cfg.approaches) {
    const auto table = response_table(plan, store, a, cfg);
    const auto bundle = make_report_bundle(table);
    if (!bundle.has_results()) throw Error(ErrorCode::incomplete, "no results in store");
    out << render_tables(bundle, TableFormat::text) << "\n";
    const auto analysis = analyze(table);
    write_file(cfg.out / ("approach" + std::to_string(number(a)) + "_analysis.json"),
               analysis_json(plan, analysis, table.excluded()).dump(2) + "\n");
  }
  return exit_ok;
}

inline int cmd_predict(const Options& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto plan = load_plan(cfg);
  const auto store = ResultStore::open(cfg.out / run_log_name, plan);
  for (Approach a : cfg.approaches) {
    const auto table = response_table(plan, store, a, cfg);
    const auto bundle = make_report_bundle(table);
    if (!bundle.has_results()) throw Error(ErrorCode::incomplete, "no results in store");
    out << render(report_tables(bundle).back(), TableFormat::text) << "\n";
  }
  return exit_ok;
}

inline int cmd_report(const Options& o, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto format = parse_table_format(o.format);
  const auto plan = load_plan(cfg);
  const auto store = ResultStore::open(cfg.out / run_log_name, plan);
  bool empty = false;
  for (Approach a : cfg.approaches) {
    const auto bundle = make_report_bundle(response_table(plan, store, a, cfg));
    auto files = report_files(bundle, format);
    if (bundle.has_results()) {
      for (auto& f : emit_plot_data(bundle)) files.push_back(std::move(f));
    } else {
      empty = true;
    }
    for (const auto& f : files) {
      write_file(cfg.out / f.name, f.content);
      out << "wrote " << (cfg.out / f.name).string() << "\n";
    }
  }
  return empty ? exit_incomplete : exit_ok;
}

// Entry point shared by the taguchi executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Taguchi orthogonal-array hyperparameter experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Project config file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory (plan, run log, reports)");
  };
  auto analysis_flags = [&](CLI::App* sub) {
    sub->add_option("--approach", o.approach, "Approach 1..5, a list, or 'all'");
    sub->add_option("--log-base", o.log_base, "Base of the loss log transform, in (0,1)");
    sub->add_option("--weights", o.weights, "Weight override, e.g. 3=1/3,1/3,1/3 (repeatable)");
    sub->add_option("--approach5-accuracy", o.approach5_accuracy, "Approach 5 accuracy term: linear|log");
    sub->add_flag("--allow-missing-rows", o.allow_missing_rows,
                  "Analyze with absent rows excluded (recorded in the report)");
  };

  auto* design = app.add_subcommand("design", "Write the L12 plan (CSV + JSON)");
  common(design);

  auto* run = app.add_subcommand("run", "Execute the plan through an external trial runner");
  common(run);
  run->add_option("--runner-cmd", o.runner_cmd, "Shell command speaking the runner protocol");
  run->add_option("--parallelism", o.parallelism, "Trials in flight")->check(CLI::PositiveNumber);
  run->add_option("--timeout", o.timeout_s, "Per-trial timeout in seconds (0 = none)");
  run->add_option("--replicates", o.replicates, "Runs per row")->check(CLI::PositiveNumber);
  run->add_option("--rows", o.rows, "Only these 1-based rows")->delimiter(',');

  auto* ingest = app.add_subcommand("ingest", "Load externally produced metrics (exp,ta,va,tl,vl)");
  common(ingest);
  ingest->add_option("results", o.results_file, "Results CSV")->required()->check(CLI::ExistingFile);

  auto* analyze_cmd = app.add_subcommand("analyze", "Main effects, ANOVA, regression per approach");
  common(analyze_cmd);
  analysis_flags(analyze_cmd);

  auto* predict = app.add_subcommand("predict", "Optimal configuration per approach");
  common(predict);
  analysis_flags(predict);

  auto* report = app.add_subcommand("report", "Write tables and plot data files");
  common(report);
  analysis_flags(report);
  report->add_option("--format", o.format, "text|csv|markdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream cli_out, cli_err;
    const int rc = app.exit(e, cli_out, cli_err);
    out << cli_out.str();
    err << cli_err.str();
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (*design) return cmd_design(o, out);
    if (*run) return cmd_run(o, out, err);
    if (*ingest) return cmd_ingest(o, out, err);
    if (*analyze_cmd) return cmd_analyze(o, out);
    if (*predict) return cmd_predict(o, out);
    if (*report) return cmd_report(o, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
  return exit_config;
}

}  // namespace taguchi::cli
