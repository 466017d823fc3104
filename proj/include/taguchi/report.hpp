#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "taguchi/analysis.hpp"
#include "taguchi/csv.hpp"
#include "taguchi/design.hpp"
#include "taguchi/error.hpp"
#include "taguchi/response.hpp"

namespace taguchi {

// Display precision. Internal values stay at full precision.
namespace digits {
inline constexpr int metric = 4;
inline constexpr int response = 5;
inline constexpr int snr = 4;
inline constexpr int f_value = 2;
inline constexpr int p_value = 3;
}  // namespace digits

inline std::string fixed(double v, int places) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  std::string s = buf;
  // "-0.000" -> "0.000"
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

struct TextTable {
  std::string name;   // file stem, e.g. "snr"
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
};

enum class TableFormat { text, csv, markdown };

inline TableFormat parse_table_format(std::string_view tag) {
  if (tag == "text") return TableFormat::text;
  if (tag == "csv") return TableFormat::csv;
  if (tag == "markdown" || tag == "md") return TableFormat::markdown;
  throw Error(ErrorCode::config, "unknown table format '" + std::string(tag) + "'");
}

inline const char* extension(TableFormat f) {
  switch (f) {
    case TableFormat::text: return "txt";
    case TableFormat::csv: return "csv";
    case TableFormat::markdown: return "md";
  }
  return "txt";
}

namespace detail {

inline std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

inline std::string pad(const std::string& s, std::size_t width, bool right_align) {
  const std::size_t w = display_width(s);
  if (w >= width) return s;
  const std::string fill(width - w, ' ');
  return right_align ? fill + s : s + fill;
}

}  // namespace detail

inline std::string render(const TextTable& t, TableFormat format) {
  std::string out;
  switch (format) {
    case TableFormat::csv: {
      out += csv::join(t.header) + "\n";
      for (const auto& r : t.rows) out += csv::join(r) + "\n";
      for (const auto& n : t.notes) out += "# " + n + "\n";
      return out;
    }
    case TableFormat::markdown: {
      out += "### " + t.title + "\n\n";
      auto line = [](const std::vector<std::string>& cells) {
        std::string l = "|";
        for (const auto& c : cells) l += " " + c + " |";
        return l + "\n";
      };
      out += line(t.header);
      out += "|";
      for (std::size_t i = 0; i < t.header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
      out += "\n";
      for (const auto& r : t.rows) out += line(r);
      if (!t.notes.empty()) out += "\n";
      for (const auto& n : t.notes) out += "_" + n + "_\n";
      return out;
    }
    case TableFormat::text: {
      std::vector<std::size_t> width(t.header.size(), 0);
      auto measure = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size() && i < width.size(); ++i) {
          width[i] = std::max(width[i], detail::display_width(cells[i]));
        }
      };
      measure(t.header);
      for (const auto& r : t.rows) measure(r);
      auto line = [&](const std::vector<std::string>& cells) {
        std::string l;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (i) l += "  ";
          l += detail::pad(cells[i], i < width.size() ? width[i] : 0, i > 0);
        }
        while (!l.empty() && l.back() == ' ') l.pop_back();
        return l + "\n";
      };
      out += t.title + "\n";
      out += line(t.header);
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      total += width.empty() ? 0 : 2 * (width.size() - 1);
      out += std::string(total, '-') + "\n";
      for (const auto& r : t.rows) out += line(r);
      for (const auto& n : t.notes) out += "  " + n + "\n";
      return out;
    }
  }
  return out;
}

// Everything needed to render one approach's report. Sections are absent
// when no results exist or, for ANOVA, when the design is saturated.
struct ReportBundle {
  DesignMatrix matrix;
  Approach approach = Approach::accuracy;
  std::vector<std::optional<RowResult>> rows;
  std::vector<std::size_t> excluded;
  std::optional<MainEffects> effects_means;
  std::optional<MainEffects> effects_snr;
  std::optional<AnovaTable> anova;
  std::optional<RegressionModel> regression;
  std::optional<OptimalPrediction> prediction;
  std::optional<std::vector<InteractionTable>> interactions;
  bool saturated = false;  // no error degrees of freedom, so no ANOVA

  bool has_results() const {
    return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.has_value(); });
  }

  std::vector<std::string> missing_sections() const {
    std::vector<std::string> out;
    if (!has_results()) out.push_back("snr_table");
    if (!effects_means) out.push_back("main_effects_means");
    if (!effects_snr) out.push_back("main_effects_snr");
    if (!anova && !saturated) out.push_back("anova");
    if (!regression) out.push_back("regression");
    if (!prediction) out.push_back("prediction");
    if (!interactions) out.push_back("interactions");
    return out;
  }
};

// A table with no present rows yields an empty bundle (rendered as "no
// results"); otherwise every analysis runs and missing rows raise.
inline ReportBundle make_report_bundle(const ResponseTable& table) {
  ReportBundle b;
  b.matrix = table.matrix();
  b.approach = table.approach();
  b.rows = table.rows();
  b.excluded = table.excluded();
  if (table.present_rows().empty()) return b;
  const AnalysisBundle a = analyze(table);
  b.saturated = !a.anova.has_value();
  b.effects_means = a.effects_means;
  b.effects_snr = a.effects_snr;
  b.anova = a.anova;
  b.regression = a.regression;
  b.prediction = a.prediction;
  b.interactions = a.interactions;
  return b;
}

namespace detail {

inline std::string approach_title(Approach a) {
  switch (a) {
    case Approach::accuracy: return "Approach 1 (mean accuracy, larger-the-better)";
    case Approach::loss: return "Approach 2 (mean loss, smaller-the-better)";
    case Approach::log_combined: return "Approach 3 (accuracies + log mean loss, larger-the-better)";
    case Approach::log_individual: return "Approach 4 (accuracies + log losses, larger-the-better)";
    case Approach::log_unified: return "Approach 5 (mean accuracy + log mean loss, larger-the-better)";
  }
  return "Approach";
}

inline std::string row_list(const std::vector<std::size_t>& rows0) {
  std::string s;
  for (std::size_t r : rows0) s += (s.empty() ? "" : ", ") + std::to_string(r + 1);
  return s;
}

inline TextTable snr_table(const ReportBundle& b) {
  TextTable t;
  t.name = "snr";
  t.title = detail::approach_title(b.approach) + ": responses and SNR";
  const bool show_acc = b.approach != Approach::loss;
  const bool show_loss = b.approach != Approach::accuracy;
  const bool replicated = std::any_of(b.rows.begin(), b.rows.end(), [](const auto& r) {
    return r && r->replicates.size() > 1;
  });

  t.header = {"Exp"};
  if (replicated) t.header.push_back("n");
  if (show_acc) t.header.insert(t.header.end(), {"TA", "VA"});
  if (show_loss) t.header.insert(t.header.end(), {"TL", "VL"});
  t.header.insert(t.header.end(), {"Response", "SNR (dB)", "Mean", "Rank"});

  // Rank by SNR, highest first; equal SNRs keep row order.
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < b.rows.size(); ++r) {
    if (b.rows[r]) order.push_back(r);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return b.rows[x]->snr > b.rows[y]->snr; });
  std::vector<std::size_t> rank(b.rows.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i + 1;

  for (std::size_t r = 0; r < b.rows.size(); ++r) {
    std::vector<std::string> cells{std::to_string(r + 1)};
    const auto& row = b.rows[r];
    if (!row) {
      const bool excl = std::binary_search(b.excluded.begin(), b.excluded.end(), r);
      while (cells.size() < t.header.size()) cells.push_back(excl ? "excluded" : "missing");
      t.rows.push_back(std::move(cells));
      continue;
    }
    TrialMetrics avg{};
    for (const auto& m : row->replicates) {
      avg.ta += m.ta;
      avg.va += m.va;
      avg.tl += m.tl;
      avg.vl += m.vl;
    }
    const double n = static_cast<double>(std::max<std::size_t>(row->replicates.size(), 1));
    if (replicated) cells.push_back(std::to_string(row->replicates.size()));
    if (show_acc) {
      cells.push_back(fixed(avg.ta / n, digits::metric));
      cells.push_back(fixed(avg.va / n, digits::metric));
    }
    if (show_loss) {
      cells.push_back(fixed(avg.tl / n, digits::metric));
      cells.push_back(fixed(avg.vl / n, digits::metric));
    }
    const double response = row->responses.empty() ? row->mean_response : row->responses.front();
    cells.push_back(row->responses.size() > 1 ? "-" : fixed(response, digits::response));
    cells.push_back(fixed(row->snr, digits::snr));
    cells.push_back(fixed(row->mean_response, digits::response));
    cells.push_back(std::to_string(rank[r]));
    t.rows.push_back(std::move(cells));
  }
  t.notes.push_back("Rank orders rows by SNR, highest first.");
  if (!b.excluded.empty()) t.notes.push_back("Rows excluded from analysis: " + row_list(b.excluded) + ".");
  return t;
}

inline TextTable main_effects_table(const ReportBundle& b, const MainEffects& e) {
  const bool on_snr = e.basis == EffectBasis::snr;
  const int places = on_snr ? digits::snr : digits::response;
  TextTable t;
  t.name = on_snr ? "main_effects_snr" : "main_effects_means";
  t.title = detail::approach_title(b.approach) + (on_snr ? ": response table for SNR" : ": response table for means");
  t.header = {"Level"};
  for (const auto& f : b.matrix.factors()) t.header.push_back(f.name);
  std::vector<std::string> l1{"1"}, l2{"2"}, delta{"Delta"}, rank{"Rank"};
  for (const auto& fe : e.factors) {
    l1.push_back(fixed(fe.level_means[0], places));
    l2.push_back(fixed(fe.level_means[1], places));
    delta.push_back(fixed(fe.delta, places));
    rank.push_back(std::to_string(fe.rank) + (fe.tied ? "*" : ""));
  }
  t.rows = {l1, l2, delta, rank};
  t.notes.push_back("Grand mean " + fixed(e.grand_mean, places) + ".");
  if (std::any_of(e.factors.begin(), e.factors.end(), [](const auto& f) { return f.tied; })) {
    t.notes.push_back("* equal delta; the earlier factor takes the higher rank.");
  }
  return t;
}

inline TextTable anova_table(const ReportBundle& b) {
  const auto& a = *b.anova;
  TextTable t;
  t.name = "anova";
  t.title = detail::approach_title(b.approach) + ": analysis of variance for SNR";
  t.header = {"Source", "DF", "SS", "MS", "F", "P"};
  for (std::size_t f = 0; f < a.factors.size(); ++f) {
    const auto& term = a.factors[f];
    t.rows.push_back({b.matrix.factors()[f].name, fixed(term.df, 0), fixed(term.ss, digits::snr),
                      fixed(term.ms, digits::snr), fixed(term.f, digits::f_value),
                      fixed(term.p, digits::p_value)});
  }
  t.rows.push_back({"Error", fixed(a.error.df, 0), fixed(a.error.ss, digits::snr),
                    fixed(a.error.ms, digits::snr), "", ""});
  t.rows.push_back({"Total", fixed(a.total.df, 0), fixed(a.total.ss, digits::snr), "", "", ""});
  if (!b.excluded.empty()) {
    t.notes.push_back("Rows " + row_list(b.excluded) +
                      " excluded; the design is no longer orthogonal and the decomposition is approximate.");
  }
  return t;
}

inline TextTable prediction_table(const ReportBundle& b) {
  const auto& p = *b.prediction;
  TextTable t;
  t.name = "prediction";
  t.title = detail::approach_title(b.approach) + ": optimal configuration";
  t.header = {"Parameter", "Level"};
  for (std::size_t f = 0; f < p.chosen.size(); ++f) {
    t.rows.push_back({b.matrix.factors()[f].name, b.matrix.factors()[f].label(p.chosen[f])});
  }
  t.rows.push_back({"Predicted SNR", fixed(p.predicted_snr, digits::snr)});
  t.rows.push_back({"Predicted Response", fixed(p.predicted_response, digits::response)});
  t.rows.push_back({"Mean-optimal Response", fixed(p.mean_optimal_response, digits::response)});
  t.notes.push_back("Predicted Response adds the mean effects of the chosen levels; Mean-optimal Response "
                    "takes each factor's best level on means.");
  if (!p.ties.empty()) {
    std::string names;
    for (std::size_t f : p.ties) names += (names.empty() ? "" : ", ") + b.matrix.factors()[f].name;
    t.notes.push_back("Tied coefficients (level 1 chosen): " + names + ".");
  }
  return t;
}

}  // namespace detail

// "SNR = g + c·Factor[label] - c·Factor[label] ..." with both levels listed.
inline std::string regression_equation(const ReportBundle& b) {
  const auto& model = *b.regression;
  std::string s = std::string(model.basis == EffectBasis::snr ? "SNR" : "Mean") + " = " +
                  fixed(model.intercept, digits::snr);
  for (std::size_t f = 0; f < model.half_effects.size(); ++f) {
    const auto& factor = b.matrix.factors()[f];
    for (Level l : {Level::one, Level::two}) {
      const double c = model.coefficient(f, l);
      const std::string mag = fixed(std::fabs(c), digits::snr);
      const bool negative = c < 0 && mag.find_first_not_of("0.") != std::string::npos;
      s += (negative ? " - " : " + ") + mag + "·" + factor.name + "[" + factor.label(l) + "]";
    }
  }
  return s;
}

// Every table of the bundle in report order.
inline std::vector<TextTable> report_tables(const ReportBundle& b) {
  const auto missing = b.missing_sections();
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::incomplete, "report bundle incomplete; missing: " + list);
  }
  std::vector<TextTable> out;
  out.push_back(detail::snr_table(b));
  out.push_back(detail::main_effects_table(b, *b.effects_means));
  out.push_back(detail::main_effects_table(b, *b.effects_snr));
  if (b.anova) out.push_back(detail::anova_table(b));
  TextTable eq;
  eq.name = "regression";
  eq.title = detail::approach_title(b.approach) + ": regression equation";
  eq.header = {"Equation"};
  eq.rows = {{regression_equation(b)}};
  if (b.saturated) eq.notes.push_back("No ANOVA: the design leaves no error degrees of freedom.");
  out.push_back(std::move(eq));
  out.push_back(detail::prediction_table(b));
  return out;
}

inline std::string render_tables(const ReportBundle& b, TableFormat format) {
  if (!b.has_results()) {
    return detail::approach_title(b.approach) + ": no results\n";
  }
  std::string doc;
  for (const auto& t : report_tables(b)) {
    if (!doc.empty()) doc += "\n";
    if (format == TableFormat::csv) doc += csv::escape(t.title) + "\n";
    doc += render(t, format);
  }
  return doc;
}

struct OutputFile {
  std::string name;
  std::string content;
};

// Plot-ready CSVs: main effects on means and on SNR (factor, level, mean),
// and every two-factor interaction cell.
inline std::vector<OutputFile> emit_plot_data(const ReportBundle& b) {
  const auto missing = b.missing_sections();
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::incomplete, "report bundle incomplete; missing: " + list);
  }
  const std::string prefix = "approach" + std::to_string(number(b.approach)) + "_";
  std::vector<OutputFile> out;
  auto effects_csv = [&](const MainEffects& e, int places) {
    std::string s = "factor,level,mean\n";
    for (std::size_t f = 0; f < e.factors.size(); ++f) {
      const auto& factor = b.matrix.factors()[f];
      for (Level l : {Level::one, Level::two}) {
        s += csv::join({factor.name, factor.label(l),
                        fixed(e.factors[f].level_means[level_slot(l)], places)}) + "\n";
      }
    }
    return s;
  };
  out.push_back({prefix + "main_effects_means.csv", effects_csv(*b.effects_means, digits::response)});
  out.push_back({prefix + "main_effects_snr.csv", effects_csv(*b.effects_snr, digits::snr)});

  std::string inter = "factor1,level1,factor2,level2,mean\n";
  for (const auto& it : *b.interactions) {
    const auto& f1 = b.matrix.factors()[it.first];
    const auto& f2 = b.matrix.factors()[it.second];
    for (Level l1 : {Level::one, Level::two}) {
      for (Level l2 : {Level::one, Level::two}) {
        inter += csv::join({f1.name, f1.label(l1), f2.name, f2.label(l2),
                            fixed(it.cell_means[level_slot(l1)][level_slot(l2)], digits::snr)}) + "\n";
      }
    }
  }
  out.push_back({prefix + "interactions.csv", std::move(inter)});
  return out;
}

// One file per table, named approach<k>_<table>.<ext>.
inline std::vector<OutputFile> report_files(const ReportBundle& b, TableFormat format) {
  const std::string prefix = "approach" + std::to_string(number(b.approach)) + "_";
  if (!b.has_results()) return {{prefix + "report." + extension(format), render_tables(b, format)}};
  std::vector<OutputFile> out;
  for (const auto& t : report_tables(b)) {
    out.push_back({prefix + t.name + "." + extension(format), render(t, format)});
  }
  return out;
}

}  // namespace taguchi
