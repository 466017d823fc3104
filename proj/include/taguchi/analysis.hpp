#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "taguchi/design.hpp"
#include "taguchi/error.hpp"
#include "taguchi/response.hpp"
#include "taguchi/snr.hpp"
#include "taguchi/special.hpp"

namespace taguchi {

// Outcome of one design row under one approach. With a single replicate
// `responses` has one entry and `snr` is +-20 log10 of it.
struct RowResult {
  std::vector<TrialMetrics> replicates;
  std::vector<double> responses;
  double mean_response = 0.0;
  double snr = 0.0;
};

// Per-row responses and SNRs for one approach. Rows may be absent; absent
// rows that were not explicitly excluded block every analysis.
class ResponseTable {
 public:
  ResponseTable(DesignMatrix matrix, Approach approach, std::vector<std::optional<RowResult>> rows,
                std::vector<std::size_t> excluded = {})
      : matrix_(std::move(matrix)),
        approach_(approach),
        rows_(std::move(rows)),
        excluded_(std::move(excluded)) {
    if (rows_.size() != matrix_.runs()) {
      throw Error(ErrorCode::argument, "response table has " + std::to_string(rows_.size()) +
                                           " rows for a " + std::to_string(matrix_.runs()) +
                                           "-run design");
    }
    std::sort(excluded_.begin(), excluded_.end());
    excluded_.erase(std::unique(excluded_.begin(), excluded_.end()), excluded_.end());
    for (std::size_t r : excluded_) {
      if (r >= rows_.size()) throw Error(ErrorCode::argument, "excluded row out of range");
      rows_[r].reset();
    }
  }

  // `per_row[r]` holds the replicates for row r (empty = not run). With
  // `allow_missing` the absent rows are recorded as excluded.
  static ResponseTable from_metrics(const DesignMatrix& matrix,
                                    const std::vector<std::vector<TrialMetrics>>& per_row,
                                    Approach approach, const ResponseConfig& cfg = {},
                                    bool allow_missing = false) {
    if (per_row.size() != matrix.runs()) {
      throw Error(ErrorCode::argument, "metrics supplied for " + std::to_string(per_row.size()) +
                                           " rows, design has " + std::to_string(matrix.runs()));
    }
    std::vector<std::optional<RowResult>> rows(matrix.runs());
    std::vector<std::size_t> excluded;
    for (std::size_t r = 0; r < per_row.size(); ++r) {
      if (per_row[r].empty()) {
        if (allow_missing) excluded.push_back(r);
        continue;
      }
      RowResult row;
      row.replicates = per_row[r];
      try {
        for (const auto& m : row.replicates) row.responses.push_back(compute_response(m, approach, cfg));
        row.snr = snr(row.responses, direction_of(approach));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate) throw;
        throw Error(ErrorCode::degenerate, "row " + std::to_string(r + 1) + ", approach " +
                                               std::to_string(number(approach)) + ": " + e.what());
      }
      row.mean_response = std::accumulate(row.responses.begin(), row.responses.end(), 0.0) /
                          static_cast<double>(row.responses.size());
      rows[r] = std::move(row);
    }
    return ResponseTable(matrix, approach, std::move(rows), std::move(excluded));
  }

  // Synthetic table from precomputed per-row SNR (and optionally mean) values.
  static ResponseTable from_values(const DesignMatrix& matrix, Approach approach,
                                   std::span<const double> snr_values,
                                   std::span<const double> mean_values = {}) {
    if (snr_values.size() != matrix.runs() ||
        (!mean_values.empty() && mean_values.size() != matrix.runs())) {
      throw Error(ErrorCode::argument, "value count does not match design runs");
    }
    std::vector<std::optional<RowResult>> rows(matrix.runs());
    for (std::size_t r = 0; r < matrix.runs(); ++r) {
      RowResult row;
      row.snr = snr_values[r];
      row.mean_response = mean_values.empty() ? snr_values[r] : mean_values[r];
      row.responses = {row.mean_response};
      rows[r] = std::move(row);
    }
    return ResponseTable(matrix, approach, std::move(rows));
  }

  const DesignMatrix& matrix() const { return matrix_; }
  Approach approach() const { return approach_; }
  Direction direction() const { return direction_of(approach_); }
  const std::vector<std::optional<RowResult>>& rows() const { return rows_; }
  const std::optional<RowResult>& row(std::size_t r) const { return rows_.at(r); }
  const std::vector<std::size_t>& excluded() const { return excluded_; }

  std::vector<std::size_t> missing_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (!rows_[r] && !std::binary_search(excluded_.begin(), excluded_.end(), r)) out.push_back(r);
    }
    return out;
  }

  std::vector<std::size_t> present_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r]) out.push_back(r);
    }
    return out;
  }

  void require_complete() const {
    const auto missing = missing_rows();
    if (!missing.empty()) {
      std::string list;
      for (std::size_t r : missing) list += (list.empty() ? "" : ", ") + std::to_string(r + 1);
      throw Error(ErrorCode::incomplete, "results missing for row(s) " + list);
    }
    if (present_rows().empty()) throw Error(ErrorCode::incomplete, "no results");
  }

 private:
  DesignMatrix matrix_;
  Approach approach_;
  std::vector<std::optional<RowResult>> rows_;
  std::vector<std::size_t> excluded_;
};

enum class EffectBasis { snr, means };

inline const char* to_string(EffectBasis b) { return b == EffectBasis::snr ? "snr" : "means"; }

namespace detail {

inline double basis_value(const RowResult& r, EffectBasis basis) {
  return basis == EffectBasis::snr ? r.snr : r.mean_response;
}

}  // namespace detail

struct FactorEffect {
  std::array<double, 2> level_means{};
  double delta = 0.0;
  std::size_t rank = 0;  // 1 = largest delta
  bool tied = false;     // delta equals another factor's delta
};

struct MainEffects {
  EffectBasis basis = EffectBasis::snr;
  double grand_mean = 0.0;
  std::vector<FactorEffect> factors;
};

inline MainEffects main_effects(const ResponseTable& table, EffectBasis basis) {
  table.require_complete();
  const auto& m = table.matrix();
  const auto present = table.present_rows();

  MainEffects out;
  out.basis = basis;
  double total = 0.0;
  for (std::size_t r : present) total += detail::basis_value(*table.row(r), basis);
  out.grand_mean = total / static_cast<double>(present.size());

  for (std::size_t f = 0; f < m.factor_count(); ++f) {
    std::array<double, 2> sum{0.0, 0.0};
    std::array<std::size_t, 2> count{0, 0};
    for (std::size_t r : present) {
      const auto slot = level_slot(m.level(r, f));
      sum[slot] += detail::basis_value(*table.row(r), basis);
      ++count[slot];
    }
    if (count[0] == 0 || count[1] == 0) {
      throw Error(ErrorCode::incomplete,
                  "factor '" + m.factors()[f].name + "' has no observed rows at one level");
    }
    FactorEffect fe;
    fe.level_means = {sum[0] / static_cast<double>(count[0]), sum[1] / static_cast<double>(count[1])};
    fe.delta = std::fabs(fe.level_means[0] - fe.level_means[1]);
    out.factors.push_back(fe);
  }

  // Descending delta; equal deltas keep factor order.
  std::vector<std::size_t> order(out.factors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.factors[a].delta > out.factors[b].delta;
  });
  for (std::size_t i = 0; i < order.size(); ++i) out.factors[order[i]].rank = i + 1;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    auto& a = out.factors[order[i]];
    auto& b = out.factors[order[i + 1]];
    if (a.delta == b.delta) a.tied = b.tied = true;
  }
  return out;
}

struct InteractionTable {
  std::size_t first = 0;
  std::size_t second = 0;
  std::array<std::array<double, 2>, 2> cell_means{};  // [level of first][level of second]
  std::array<std::array<std::size_t, 2>, 2> counts{};
  double magnitude = 0.0;  // |(m11 - m12) - (m21 - m22)|
};

inline InteractionTable interaction_table(const ResponseTable& table, std::size_t first,
                                          std::size_t second, EffectBasis basis = EffectBasis::snr) {
  const auto& m = table.matrix();
  if (first == second) throw Error(ErrorCode::argument, "interaction needs two distinct factors");
  if (first >= m.factor_count() || second >= m.factor_count()) {
    throw Error(ErrorCode::argument, "interaction factor index out of range");
  }
  table.require_complete();

  InteractionTable out;
  out.first = first;
  out.second = second;
  std::array<std::array<double, 2>, 2> sum{};
  for (std::size_t r : table.present_rows()) {
    const auto i = level_slot(m.level(r, first));
    const auto j = level_slot(m.level(r, second));
    sum[i][j] += detail::basis_value(*table.row(r), basis);
    ++out.counts[i][j];
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      if (out.counts[i][j] == 0) {
        throw Error(ErrorCode::argument, "interaction cell (" + std::to_string(i + 1) + "," +
                                             std::to_string(j + 1) + ") of '" +
                                             m.factors()[first].name + "' x '" +
                                             m.factors()[second].name + "' has no rows");
      }
      out.cell_means[i][j] = sum[i][j] / static_cast<double>(out.counts[i][j]);
    }
  }
  const auto& c = out.cell_means;
  out.magnitude = std::fabs((c[0][0] - c[0][1]) - (c[1][0] - c[1][1]));
  return out;
}

inline InteractionTable interaction_table(const ResponseTable& table, const Factor& first,
                                          const Factor& second, EffectBasis basis = EffectBasis::snr) {
  const auto& space = table.matrix().factors();
  const auto i = space.index_of(first.name);
  const auto j = space.index_of(second.name);
  if (!i || !j) throw Error(ErrorCode::argument, "interaction factor not in design");
  return interaction_table(table, *i, *j, basis);
}

// All factor pairs (i < j) in column order.
inline std::vector<InteractionTable> all_interactions(const ResponseTable& table,
                                                      EffectBasis basis = EffectBasis::snr) {
  std::vector<InteractionTable> out;
  const std::size_t k = table.matrix().factor_count();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) out.push_back(interaction_table(table, i, j, basis));
  }
  return out;
}

struct AnovaTerm {
  double df = 0.0;
  double ss = 0.0;
  double ms = 0.0;
  double f = 0.0;
  double p = 1.0;
};

struct AnovaTable {
  EffectBasis basis = EffectBasis::snr;
  std::vector<AnovaTerm> factors;
  AnovaTerm error;  // f and p unused
  AnovaTerm total;  // ms, f and p unused
};

// Main-effects ANOVA. Factor SS = sum over levels of n_l (mean_l - grand)^2,
// which is runs * half_effect^2 for balanced two-level designs; error SS is
// the remainder of the total.
inline AnovaTable anova(const ResponseTable& table, EffectBasis basis = EffectBasis::snr) {
  const auto effects = main_effects(table, basis);
  const auto& m = table.matrix();
  const auto present = table.present_rows();
  const double n = static_cast<double>(present.size());
  const double k = static_cast<double>(m.factor_count());
  const double error_df = n - 1.0 - k;
  if (error_df < 1.0) {
    throw Error(ErrorCode::capacity, "saturated design: " + std::to_string(present.size()) +
                                         " runs leave no error degrees of freedom for " +
                                         std::to_string(m.factor_count()) + " factors");
  }

  AnovaTable out;
  out.basis = basis;
  out.total.df = n - 1.0;
  for (std::size_t r : present) {
    const double d = detail::basis_value(*table.row(r), basis) - effects.grand_mean;
    out.total.ss += d * d;
  }

  double factor_ss_sum = 0.0;
  for (std::size_t f = 0; f < m.factor_count(); ++f) {
    std::array<double, 2> count{0.0, 0.0};
    for (std::size_t r : present) count[level_slot(m.level(r, f))] += 1.0;
    AnovaTerm term;
    term.df = 1.0;
    for (std::size_t l = 0; l < 2; ++l) {
      const double d = effects.factors[f].level_means[l] - effects.grand_mean;
      term.ss += count[l] * d * d;
    }
    term.ms = term.ss;
    factor_ss_sum += term.ss;
    out.factors.push_back(term);
  }

  out.error.df = error_df;
  out.error.ss = out.total.ss - factor_ss_sum;
  out.error.ms = out.error.ss / error_df;
  // Round-off only; an exact fit leaves zero residual.
  const double error_ms = std::max(out.error.ms, 0.0);
  for (auto& term : out.factors) {
    if (term.ss == 0.0) {
      term.f = 0.0;
      term.p = 1.0;
    } else if (error_ms == 0.0) {
      term.f = std::numeric_limits<double>::infinity();
      term.p = 0.0;
    } else {
      term.f = term.ms / error_ms;
      term.p = special::f_survival(term.f, term.df, error_df);
    }
  }
  return out;
}

// Effect-coded additive model: value = intercept + sum of per-factor level
// coefficients, with the level-two coefficient the negative of level one.
struct RegressionModel {
  EffectBasis basis = EffectBasis::snr;
  double intercept = 0.0;
  std::vector<double> half_effects;  // level-one coefficient per factor

  double coefficient(std::size_t factor, Level level) const {
    const double h = half_effects.at(factor);
    return level == Level::one ? h : -h;
  }

  double predict(std::span<const Level> levels) const {
    if (levels.size() != half_effects.size()) {
      throw Error(ErrorCode::argument, "prediction needs one level per factor");
    }
    double v = intercept;
    for (std::size_t f = 0; f < levels.size(); ++f) v += coefficient(f, levels[f]);
    return v;
  }
};

inline RegressionModel fit_regression(const ResponseTable& table,
                                      EffectBasis basis = EffectBasis::snr) {
  const auto effects = main_effects(table, basis);
  RegressionModel model;
  model.basis = basis;
  model.intercept = effects.grand_mean;
  for (const auto& fe : effects.factors) {
    model.half_effects.push_back((fe.level_means[0] - fe.level_means[1]) / 2.0);
  }
  return model;
}

struct OptimalPrediction {
  std::vector<Level> chosen;
  std::vector<std::size_t> ties;  // factors whose coefficients are equal; level one chosen
  double predicted_snr = 0.0;
  // Means grand mean plus each factor's mean effect at the SNR-chosen level.
  double predicted_response = 0.0;
  // Means grand mean plus each factor's best mean effect for the direction,
  // independent of the SNR choice.
  double mean_optimal_response = 0.0;
};

inline OptimalPrediction predict_optimum(const RegressionModel& model,
                                         const MainEffects& effects_on_means,
                                         Direction direction = Direction::larger_is_better) {
  if (effects_on_means.factors.size() != model.half_effects.size()) {
    throw Error(ErrorCode::argument, "model and mean effects cover different factor counts");
  }
  OptimalPrediction out;
  out.predicted_snr = model.intercept;
  out.predicted_response = effects_on_means.grand_mean;
  out.mean_optimal_response = effects_on_means.grand_mean;

  for (std::size_t f = 0; f < model.half_effects.size(); ++f) {
    const double h = model.half_effects[f];
    Level pick = Level::one;
    if (h == 0.0) {
      out.ties.push_back(f);
    } else if (h < 0.0) {
      pick = Level::two;
    }
    out.chosen.push_back(pick);
    out.predicted_snr += model.coefficient(f, pick);

    const auto& lm = effects_on_means.factors[f].level_means;
    const double g = effects_on_means.grand_mean;
    out.predicted_response += lm[level_slot(pick)] - g;
    const double best = direction == Direction::larger_is_better ? std::max(lm[0], lm[1])
                                                                 : std::min(lm[0], lm[1]);
    out.mean_optimal_response += best - g;
  }
  return out;
}

// Every analysis for one approach over one response table.
struct AnalysisBundle {
  Approach approach = Approach::accuracy;
  MainEffects effects_snr;
  MainEffects effects_means;
  std::vector<InteractionTable> interactions;
  std::optional<AnovaTable> anova;  // absent for saturated designs
  RegressionModel regression;
  OptimalPrediction prediction;
};

inline AnalysisBundle analyze(const ResponseTable& table) {
  AnalysisBundle b;
  b.approach = table.approach();
  b.effects_snr = main_effects(table, EffectBasis::snr);
  b.effects_means = main_effects(table, EffectBasis::means);
  if (table.matrix().factor_count() >= 2) b.interactions = all_interactions(table);
  try {
    b.anova = anova(table);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::capacity) throw;
  }
  b.regression = fit_regression(table);
  b.prediction = predict_optimum(b.regression, b.effects_means, table.direction());
  return b;
}

}  // namespace taguchi
