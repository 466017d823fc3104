#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "taguchi/csv.hpp"
#include "taguchi/error.hpp"

namespace taguchi {

// Two-level factor setting. `one` is the first listed level of a factor.
enum class Level : std::uint8_t { one = 1, two = 2 };

constexpr std::size_t level_slot(Level l) { return l == Level::one ? 0 : 1; }
constexpr Level other(Level l) { return l == Level::one ? Level::two : Level::one; }

struct Factor {
  std::string name;
  std::array<std::string, 2> levels;

  const std::string& label(Level l) const { return levels[level_slot(l)]; }

  std::optional<Level> level_of(std::string_view label) const {
    if (label == levels[0]) return Level::one;
    if (label == levels[1]) return Level::two;
    return std::nullopt;
  }

  bool operator==(const Factor&) const = default;
};

// Ordered set of named two-level factors. Names are unique and the two
// level labels of each factor differ.
class FactorSpace {
 public:
  FactorSpace() = default;

  explicit FactorSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
    std::unordered_set<std::string> seen;
    for (const auto& f : factors_) {
      if (f.name.empty()) throw Error(ErrorCode::config, "factor name must not be empty");
      if (!seen.insert(f.name).second) {
        throw Error(ErrorCode::config, "duplicate factor name '" + f.name + "'");
      }
      if (f.levels[0] == f.levels[1]) {
        throw Error(ErrorCode::config,
                    "factor '" + f.name + "' has identical level labels '" + f.levels[0] + "'");
      }
      if (f.levels[0].empty() || f.levels[1].empty()) {
        throw Error(ErrorCode::config, "factor '" + f.name + "' has an empty level label");
      }
    }
  }

  std::size_t size() const { return factors_.size(); }
  bool empty() const { return factors_.empty(); }
  const Factor& operator[](std::size_t i) const { return factors_.at(i); }
  const std::vector<Factor>& factors() const { return factors_; }
  auto begin() const { return factors_.begin(); }
  auto end() const { return factors_.end(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].name == name) return i;
    }
    return std::nullopt;
  }

  bool operator==(const FactorSpace&) const = default;

 private:
  std::vector<Factor> factors_;
};

// Run x factor grid of level assignments bound to a factor space.
class DesignMatrix {
 public:
  DesignMatrix() = default;

  DesignMatrix(FactorSpace space, std::vector<std::vector<Level>> rows)
      : space_(std::move(space)), rows_(std::move(rows)) {
    if (rows_.empty()) throw Error(ErrorCode::config, "design matrix has no runs");
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r].size() != space_.size()) {
        throw Error(ErrorCode::config, "design row " + std::to_string(r + 1) + " has " +
                                           std::to_string(rows_[r].size()) + " cells, expected " +
                                           std::to_string(space_.size()));
      }
      for (Level l : rows_[r]) {
        if (l != Level::one && l != Level::two) {
          throw Error(ErrorCode::config, "design row " + std::to_string(r + 1) +
                                             " holds a level index other than 1 or 2");
        }
      }
    }
  }

  std::size_t runs() const { return rows_.size(); }
  std::size_t factor_count() const { return space_.size(); }
  const FactorSpace& factors() const { return space_; }

  // Zero-based row and column.
  Level level(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }
  std::span<const Level> row(std::size_t r) const { return rows_.at(r); }
  const std::vector<std::vector<Level>>& rows() const { return rows_; }

  std::vector<Level> column(std::size_t c) const {
    std::vector<Level> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.at(c));
    return out;
  }

  const std::string& label(std::size_t row, std::size_t col) const {
    return space_[col].label(level(row, col));
  }

  bool operator==(const DesignMatrix&) const = default;

 private:
  FactorSpace space_;
  std::vector<std::vector<Level>> rows_;
};

// L12(2^11). Columns 1-8 are the hyperparameter plan for the eight CNN
// factors; columns 9-11 are the only completion that keeps row 1 at
// level one and preserves strength-2 orthogonality.
inline constexpr std::size_t l12_runs = 12;
inline constexpr std::size_t l12_columns = 11;

inline constexpr std::array<std::array<std::uint8_t, l12_columns>, l12_runs> l12_array{{
    {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1},
    {1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2},
    {1, 1, 2, 2, 2, 1, 1, 1, 2, 2, 2},
    {1, 2, 1, 2, 2, 1, 2, 2, 1, 1, 2},
    {1, 2, 2, 1, 2, 2, 1, 2, 1, 2, 1},
    {1, 2, 2, 2, 1, 2, 2, 1, 2, 1, 1},
    {2, 1, 2, 2, 1, 1, 2, 2, 1, 2, 1},
    {2, 1, 2, 1, 2, 2, 2, 1, 1, 1, 2},
    {2, 1, 1, 2, 2, 2, 1, 2, 2, 1, 1},
    {2, 2, 2, 1, 1, 1, 1, 2, 2, 1, 2},
    {2, 2, 1, 2, 1, 2, 1, 1, 1, 2, 2},
    {2, 2, 1, 1, 2, 1, 2, 1, 2, 2, 1},
}};

// Binds the first k columns of the L12 array to the factors, in order.
inline DesignMatrix build_l12(const FactorSpace& space) {
  if (space.empty() || space.size() > l12_columns) {
    throw Error(ErrorCode::capacity, "L12 holds 1 to 11 two-level factors, got " +
                                         std::to_string(space.size()));
  }
  std::vector<std::vector<Level>> rows(l12_runs);
  for (std::size_t r = 0; r < l12_runs; ++r) {
    rows[r].reserve(space.size());
    for (std::size_t c = 0; c < space.size(); ++c) {
      rows[r].push_back(static_cast<Level>(l12_array[r][c]));
    }
  }
  return DesignMatrix(space, std::move(rows));
}

struct ColumnBalance {
  std::size_t column;
  std::array<std::size_t, 2> counts;
  bool ok;
};

struct PairBalance {
  std::size_t first;
  std::size_t second;
  std::array<std::array<std::size_t, 2>, 2> counts;  // [level of first][level of second]
  bool ok;
};

struct ValidationReport {
  bool passed = true;
  std::vector<ColumnBalance> columns;
  std::vector<PairBalance> pairs;
  std::vector<std::string> violations;
};

// Checks column balance (a/2 of each level) and strength-2 orthogonality
// (a/4 of each level pair) by exhaustive counting. Failures are reported.
inline ValidationReport validate_orthogonality(const DesignMatrix& m) {
  ValidationReport report;
  const std::size_t a = m.runs();
  const std::size_t k = m.factor_count();
  const bool halves = a % 2 == 0;
  const bool quarters = a % 4 == 0;

  for (std::size_t c = 0; c < k; ++c) {
    ColumnBalance cb{c, {0, 0}, true};
    for (std::size_t r = 0; r < a; ++r) ++cb.counts[level_slot(m.level(r, c))];
    cb.ok = halves && cb.counts[0] == a / 2 && cb.counts[1] == a / 2;
    if (!cb.ok) {
      report.passed = false;
      report.violations.push_back("column " + std::to_string(c + 1) + " (" + m.factors()[c].name +
                                  ") is unbalanced: " + std::to_string(cb.counts[0]) + " x level 1, " +
                                  std::to_string(cb.counts[1]) + " x level 2");
    }
    report.columns.push_back(cb);
  }

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      PairBalance pb{i, j, {}, true};
      for (std::size_t r = 0; r < a; ++r) {
        ++pb.counts[level_slot(m.level(r, i))][level_slot(m.level(r, j))];
      }
      for (const auto& row : pb.counts) {
        for (std::size_t n : row) pb.ok = pb.ok && quarters && n == a / 4;
      }
      if (!pb.ok) {
        report.passed = false;
        report.violations.push_back("columns " + std::to_string(i + 1) + " and " +
                                    std::to_string(j + 1) + " are not orthogonal: counts (1,1)=" +
                                    std::to_string(pb.counts[0][0]) + " (1,2)=" +
                                    std::to_string(pb.counts[0][1]) + " (2,1)=" +
                                    std::to_string(pb.counts[1][0]) + " (2,2)=" +
                                    std::to_string(pb.counts[1][1]));
      }
      report.pairs.push_back(pb);
    }
  }
  return report;
}

enum class PlanFormat { csv, json };

inline PlanFormat parse_plan_format(std::string_view tag) {
  if (tag == "csv") return PlanFormat::csv;
  if (tag == "json") return PlanFormat::json;
  throw Error(ErrorCode::config, "unknown plan format '" + std::string(tag) + "'");
}

// CSV: header of factor names, one row of level labels per run.
// JSON: {"factors":[{"name":..,"levels":[..,..]}], "rows":[[1,2,..],..]}.
inline std::string export_plan(const DesignMatrix& m, PlanFormat format) {
  if (format == PlanFormat::csv) {
    std::vector<std::string> header;
    for (const auto& f : m.factors()) header.push_back(f.name);
    std::string out = csv::join(header) + "\n";
    for (std::size_t r = 0; r < m.runs(); ++r) {
      std::vector<std::string> cells;
      for (std::size_t c = 0; c < m.factor_count(); ++c) cells.push_back(m.label(r, c));
      out += csv::join(cells) + "\n";
    }
    return out;
  }

  nlohmann::ordered_json doc;
  doc["factors"] = nlohmann::ordered_json::array();
  for (const auto& f : m.factors()) {
    doc["factors"].push_back({{"name", f.name}, {"levels", {f.levels[0], f.levels[1]}}});
  }
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : m.rows()) {
    auto cells = nlohmann::ordered_json::array();
    for (Level l : row) cells.push_back(static_cast<int>(l));
    doc["rows"].push_back(std::move(cells));
  }
  return doc.dump(2) + "\n";
}

inline std::string export_plan(const DesignMatrix& m, std::string_view format_tag) {
  return export_plan(m, parse_plan_format(format_tag));
}

namespace detail {

inline DesignMatrix import_plan_csv(std::string_view text, const FactorSpace* hint) {
  const auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorCode::parse, "plan csv: missing header");
  const auto& header = records.front();
  const std::size_t k = header.size();

  // Level labels in order of first appearance; row 1 of a canonical plan is all level one.
  std::vector<std::vector<std::string>> seen(k);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != k) {
      throw Error(ErrorCode::parse, "plan csv: row " + std::to_string(r) + " has " +
                                        std::to_string(records[r].size()) + " cells, expected " +
                                        std::to_string(k));
    }
    for (std::size_t c = 0; c < k; ++c) {
      auto& labels = seen[c];
      if (std::find(labels.begin(), labels.end(), records[r][c]) == labels.end()) {
        labels.push_back(records[r][c]);
      }
    }
  }

  std::vector<Factor> factors;
  for (std::size_t c = 0; c < k; ++c) {
    if (hint) {
      const auto idx = hint->index_of(header[c]);
      if (!idx) throw Error(ErrorCode::parse, "plan csv: unknown factor '" + header[c] + "'");
      factors.push_back((*hint)[*idx]);
      continue;
    }
    if (seen[c].size() != 2) {
      throw Error(ErrorCode::parse, "plan csv: column '" + header[c] + "' has " +
                                        std::to_string(seen[c].size()) +
                                        " distinct labels, expected 2");
    }
    factors.push_back(Factor{header[c], {seen[c][0], seen[c][1]}});
  }
  FactorSpace space(std::move(factors));

  std::vector<std::vector<Level>> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    std::vector<Level> row;
    for (std::size_t c = 0; c < k; ++c) {
      const auto level = space[c].level_of(records[r][c]);
      if (!level) {
        throw Error(ErrorCode::parse, "plan csv: row " + std::to_string(r) + " factor '" +
                                          header[c] + "' has unknown label '" + records[r][c] + "'");
      }
      row.push_back(*level);
    }
    rows.push_back(std::move(row));
  }
  return DesignMatrix(std::move(space), std::move(rows));
}

inline DesignMatrix import_plan_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    std::vector<Factor> factors;
    for (const auto& f : doc.at("factors")) {
      const auto& levels = f.at("levels");
      if (levels.size() != 2) throw Error(ErrorCode::parse, "plan json: factor needs 2 levels");
      factors.push_back(Factor{f.at("name").get<std::string>(),
                               {levels[0].get<std::string>(), levels[1].get<std::string>()}});
    }
    std::vector<std::vector<Level>> rows;
    for (const auto& r : doc.at("rows")) {
      std::vector<Level> row;
      for (const auto& cell : r) {
        const int v = cell.get<int>();
        if (v != 1 && v != 2) throw Error(ErrorCode::parse, "plan json: level index must be 1 or 2");
        row.push_back(static_cast<Level>(v));
      }
      rows.push_back(std::move(row));
    }
    return DesignMatrix(FactorSpace(std::move(factors)), std::move(rows));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("plan json: ") + e.what());
  }
}

}  // namespace detail

// `hint` resolves level order for CSV plans that do not start with an
// all-level-one row.
inline DesignMatrix import_plan(std::string_view text, PlanFormat format,
                                const FactorSpace* hint = nullptr) {
  return format == PlanFormat::csv ? detail::import_plan_csv(text, hint)
                                   : detail::import_plan_json(text);
}

// FNV-1a over the canonical JSON plan; identifies the plan a result belongs to.
inline std::string plan_hash(const DesignMatrix& m) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : export_plan(m, PlanFormat::json)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace taguchi
