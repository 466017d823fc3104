#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taguchi/csv.hpp"
#include "taguchi/design.hpp"
#include "taguchi/error.hpp"
#include "taguchi/fixture.hpp"
#include "taguchi/response.hpp"

namespace taguchi {

// Project settings. Defaults reproduce the eight-factor CNN study.
struct ProjectConfig {
  FactorSpace factors = fixture::cnn_factor_space();
  std::vector<Approach> approaches{all_approaches.begin(), all_approaches.end()};
  ResponseConfig response;
  std::string runner_cmd;
  std::size_t parallelism = 1;
  std::filesystem::path out = "taguchi_out";
  std::optional<std::chrono::milliseconds> timeout;
  std::size_t replicates = 1;
  bool allow_missing_rows = false;

  void validate() const {
    if (!(response.log_base > 0.0 && response.log_base < 1.0)) {
      throw Error(ErrorCode::config, "log_base must lie in (0,1)");
    }
    for (Approach a : all_approaches) {
      const auto& w = response.weights_for(a);
      if (w.size() != weight_count(a)) {
        throw Error(ErrorCode::config, "approach " + std::to_string(number(a)) + " takes " +
                                           std::to_string(weight_count(a)) + " weights, got " +
                                           std::to_string(w.size()));
      }
      double sum = 0.0;
      for (double x : w) sum += x;
      if (std::fabs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::config, "approach " + std::to_string(number(a)) +
                                           " weights must sum to 1, got " + std::to_string(sum));
      }
    }
    if (parallelism < 1) throw Error(ErrorCode::config, "parallelism must be >= 1");
    if (replicates < 1) throw Error(ErrorCode::config, "replicates must be >= 1");
    if (approaches.empty()) throw Error(ErrorCode::config, "no approach selected");
  }
};

namespace detail {

inline std::string unquote(std::string_view s) {
  s = csv::trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) ++i;
      out += s[i];
    }
    return out;
  }
  return std::string(s);
}

inline double parse_number(std::string_view s, std::string_view what) {
  s = csv::trim(s);
  auto one = [&](std::string_view t) {
    t = csv::trim(t);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
      throw Error(ErrorCode::config, std::string(what) + ": '" + std::string(s) + "' is not a number");
    }
    return v;
  };
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const double den = one(s.substr(slash + 1));
    if (den == 0.0) throw Error(ErrorCode::config, std::string(what) + ": zero denominator");
    return one(s.substr(0, slash)) / den;
  }
  return one(s);
}

inline std::size_t parse_count(std::string_view s, std::string_view what) {
  const double v = parse_number(s, what);
  if (v < 0 || v != std::floor(v)) {
    throw Error(ErrorCode::config, std::string(what) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

inline bool parse_bool(std::string_view s, std::string_view what) {
  const auto t = unquote(s);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw Error(ErrorCode::config, std::string(what) + " must be true or false");
}

// Splits a comma-separated value, honouring double quotes.
inline std::vector<std::string> split_list(std::string_view s) {
  const auto records = csv::parse(s);
  if (records.empty()) return {};
  return records.front();
}

}  // namespace detail

// "1".."5" or "all".
inline std::vector<Approach> parse_approach_selection(std::string_view s) {
  const auto t = detail::unquote(s);
  if (t == "all") return {all_approaches.begin(), all_approaches.end()};
  std::vector<Approach> out;
  for (const auto& item : detail::split_list(t)) {
    out.push_back(approach_from_number(static_cast<int>(detail::parse_count(item, "approach"))));
  }
  if (out.empty()) throw Error(ErrorCode::config, "empty approach selection");
  return out;
}

// "3=1/3,1/3,1/3" style weight override for one approach.
inline void apply_weight_override(ResponseConfig& cfg, std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::config, "weights override must look like '<approach>=w1,w2,...'");
  }
  std::string_view key = csv::trim(text.substr(0, eq));
  if (key.rfind("approach", 0) == 0) key.remove_prefix(8);
  const Approach a = approach_from_number(static_cast<int>(detail::parse_count(key, "weights approach")));
  Weights w;
  for (const auto& item : detail::split_list(text.substr(eq + 1))) w.push_back(detail::parse_number(item, "weight"));
  cfg.weights_for(a) = std::move(w);
}

inline AccuracyTerm parse_accuracy_term(std::string_view s) {
  const auto t = detail::unquote(s);
  if (t == "linear") return AccuracyTerm::linear;
  if (t == "log") return AccuracyTerm::log;
  throw Error(ErrorCode::config, "approach5_accuracy must be 'linear' or 'log'");
}

// Flat INI/TOML-like document:
//
//   # comment
//   [project]
//   approach = all            # or 1..5, or a list "1,3"
//   log_base = 0.7
//   runner_cmd = "python3 trainer.py"
//   parallelism = 4
//   out = results
//   timeout_s = 0             # 0 = unlimited
//   replicates = 1
//   allow_missing_rows = false
//   approach5_accuracy = linear
//
//   [factors]                 # replaces the default factor set, in order
//   Learning Rate = 0.001, 0.005
//
//   [weights]
//   approach3 = 1/3, 1/3, 1/3
inline ProjectConfig parse_config(std::string_view text, ProjectConfig cfg = {}) {
  std::string section;
  std::vector<Factor> factors;
  bool saw_factors = false;
  std::size_t lineno = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;

    // Strip comments outside quotes.
    std::string line;
    bool quoted = false;
    for (char c : raw) {
      if (c == '"') quoted = !quoted;
      if (!quoted && (c == '#' || c == ';')) break;
      line += c;
    }
    const auto t = csv::trim(line);
    if (t.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);

    if (t.front() == '[') {
      if (t.back() != ']') throw Error(ErrorCode::config, where + ": unterminated section header");
      section = std::string(csv::trim(t.substr(1, t.size() - 2)));
      if (section != "project" && section != "factors" && section != "weights") {
        throw Error(ErrorCode::config, where + ": unknown section [" + section + "]");
      }
      if (section == "factors") saw_factors = true;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::config, where + ": expected key = value");
    const std::string key = detail::unquote(t.substr(0, eq));
    const std::string_view value = csv::trim(t.substr(eq + 1));

    try {
      if (section == "factors") {
        const auto labels = detail::split_list(value);
        if (labels.size() != 2) {
          throw Error(ErrorCode::config, "factor '" + key + "' needs exactly two levels");
        }
        factors.push_back(Factor{key, {labels[0], labels[1]}});
      } else if (section == "weights") {
        apply_weight_override(cfg.response, key + "=" + std::string(value));
      } else if (section == "project") {
        if (key == "approach") {
          cfg.approaches = parse_approach_selection(value);
        } else if (key == "log_base") {
          cfg.response.log_base = detail::parse_number(value, key);
        } else if (key == "runner_cmd") {
          cfg.runner_cmd = detail::unquote(value);
        } else if (key == "parallelism") {
          cfg.parallelism = detail::parse_count(value, key);
        } else if (key == "out") {
          cfg.out = detail::unquote(value);
        } else if (key == "timeout_s") {
          const double s = detail::parse_number(value, key);
          if (s < 0) throw Error(ErrorCode::config, "timeout_s must be >= 0");
          cfg.timeout = s == 0 ? std::nullopt
                               : std::optional(std::chrono::milliseconds(static_cast<long long>(s * 1000)));
        } else if (key == "replicates") {
          cfg.replicates = detail::parse_count(value, key);
        } else if (key == "allow_missing_rows") {
          cfg.allow_missing_rows = detail::parse_bool(value, key);
        } else if (key == "approach5_accuracy") {
          cfg.response.approach5_accuracy = parse_accuracy_term(value);
        } else {
          throw Error(ErrorCode::config, "unknown key '" + key + "'");
        }
      } else {
        throw Error(ErrorCode::config, "key '" + key + "' outside a section");
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::config, where + ": " + e.what());
    }
  }

  if (saw_factors) cfg.factors = FactorSpace(std::move(factors));
  cfg.validate();
  return cfg;
}

}  // namespace taguchi
