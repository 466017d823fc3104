#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "taguchi/error.hpp"

namespace taguchi {

// The four outcomes a trial runner reports for one configuration.
struct TrialMetrics {
  double ta = 0.0;  // training accuracy, [0,1]
  double va = 0.0;  // validation accuracy, [0,1]
  double tl = 0.0;  // training loss, >= 0
  double vl = 0.0;  // validation loss, >= 0

  bool operator==(const TrialMetrics&) const = default;
};

// Returns an empty string when the metrics are in range, else a diagnostic
// naming the first offending field.
inline std::string check_metrics(const TrialMetrics& m) {
  auto fmt = [](std::string_view field, double v, std::string_view want) {
    std::ostringstream os;
    os << field << " = " << v << " is outside " << want;
    return os.str();
  };
  if (!std::isfinite(m.ta) || m.ta < 0.0 || m.ta > 1.0) return fmt("ta", m.ta, "[0,1]");
  if (!std::isfinite(m.va) || m.va < 0.0 || m.va > 1.0) return fmt("va", m.va, "[0,1]");
  if (!std::isfinite(m.tl) || m.tl < 0.0) return fmt("tl", m.tl, "[0,inf)");
  if (!std::isfinite(m.vl) || m.vl < 0.0) return fmt("vl", m.vl, "[0,inf)");
  return {};
}

enum class Approach : int {
  accuracy = 1,        // mean accuracy, larger is better
  loss = 2,            // mean loss, smaller is better
  log_combined = 3,    // accuracies plus log-transformed mean loss
  log_individual = 4,  // accuracies plus each log-transformed loss
  log_unified = 5,     // mean accuracy plus log-transformed mean loss
};

inline constexpr std::array<Approach, 5> all_approaches{
    Approach::accuracy, Approach::loss, Approach::log_combined, Approach::log_individual,
    Approach::log_unified};

enum class Direction { larger_is_better, smaller_is_better };

constexpr Direction direction_of(Approach a) {
  return a == Approach::loss ? Direction::smaller_is_better : Direction::larger_is_better;
}

constexpr int number(Approach a) { return static_cast<int>(a); }

inline Approach approach_from_number(int n) {
  if (n < 1 || n > 5) {
    throw Error(ErrorCode::config, "approach must be 1..5, got " + std::to_string(n));
  }
  return static_cast<Approach>(n);
}

// How the accuracy term of approach 5 enters the response. `linear` uses
// the mean accuracy directly; `log` applies the same log transform as the
// loss term.
enum class AccuracyTerm { linear, log };

// Per-approach weights, in term order:
//   1: ta, va            2: tl, vl           3: ta, va, log(mean loss)
//   4: ta, va, log(tl), log(vl)              5: accuracy term, log(mean loss)
using Weights = std::vector<double>;

inline Weights default_weights(Approach a) {
  switch (a) {
    case Approach::accuracy:
    case Approach::loss: return {0.5, 0.5};
    case Approach::log_combined: return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    case Approach::log_individual: return {0.25, 0.25, 0.25, 0.25};
    case Approach::log_unified: return {0.5, 0.5};
  }
  return {};
}

inline std::size_t weight_count(Approach a) { return default_weights(a).size(); }

struct ResponseConfig {
  double log_base = 0.7;
  std::array<Weights, 5> weights{default_weights(Approach::accuracy),
                                 default_weights(Approach::loss),
                                 default_weights(Approach::log_combined),
                                 default_weights(Approach::log_individual),
                                 default_weights(Approach::log_unified)};
  AccuracyTerm approach5_accuracy = AccuracyTerm::linear;

  const Weights& weights_for(Approach a) const {
    return weights[static_cast<std::size_t>(number(a) - 1)];
  }
  Weights& weights_for(Approach a) { return weights[static_cast<std::size_t>(number(a) - 1)]; }
};

// log of x in base b, 0 < b < 1; strictly decreasing in x.
inline double log_base(double x, double base) {
  if (!(base > 0.0 && base < 1.0)) {
    throw Error(ErrorCode::config, "log base must lie in (0,1)");
  }
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream os;
    os << "log_" << base << " undefined for " << x;
    throw Error(ErrorCode::degenerate, os.str());
  }
  return std::log(x) / std::log(base);
}

namespace detail {

inline double weighted_log(double x, double base, std::string_view what) {
  try {
    return log_base(x, base);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate) throw;
    throw Error(ErrorCode::degenerate, std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

inline double compute_response(const TrialMetrics& m, Approach approach,
                               const ResponseConfig& cfg = {}) {
  if (auto bad = check_metrics(m); !bad.empty()) throw Error(ErrorCode::degenerate, bad);

  const Weights& w = cfg.weights_for(approach);
  if (w.size() != weight_count(approach)) {
    throw Error(ErrorCode::config, "approach " + std::to_string(number(approach)) + " needs " +
                                       std::to_string(weight_count(approach)) + " weights");
  }
  const double base = cfg.log_base;
  const double mean_loss = (m.tl + m.vl) / 2.0;

  double value = 0.0;
  switch (approach) {
    case Approach::accuracy:
      value = w[0] * m.ta + w[1] * m.va;
      break;
    case Approach::loss:
      value = w[0] * m.tl + w[1] * m.vl;
      break;
    case Approach::log_combined:
      value = w[0] * m.ta + w[1] * m.va +
              w[2] * detail::weighted_log(mean_loss, base, "mean loss (tl+vl)/2");
      break;
    case Approach::log_individual:
      value = w[0] * m.ta + w[1] * m.va + w[2] * detail::weighted_log(m.tl, base, "tl") +
              w[3] * detail::weighted_log(m.vl, base, "vl");
      break;
    case Approach::log_unified: {
      const double mean_acc = (m.ta + m.va) / 2.0;
      const double acc_term =
          cfg.approach5_accuracy == AccuracyTerm::linear
              ? mean_acc
              : detail::weighted_log(mean_acc, base, "mean accuracy (ta+va)/2");
      value = w[0] * acc_term + w[1] * detail::weighted_log(mean_loss, base, "mean loss (tl+vl)/2");
      break;
    }
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::degenerate, "response is not finite");
  return value;
}

}  // namespace taguchi
