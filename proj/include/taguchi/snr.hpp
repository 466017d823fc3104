#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "taguchi/error.hpp"
#include "taguchi/response.hpp"

namespace taguchi {

// Larger-the-better: eta = -10 log10( mean(1 / y_i^2) ). Every y_i must be
// strictly positive.
inline double snr_larger(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::argument, "snr: empty replicate set");
  double acc = 0.0;
  for (double y : values) {
    if (!std::isfinite(y) || y <= 0.0) {
      std::ostringstream os;
      os << "larger-the-better SNR needs positive responses, got " << y;
      throw Error(ErrorCode::degenerate, os.str());
    }
    acc += 1.0 / (y * y);
  }
  return -10.0 * std::log10(acc / static_cast<double>(values.size()));
}

// Smaller-the-better: eta = -10 log10( mean(y_i^2) ). An all-zero set has
// an infinite ratio and is reported as degenerate.
inline double snr_smaller(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::argument, "snr: empty replicate set");
  double acc = 0.0;
  for (double y : values) {
    if (!std::isfinite(y)) throw Error(ErrorCode::degenerate, "smaller-the-better SNR: non-finite response");
    acc += y * y;
  }
  if (acc == 0.0) {
    throw Error(ErrorCode::degenerate, "smaller-the-better SNR is +inf for an all-zero replicate set");
  }
  return -10.0 * std::log10(acc / static_cast<double>(values.size()));
}

inline double snr(std::span<const double> values, Direction d) {
  return d == Direction::larger_is_better ? snr_larger(values) : snr_smaller(values);
}

// Response per replicate, then the direction-appropriate SNR over them.
inline double snr_for_approach(std::span<const TrialMetrics> replicates, Approach approach,
                               const ResponseConfig& cfg = {}) {
  std::vector<double> responses;
  responses.reserve(replicates.size());
  for (const auto& m : replicates) responses.push_back(compute_response(m, approach, cfg));
  return snr(responses, direction_of(approach));
}

inline double snr_for_approach(const TrialMetrics& m, Approach approach,
                               const ResponseConfig& cfg = {}) {
  return snr_for_approach(std::span<const TrialMetrics>(&m, 1), approach, cfg);
}

}  // namespace taguchi
