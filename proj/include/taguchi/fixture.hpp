#pragma once

#include <array>
#include <string>
#include <vector>

#include "taguchi/design.hpp"
#include "taguchi/response.hpp"

// Reference CNN study: eight hyperparameters, the metrics of its twelve
// L12 trials, and the validation runs of each approach's optimum. The
// validation runs come from a dataset that is not distributed here, so
// they are plain constants and nothing recomputes them.
namespace taguchi::fixture {

inline FactorSpace cnn_factor_space() {
  return FactorSpace({
      {"Image Size", {"256×256", "512×512"}},
      {"Color Mode", {"Gray", "RGB"}},
      {"Activation Function", {"Tanh", "ReLU"}},
      {"Learning Rate", {"0.001", "0.005"}},
      {"Rescaling", {"True", "False"}},
      {"Shuffle", {"True", "False"}},
      {"V-Flip", {"True", "False"}},
      {"H-Flip", {"True", "False"}},
  });
}

inline constexpr std::size_t learning_rate_column = 3;

// Row r holds trial r+1.
inline constexpr std::array<TrialMetrics, 12> cnn_trials{{
    {0.9875, 0.8000, 0.0402, 0.6523},
    {0.9469, 0.8583, 0.1186, 0.3949},
    {0.9705, 0.7681, 0.0755, 0.8019},
    {0.5228, 0.5049, 0.7005, 0.6931},
    {0.9768, 0.8903, 0.0776, 0.3192},
    {0.4429, 0.0000, 0.6957, 0.7212},
    {0.9896, 0.7972, 0.0294, 1.2909},
    {0.6817, 0.6889, 0.6655, 0.5989},
    {0.5857, 0.0000, 0.9320, 1.2850},
    {0.9835, 0.7549, 0.0600, 1.0193},
    {0.5571, 1.0000, 1.2975, 0.5237},
    {0.5196, 0.4972, 0.6987, 0.6934},
}};

// Metrics observed when each approach's predicted optimum was trained
// (approaches 1..5). Approach 3's entry is the headline validation run.
inline constexpr std::array<TrialMetrics, 5> validation_runs{{
    {0.9815, 0.7931, 0.0537, 0.7157},
    {0.4527, 0.0000, 0.7211, 0.6976},
    {0.9884, 0.8625, 0.0442, 0.5784},
    {0.9902, 0.7771, 0.0325, 0.7071},
    {0.9902, 0.7771, 0.0325, 0.7071},
}};

}  // namespace taguchi::fixture
