#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "taguchi/fixture.hpp"
#include "taguchi/taguchi.hpp"

namespace test_support {

inline taguchi::DesignMatrix cnn_plan() { return taguchi::build_l12(taguchi::fixture::cnn_factor_space()); }

inline std::vector<std::vector<taguchi::TrialMetrics>> cnn_metrics() {
  std::vector<std::vector<taguchi::TrialMetrics>> out;
  for (const auto& m : taguchi::fixture::cnn_trials) out.push_back({m});
  return out;
}

inline taguchi::ResponseTable cnn_table(taguchi::Approach a, const taguchi::ResponseConfig& cfg = {}) {
  return taguchi::ResponseTable::from_metrics(cnn_plan(), cnn_metrics(), a, cfg);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("taguchi_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace test_support
