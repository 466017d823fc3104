// Test runner speaking the trial protocol over an additive surface.
//
//   fake_runner [--fail-row N] [--garbage-row N] [--double-row N]
//               [--sleep-ms MS] [--chatter] [--report-cwd] [--ta-over-row N]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <string>
#include <thread>

#include "json.hpp"

namespace {

// +1 at the first label of each factor.
double coded(const nlohmann::json& factors, const char* name, const char* level_one) {
  if (!factors.contains(name)) return 0.0;
  return factors[name].get<std::string>() == level_one ? 1.0 : -1.0;
}

}  // namespace

int main(int argc, char** argv) {
  long fail_row = -1, garbage_row = -1, double_row = -1, over_row = -1, sleep_ms = 0;
  bool chatter = false, report_cwd = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&] { return i + 1 < argc ? std::atol(argv[++i]) : -1L; };
    if (a == "--fail-row") fail_row = next();
    else if (a == "--garbage-row") garbage_row = next();
    else if (a == "--double-row") double_row = next();
    else if (a == "--ta-over-row") over_row = next();
    else if (a == "--sleep-ms") sleep_ms = next();
    else if (a == "--chatter") chatter = true;
    else if (a == "--report-cwd") report_cwd = true;
  }

  const std::string input{std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  const auto req = nlohmann::json::parse(input, nullptr, false);
  if (req.is_discarded() || !req.contains("row") || !req.contains("factors")) {
    std::cerr << "malformed trial request\n";
    return 2;
  }
  const long row = req["row"].get<long>();
  const auto& f = req["factors"];

  if (sleep_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
  if (report_cwd) std::cerr << "cwd=" << std::filesystem::current_path().string() << "\n";
  if (chatter) std::cout << "epoch 1/10 loss=0.5\n";
  if (row == fail_row) {
    std::cerr << "simulated crash\n";
    return 3;
  }
  if (row == garbage_row) {
    std::cout << "no metrics here\n";
    return 0;
  }

  const double lr = coded(f, "Learning Rate", "0.001");
  const double img = coded(f, "Image Size", "256×256");
  const double act = coded(f, "Activation Function", "Tanh");
  const double shuffle = coded(f, "Shuffle", "True");
  const double wobble = 0.001 * static_cast<double>((row * 37) % 7 - 3) / 3.0;

  nlohmann::ordered_json out;
  out["ta"] = row == over_row ? 1.5 : 0.70 + 0.15 * lr + 0.04 * img - 0.03 * act + 0.01 * shuffle + wobble;
  out["va"] = 0.60 + 0.12 * lr + 0.03 * img - 0.02 * act + 0.01 * shuffle + wobble;
  out["tl"] = 0.40 - 0.15 * lr - 0.05 * img + 0.03 * act - 0.01 * shuffle + wobble;
  out["vl"] = 0.60 - 0.20 * lr - 0.06 * img + 0.04 * act - 0.01 * shuffle + wobble;
  std::cout << out.dump() << "\n";
  if (row == double_row) std::cout << out.dump() << "\n";
  if (chatter) std::cerr << "done\n";
  return 0;
}
