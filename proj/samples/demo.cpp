// Analyze the bundled twelve-trial CNN study for every approach and print
// the tables to stdout.
#include <iostream>
#include <vector>

#include "taguchi/fixture.hpp"
#include "taguchi/taguchi.hpp"

int main() {
  using namespace taguchi;
  const auto plan = build_l12(fixture::cnn_factor_space());

  std::vector<std::vector<TrialMetrics>> per_row;
  for (const auto& m : fixture::cnn_trials) per_row.push_back({m});

  for (Approach a : all_approaches) {
    const auto table = ResponseTable::from_metrics(plan, per_row, a);
    std::cout << render_tables(make_report_bundle(table), TableFormat::text) << "\n";
  }
}
