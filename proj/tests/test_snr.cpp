#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "published.hpp"
#include "support.hpp"

using namespace taguchi;
using Catch::Approx;

namespace {
double larger(std::vector<double> v) { return snr_larger(v); }
double smaller(std::vector<double> v) { return snr_smaller(v); }
}  // namespace

TEST_CASE("single-value SNRs", "[snr]") {
  CHECK(larger({0.89375}) == Approx(-0.9757).margin(1e-3));
  CHECK(larger({1.0}) == 0.0);
  CHECK(larger({0.09897}) == Approx(-20.0902).margin(1e-3));
  CHECK(smaller({0.34625}) == Approx(9.2122).margin(1e-3));
  CHECK(smaller({1.0}) == 0.0);
  CHECK(smaller({1.10850}) == Approx(-0.8947).margin(1e-3));
}

TEST_CASE("snr_for_approach on single trials", "[snr]") {
  const auto& t = fixture::cnn_trials;
  CHECK(snr_for_approach(t[4], Approach::log_combined) == Approx(6.5838).margin(1e-3));
  CHECK(snr_for_approach(t[5], Approach::accuracy) == Approx(-13.0945).margin(1e-3));
  CHECK(snr_for_approach(t[4], Approach::loss) == Approx(14.0492).margin(1e-3));
}

TEST_CASE("all twelve SNRs for approaches 1-3", "[snr]") {
  const auto& t = fixture::cnn_trials;
  for (std::size_t r = 0; r < 12; ++r) {
    INFO("row " << r + 1);
    CHECK(snr_for_approach(t[r], Approach::accuracy) == Approx(published::approach1[r].snr).margin(1e-3));
    CHECK(snr_for_approach(t[r], Approach::loss) == Approx(published::approach2[r].snr).margin(1e-3));
    CHECK(snr_for_approach(t[r], Approach::log_combined) == Approx(published::approach3[r].snr).margin(1e-3));
  }
}

TEST_CASE("replicate formula", "[snr]") {
  // -10 log10((1/0.25 + 1/1)/2) and -10 log10((0.25 + 1)/2)
  CHECK(larger({0.5, 1.0}) == Approx(-10.0 * std::log10(2.5)).margin(1e-12));
  CHECK(smaller({0.5, 1.0}) == Approx(-10.0 * std::log10(0.625)).margin(1e-12));
}

TEST_CASE("degenerate inputs", "[snr]") {
  CHECK_THROWS_AS(larger({0.5, 0.0}), Error);
  CHECK_THROWS_AS(larger({-0.1}), Error);
  CHECK_THROWS_AS(smaller({0.0, 0.0}), Error);
  CHECK_THROWS_AS(larger({}), Error);
  CHECK(std::isfinite(smaller({0.0, 1.0})));
  try {
    larger({-0.2});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate);
  }
}

TEST_CASE("monotonicity and n=1 symmetry over random inputs", "[snr][property]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> y(1e-3, 10.0);
  std::uniform_real_distribution<double> bump(1e-3, 1.0);
  std::uniform_int_distribution<int> n(1, 6);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> v(static_cast<std::size_t>(n(rng)));
    for (auto& x : v) x = y(rng);
    const double l = snr_larger(v);
    const double s = snr_smaller(v);
    auto w = v;
    w[static_cast<std::size_t>(i) % w.size()] += bump(rng);
    REQUIRE(snr_larger(w) > l);
    REQUIRE(snr_smaller(w) < s);
    REQUIRE(snr_larger(std::vector<double>{v[0]}) == Approx(-snr_smaller(std::vector<double>{v[0]})).margin(1e-12));

    const double c = y(rng);
    auto scaled = v;
    for (auto& x : scaled) x *= c;
    REQUIRE(snr_larger(scaled) == Approx(l + 20.0 * std::log10(c)).margin(1e-9));
  }
}
