#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/fisher_f.hpp>
#include <numbers>
#include <random>

#include "taguchi/special.hpp"

using namespace taguchi::special;
using Catch::Approx;

namespace {

// Closed forms: F(1,3) is the square of a t3 variable, F(1,1) of a Cauchy one.
double f13_tail(double f) {
  const double t = std::sqrt(f) / std::sqrt(3.0);
  return 1.0 - (2.0 / std::numbers::pi) * (std::atan(t) + t / (1.0 + t * t));
}

double f11_tail(double f) { return 1.0 - (2.0 / std::numbers::pi) * std::atan(std::sqrt(f)); }

}  // namespace

TEST_CASE("F(1,3) tail at 10.13", "[special]") {
  CHECK(f_survival(10.13, 1, 3) == Approx(0.050).margin(1e-3));
  CHECK(f_survival(10.13, 1, 3) == Approx(f13_tail(10.13)).margin(1e-10));
}

TEST_CASE("closed-form F(1,3) and F(1,1) tails", "[special]") {
  for (double f : {1e-6, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 9.16, 10.14, 34.1, 100.0, 1e4}) {
    INFO("f = " << f);
    CHECK(f_survival(f, 1, 3) == Approx(f13_tail(f)).margin(1e-10));
    CHECK(f_survival(f, 1, 1) == Approx(f11_tail(f)).margin(1e-10));
  }
}

TEST_CASE("agrees with boost fisher_f", "[special]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> fdist(0.0, 40.0);
  std::uniform_int_distribution<int> df(1, 30);
  for (int i = 0; i < 2000; ++i) {
    const double f = fdist(rng);
    const double d1 = df(rng);
    const double d2 = df(rng);
    const boost::math::fisher_f_distribution<double> dist(d1, d2);
    const double want = boost::math::cdf(boost::math::complement(dist, f));
    REQUIRE(f_survival(f, d1, d2) == Approx(want).margin(1e-10));
  }
}

TEST_CASE("incomplete beta identities", "[special]") {
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    CHECK(incomplete_beta(1, 1, x) == Approx(x).margin(1e-14));
    CHECK(incomplete_beta(3, 1, x) == Approx(x * x * x).margin(1e-14));
    CHECK(incomplete_beta(2.5, 4, x) + incomplete_beta(4, 2.5, 1 - x) == Approx(1.0).margin(1e-13));
  }
}

TEST_CASE("edge statistics", "[special]") {
  CHECK(f_survival(0.0, 1, 3) == 1.0);
  CHECK(f_survival(std::numeric_limits<double>::infinity(), 1, 3) == 0.0);
  CHECK_THROWS(f_survival(1.0, 0, 3));
  CHECK_THROWS(incomplete_beta(1, 1, 1.5));
}
