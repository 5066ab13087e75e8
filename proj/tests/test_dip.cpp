#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "ace/rng.hpp"
#include "ace/stats.hpp"
#include "dip_oracle.hpp"

using namespace ace;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> sorted_uniform(std::size_t n, counter_rng rng) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.uniform();
  std::sort(x.begin(), x.end());
  return x;
}

std::vector<double> sorted_bimodal(std::size_t n, double gap, counter_rng rng) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rng.normal() + (i % 2 ? gap : 0.0);
  std::sort(x.begin(), x.end());
  return x;
}

}  // namespace

TEST_CASE("dip of the 4-point near-bimodal sample") {
  std::vector<double> x = {0.0, 0.01, 0.99, 1.0};
  double d = dip_statistic(x);
  // Hand derivation: the binding unimodal fit is all-concave with slope
  // equality between the middle and last segments, giving D = 49/198.
  CHECK_THAT(d, WithinAbs(49.0 / 198.0, 1e-12));
  CHECK_THAT(d, WithinAbs(dip_oracle(x), 1e-9));
}

TEST_CASE("dip matches the feasibility oracle on random samples") {
  counter_rng rng(314);
  for (int rep = 0; rep < 120; ++rep) {
    counter_rng sub = rng.substream(rep);
    std::size_t n = 2 + sub.below(23);
    std::vector<double> x;
    switch (rep % 3) {
      case 0:
        x = sorted_uniform(n, sub);
        break;
      case 1:
        x = sorted_bimodal(n, 6.0, sub);
        break;
      default: {  // heavy ties
        x.resize(n);
        for (double& v : x) v = static_cast<double>(sub.below(4));
        std::sort(x.begin(), x.end());
        break;
      }
    }
    INFO("rep " << rep << " n " << n);
    REQUIRE_THAT(dip_statistic(x), WithinAbs(dip_oracle(x), 1e-9));
  }
}

TEST_CASE("dip fixtures: smallest cases") {
  CHECK_THAT(dip_statistic(std::vector<double>{0.0, 1.0}), WithinAbs(0.25, 1e-15));
  CHECK_THAT(dip_statistic(std::vector<double>{1.0, 2.0, 3.0}), WithinAbs(1.0 / 6.0, 1e-15));
}

TEST_CASE("dip is invariant under increasing affine maps") {
  counter_rng rng(99);
  for (int rep = 0; rep < 40; ++rep) {
    counter_rng sub = rng.substream(rep);
    auto x = rep % 2 ? sorted_bimodal(40 + sub.below(100), 5.0, sub)
                     : sorted_uniform(40 + sub.below(100), sub);
    double base = dip_statistic(x);
    std::vector<double> y(x);
    for (double& v : y) v = 3.0 * v + 7.0;
    REQUIRE_THAT(dip_statistic(y), WithinAbs(base, 1e-12));
  }
}

TEST_CASE("dip stays in (0, 1/4] on random samples") {
  counter_rng rng(55);
  for (int rep = 0; rep < 1000; ++rep) {
    counter_rng sub = rng.substream(rep);
    std::size_t n = 2 + sub.below(60);
    auto x = rep % 2 ? sorted_bimodal(n, sub.uniform(0.0, 8.0), sub) : sorted_uniform(n, sub);
    double d = dip_statistic(x);
    REQUIRE(d > 0.0);
    REQUIRE(d <= 0.25);
  }
}

TEST_CASE("dip rejects unsorted and too-short input") {
  CHECK_THROWS_AS(dip_statistic(std::vector<double>{1.0}), error);
  CHECK_THROWS_AS(dip_statistic(std::vector<double>{2.0, 1.0}), error);
}

TEST_CASE("separated mixture dips above the uniform-null 99th percentile") {
  counter_rng rng(3);
  std::size_t n = 200;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rng.normal() + (i % 2 ? 10.0 : 0.0);
  std::sort(x.begin(), x.end());
  double observed = dip_statistic(x);

  std::vector<double> null_dips(1000);
  counter_rng nullrng(1234);
  for (std::size_t b = 0; b < null_dips.size(); ++b)
    null_dips[b] = dip_statistic(sorted_uniform(n, nullrng.substream(b)));
  std::sort(null_dips.begin(), null_dips.end());
  double q99 = null_dips[989];
  CHECK(observed > q99);
}

TEST_CASE("dip p-value formula and reproducibility") {
  counter_rng rng(8);
  std::vector<double> x(120);
  for (double& v : x) v = rng.normal() + (rng.uniform() < 0.5 ? 8.0 : 0.0);

  auto r1 = dip_pvalue(x, 500, 42);
  auto r2 = dip_pvalue(x, 500, 42);
  CHECK(r1.dip == r2.dip);
  CHECK(r1.p_value == r2.p_value);
  CHECK(r1.replicates == 500);

  auto r8 = dip_pvalue(x, 500, 42, 8);  // thread count must not matter
  CHECK(r1.p_value == r8.p_value);

  // b = 1: the add-one estimator can only produce 1/2 or 1.
  auto tiny = dip_pvalue(x, 1, 7);
  CHECK((tiny.p_value == 0.5 || tiny.p_value == 1.0));
}

TEST_CASE("uniform null calibration of the p-value") {
  // p should exceed 0.05 for most uniform samples.
  int above = 0;
  for (int seed = 0; seed < 100; ++seed) {
    auto x = sorted_uniform(200, counter_rng(9000 + seed));
    if (dip_pvalue(x, 500, seed).p_value > 0.05) ++above;
  }
  CHECK(above >= 90);
}

TEST_CASE("strongly bimodal sample is detected") {
  auto x = sorted_bimodal(200, 10.0, counter_rng(77));
  CHECK(dip_pvalue(x, 1000, 5).p_value <= 0.01);
}
