#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tailcal/indicators.hpp"

using namespace tailcal;

TEST_CASE("gini examples") {
  const std::vector<double> ones(4, 1.0);
  CHECK(weighted_gini(std::vector<double>{5, 5, 5, 5}, ones) == 0.0);
  CHECK(weighted_gini(std::vector<double>{0, 0, 0, 1}, ones) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(weighted_gini(std::vector<double>{0, 1}, std::vector<double>{3, 1}) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(weighted_gini(std::vector<double>{0, 0}, std::vector<double>{1, 1}), Error);
}

TEST_CASE("gini agrees with the pairwise oracle") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> nd(1, 50);
  std::uniform_real_distribution<double> w(0.1, 20.0), x(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = nd(rng);
    std::vector<double> xs(n), ds(n);
    for (auto& v : ds) v = w(rng);
    for (auto& v : xs) v = std::exp(12 * x(rng)) - (x(rng) < 0.1 ? 3.0 : 0.0);
    double total = 0;
    for (int i = 0; i < n; ++i) total += xs[i] * ds[i];
    if (!(total > 0)) continue;
    CHECK(std::abs(weighted_gini(xs, ds) - oracles::pairwise_gini(xs, ds)) < 1e-10);
  }
}

TEST_CASE("gini is scale invariant") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  std::vector<double> xs(40), ds(40);
  for (auto& v : xs) v = u(rng);
  for (auto& v : ds) v = 1 + u(rng) / 1e4;
  const double g = weighted_gini(xs, ds);
  for (double k : {1e-3, 1e3}) {
    std::vector<double> scaled = xs;
    for (auto& v : scaled) v *= k;
    CHECK(std::abs(weighted_gini(scaled, ds) - g) < 1e-12);
  }
}

TEST_CASE("top shares") {
  CHECK(top_share(std::vector<double>{1, 3}, std::vector<double>{1, 1}, 0.5) == doctest::Approx(0.75));
  CHECK(top_share(std::vector<double>{1, 3, 7}, std::vector<double>{1, 2, 1}, 1.0) == doctest::Approx(1.0));
  CHECK(top_share(std::vector<double>{4, 4, 4}, std::vector<double>{1, 1, 1}, 0.1) == doctest::Approx(0.1));
  // boundary household split: top 30% of 2 equal-weight units takes 60% of the richer one
  CHECK(top_share(std::vector<double>{1, 3}, std::vector<double>{1, 1}, 0.3) == doctest::Approx(0.6 * 3 / 4));
  const SurveyDataset ds = fixtures::deposits_only({1, 1}, {1, 3});
  CHECK(top_share(ds, 0.5) == doctest::Approx(0.75));
}

TEST_CASE("weighted quantile") {
  CHECK(weighted_quantile(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 1}, 0.5) == 2.0);
  CHECK(weighted_quantile(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 5}, 0.5) == 3.0);
}

TEST_CASE("ccdf points") {
  SUBCASE("single observation") {
    const auto pts = ccdf_points(fixtures::deposits_only({3}, {7}), 1.0);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].wealth == 7.0);
    CHECK(pts[0].survivor == 1.0);
  }
  SUBCASE("empty tail") { CHECK(ccdf_points(fixtures::deposits_only({3}, {7}), 10.0).empty()); }
  SUBCASE("Pareto grid follows the power law") {
    const SurveyDataset ds = fixtures::pareto_grid(2000, 1.5, 1e6);
    const auto pts = ccdf_points(ds, 1e6);
    REQUIRE(pts.size() == 2000);
    double prev = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(pts[i].survivor >= prev);
      prev = pts[i].survivor;
      if (i >= 20) CHECK(std::abs(pts[i].survivor / std::pow(1e6 / pts[i].wealth, 1.5) - 1) < 0.05);
    }
  }
}

TEST_CASE("lorenz curve") {
  const auto pts = lorenz_curve(fixtures::deposits_only({1, 1, 1, 1}, {0, 0, 0, 4}));
  REQUIRE_FALSE(pts.empty());
  CHECK(pts.back().population_share == doctest::Approx(1.0));
  CHECK(pts.back().wealth_share == doctest::Approx(1.0));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].population_share >= pts[i - 1].population_share);
    CHECK(pts[i].wealth_share >= pts[i - 1].wealth_share);
    CHECK(pts[i].wealth_share <= pts[i].population_share + 1e-15);
  }
}

TEST_CASE("indicator report") {
  const SurveyDataset ds = fixtures::pareto_grid(1000, 2.0, 1.0);
  MacroBenchmarks bm;
  bm.item_totals[Item::deposits] = 2 * horvitz_thompson(ds, Variable::of(Item::deposits));
  const IndicatorReport rep = compute_indicators(ds, &bm);
  CHECK(rep.household_count_weighted == 1000.0);
  CHECK(rep.coverage_ratios.at(Item::deposits) == doctest::Approx(0.5));
  CHECK(rep.top_shares.size() == 4);
  double prev = 0;
  for (const auto& [p, s] : rep.top_shares) {
    CHECK(s > prev);
    CHECK(s > p);
    prev = s;
  }
  CHECK(rep.bottom50_share < 0.5);
  CHECK(rep.median < rep.mean);
  // Pareto(2): Gini = 1 / (2 alpha - 1)
  CHECK(rep.gini == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}
