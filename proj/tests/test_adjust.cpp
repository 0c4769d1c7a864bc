#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "tailcal/adjust.hpp"
#include "tailcal/indicators.hpp"

using namespace tailcal;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::MalformedInput;
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 3000 bottom households spread below 1e6 and a Pareto(1.5) tail of 500
// above it, two regions, deposits and shares in both parts.
SurveyDataset two_part_survey(double tail_weight) {
  SurveyDataset ds;
  ds.demographic_vars = {"region"};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 3000; ++i) {
    Household h = fixtures::deposit_household("b" + std::to_string(i), 10.0, 0.0);
    const double w = 1e4 + 9e5 * u(rng);
    h.portfolio[index(Item::deposits)] = 0.7 * w;
    h.portfolio[index(Item::shares)] = 0.3 * w;
    h.demographics = {i % 2 ? "north" : "south"};
    ds.households.push_back(h);
  }
  const SurveyDataset grid = fixtures::pareto_grid(500, 1.5, 1e6, tail_weight);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Household h = grid.households[i];
    const double w = h.net();
    h.portfolio[index(Item::deposits)] = 0.2 * w;
    h.portfolio[index(Item::shares)] = 0.8 * w;
    h.demographics = {i % 2 ? "north" : "south"};
    ds.households.push_back(h);
  }
  return ds;
}

MacroBenchmarks region_counts(const SurveyDataset& ds, double scale) {
  MacroBenchmarks bm;
  for (const Household& h : ds.households) bm.demographic_counts["region=" + h.demographics[0]] += h.weight * scale;
  return bm;
}

double cell_weight(const SurveyDataset& ds, const std::string& cell) {
  double s = 0;
  for (const Household& h : ds.households)
    if (!h.synthetic && h.demographics[0] == cell) s += h.weight;
  return s;
}

double tail_weight_sum(const SurveyDataset& ds, double w0) {
  double s = 0;
  for (const Household& h : ds.households)
    if (h.net() >= w0) s += h.weight;
  return s;
}

}  // namespace

TEST_CASE("wealth calibration factors by hand") {
  const Eigen::VectorXd a = wealth_calibration_factors(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 3), 8.0);
  CHECK(a(0) == doctest::Approx(2.0));
  CHECK(a(1) == doctest::Approx(2.0));
  const Eigen::VectorXd b = wealth_calibration_factors(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1), 6.0);
  CHECK(b(0) == doctest::Approx(1.6));
  CHECK(b(1) == doctest::Approx(2.2));
  CHECK(1 * b(0) * 1 + 2 * b(1) * 1 == doctest::Approx(6.0));
  const Eigen::VectorXd c = wealth_calibration_factors(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 1), 3.0);
  CHECK((c.array() - 1).abs().maxCoeff() < 1e-15);
}

TEST_CASE("difference adjustment") {
  const SurveyDataset ds = fixtures::deposits_only({1, 1}, {0, 10});
  const Eigen::VectorXd b = Eigen::Vector2d(0.5, 0.5);
  SUBCASE("zero gap") {
    const AdjustmentOutcome o = difference_adjustment(ds, Item::deposits, b, 10.0);
    CHECK(o.dataset.households[1].amount(Item::deposits) == 10.0);
  }
  SUBCASE("positive gap reaches zero reporters") {
    const AdjustmentOutcome o = difference_adjustment(ds, Item::deposits, b, 20.0);
    CHECK(o.dataset.households[0].amount(Item::deposits) == 5.0);
    CHECK(o.dataset.households[1].amount(Item::deposits) == 15.0);
    CHECK(horvitz_thompson(o.dataset, Variable::of(Item::deposits)) == 20.0);
    CHECK(o.warnings.empty());
  }
  SUBCASE("negative gap is flagged") {
    const AdjustmentOutcome o = difference_adjustment(ds, Item::deposits, b, 8.0);
    CHECK(o.dataset.households[0].amount(Item::deposits) == -1.0);
    CHECK(o.dataset.households[1].amount(Item::deposits) == 9.0);
    REQUIRE(o.warnings.size() == 1);
    CHECK(o.warnings[0].find("NegativeAmountProduced") == 0);
  }
  CHECK(code_of([&] { difference_adjustment(ds, Item::deposits, Eigen::Vector2d(0.5, 0.6), 20.0); }) ==
        ErrorCode::SharesNotNormalized);
}

TEST_CASE("missing tail observation") {
  SurveyDataset ds = fixtures::deposits_only({1, 1}, {5, 1});
  ParetoFit fit;
  fit.w0 = 1;
  fit.alpha = 2;
  fit.t_d_top = 100;
  fit.w1 = 2;
  derive_tail_totals(fit);
  REQUIRE(fit.t_d_miss == doctest::Approx(25.0));
  REQUIRE(*fit.t_w_miss == doctest::Approx(100.0));

  Portfolio shares{};
  shares[index(Item::housing_wealth)] = 0.6;
  shares[index(Item::deposits)] = 0.4;
  const AdjustmentOutcome o = impute_missing_tail_observation(ds, fit, shares);
  REQUIRE(o.dataset.size() == 3);
  const Household& h = o.dataset.households.back();
  CHECK(h.synthetic);
  CHECK(o.synthetic_tail_observation == h.id);
  CHECK(h.weight == doctest::Approx(25.0));
  CHECK(h.net() == doctest::Approx(4.0));
  CHECK(h.amount(Item::housing_wealth) == doctest::Approx(2.4));
  CHECK(h.amount(Item::deposits) == doctest::Approx(1.6));

  fit.w1 = 1e300;
  derive_tail_totals(fit);
  CHECK(impute_missing_tail_observation(ds, fit, shares).dataset.size() == 2);
}

TEST_CASE("rich list decomposition") {
  RichList rl;
  rl.entries = {{"x", 10.0, std::nullopt}};
  SUBCASE("all deposits") {
    const RichList out = integrate_rich_list(rl, fixtures::deposits_only({1, 1}, {5, 1}), 2.0);
    CHECK((*out.entries[0].portfolio)[index(Item::deposits)] == doctest::Approx(10.0));
  }
  SUBCASE("two items half and half") {
    SurveyDataset ds = fixtures::deposits_only({1}, {4});
    ds.households[0].portfolio[index(Item::bonds)] = 4;
    rl.entries[0].wealth = 8.0;
    const Portfolio p = *integrate_rich_list(rl, ds, 1.0).entries[0].portfolio;
    CHECK(p[index(Item::deposits)] == doctest::Approx(4.0));
    CHECK(p[index(Item::bonds)] == doctest::Approx(4.0));
  }
  SUBCASE("decomposition adds back to net worth") {
    SurveyDataset ds = fixtures::deposits_only({2, 3}, {40, 10});
    ds.households[0].portfolio[index(Item::housing_wealth)] = 60;
    ds.households[0].portfolio[index(Item::liabilities)] = 25;
    ds.households[1].portfolio[index(Item::shares)] = 30;
    rl.entries = {{"a", 7e8, std::nullopt}, {"b", 3.3e8, std::nullopt}};
    for (const auto& e : integrate_rich_list(rl, ds, 1.0).entries)
      CHECK(std::abs(net_wealth(*e.portfolio) - e.wealth) <= 1e-9 * e.wealth);
  }
  CHECK(code_of([&] { integrate_rich_list(rl, fixtures::deposits_only({1}, {1}), 5.0); }) == ErrorCode::EmptyTail);
}

TEST_CASE("subtracting tail holdings from benchmarks") {
  MacroBenchmarks bm;
  bm.item_totals[Item::deposits] = 100;
  bm.item_totals[Item::shares] = 100;
  ParetoFit fit;
  fit.t_w_top = 100.0;
  fit.t_w_miss = 0.0;
  Portfolio shares{};
  shares[index(Item::deposits)] = 0.3;
  shares[index(Item::shares)] = 1.2;
  std::vector<std::string> warnings;
  const MacroBenchmarks out = subtract_tail_totals(bm, fit, shares, TailPart::top, &warnings);
  CHECK(out.item(Item::deposits) == doctest::Approx(70.0));
  CHECK(out.item(Item::shares) == 0.0);
  CHECK(warnings.size() == 1);
  fit.t_w_top = 0.0;
  CHECK(subtract_tail_totals(bm, fit, shares).item_totals == bm.item_totals);
}

TEST_CASE("proportional allocation") {
  SurveyDataset ds = fixtures::deposits_only({1, 2, 1, 3, 2}, {3, 8, 1, 40, 12});
  const double ht = horvitz_thompson(ds, Variable::of(Item::deposits));
  const double g0 = weighted_gini(ds, Variable::of(Item::deposits));
  const AdjustmentOutcome o = proportional_allocation(ds, {{Item::deposits, 2 * ht}});
  CHECK(coverage_ratio(o.dataset, [&] {
          MacroBenchmarks bm;
          bm.item_totals[Item::deposits] = 2 * ht;
          return bm;
        }(), Item::deposits) == doctest::Approx(1.0));
  CHECK(o.dataset.households[3].amount(Item::deposits) == 80.0);
  CHECK(weighted_gini(o.dataset, Variable::of(Item::deposits)) == doctest::Approx(g0).epsilon(1e-12));
  CHECK(o.dataset.weights() == ds.weights());
  CHECK(code_of([&] { proportional_allocation(ds, {{Item::bonds, 5.0}}); }) == ErrorCode::ZeroItemTotal);
}

TEST_CASE("multivariate imputation") {
  SUBCASE("targets already met") {
    const SurveyDataset ds = fixtures::deposits_only({1, 2, 3}, {5, 7, 9});
    const AdjustmentOutcome o =
        multivariate_imputation(ds, {{Item::deposits, horvitz_thompson(ds, Variable::of(Item::deposits))}}, 1.0);
    CHECK((o.amount_factors.array() - 1).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("large tau on equal wealth is uniform") {
    const SurveyDataset ds = fixtures::deposits_only({1, 2, 3}, {1, 1, 1});
    const AdjustmentOutcome o = multivariate_imputation(ds, {{Item::deposits, 12.0}}, 1e6);
    const AdjustmentOutcome prop = proportional_allocation(ds, {{Item::deposits, 12.0}});
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(o.dataset.households[i].amount(Item::deposits) ==
            doctest::Approx(prop.dataset.households[i].amount(Item::deposits)).epsilon(1e-12));
  }
  SUBCASE("totals are met and weights untouched") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(1.0, 100.0);
    SurveyDataset ds;
    for (int i = 0; i < 60; ++i) {
      Household h = fixtures::deposit_household(std::to_string(i), u(rng), u(rng));
      h.portfolio[index(Item::shares)] = u(rng);
      h.portfolio[index(Item::housing_wealth)] = 10 * u(rng);
      ds.households.push_back(h);
    }
    const double td = 1.1 * horvitz_thompson(ds, Variable::of(Item::deposits));
    const double ts = 1.05 * horvitz_thompson(ds, Variable::of(Item::shares));
    const AdjustmentOutcome o = multivariate_imputation(ds, {{Item::deposits, td}, {Item::shares, ts}}, 1.0);
    CHECK(relative(horvitz_thompson(o.dataset, Variable::of(Item::deposits)), td) < 1e-6);
    CHECK(relative(horvitz_thompson(o.dataset, Variable::of(Item::shares)), ts) < 1e-6);
    CHECK(o.dataset.weights() == ds.weights());
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK(o.dataset.households[i].amount(Item::housing_wealth) ==
            doctest::Approx(o.amount_factors(static_cast<Eigen::Index>(i)) * ds.households[i].amount(Item::housing_wealth)));
  }
  SUBCASE("tau zero is stationary in the item") {
    const SurveyDataset ds = fixtures::deposits_only({1, 2, 3, 1}, {4, 1, 6, 2});
    const AdjustmentOutcome o = multivariate_imputation(ds, {{Item::deposits, 30.0}}, 0.0);
    CalibrationProblem p;
    p.base_weights = ds.weights();
    p.aux = ds.amounts(Item::deposits);
    p.targets = Eigen::VectorXd::Constant(1, 30.0);
    CalibrationResult r;
    r.factors = o.amount_factors;
    r.multipliers = Eigen::VectorXd::Constant(1, (o.amount_factors(0) - 1) / 4.0);
    const KktDiagnostics kkt = kkt_residuals(p, r);
    CHECK(kkt.stationarity < 1e-12);
    CHECK(std::abs(kkt.residuals(0)) < 1e-10);
  }
  SUBCASE("negative factors are fatal") {
    const SurveyDataset ds = fixtures::deposits_only({1, 1}, {1, 100});
    CHECK(code_of([&] { multivariate_imputation(ds, {{Item::deposits, 0.5}}, 0.0); }) ==
          ErrorCode::NegativeAmountProduced);
  }
}

TEST_CASE("univariate imputation with inverse constants is proportional allocation") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.1, 50.0), g(0.3, 3.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> d(12), y(12);
    for (auto& v : d) v = u(rng);
    for (auto& v : y) v = u(rng);
    const SurveyDataset ds = fixtures::deposits_only(d, y);
    const double t = g(rng) * horvitz_thompson(ds, Variable::of(Item::deposits));
    const Eigen::VectorXd inv_y = ds.amounts(Item::deposits).cwiseInverse();
    const AdjustmentOutcome mi = multivariate_imputation(ds, {{Item::deposits, t}}, 0.0, inv_y);
    const AdjustmentOutcome pa = proportional_allocation(ds, {{Item::deposits, t}});
    for (std::size_t i = 0; i < ds.size(); ++i)
      CHECK(std::abs(mi.amount_factors(static_cast<Eigen::Index>(i)) -
                     pa.dataset.households[i].amount(Item::deposits) / y[i]) < 1e-8);
  }
}

TEST_CASE("pareto calibration") {
  const SurveyDataset full = two_part_survey(10.0);
  const MacroBenchmarks bm = region_counts(full, 1.0);
  // tail under-represented by half
  const SurveyDataset ds = two_part_survey(5.0);
  ParetoOptions po;
  po.fixed_w0 = 1e6;
  const ParetoFit fit = fit_pareto(ds, {}, po);
  const AdjustmentOutcome o = pareto_calibration(ds, fit, bm);

  CHECK(relative(tail_weight_sum(o.dataset, 1e6), fit.t_d_obs) < 0.01);
  for (const char* cell : {"north", "south"})
    CHECK(relative(cell_weight(o.dataset, cell), bm.demographic_counts.at(std::string("region=") + cell)) < 1e-6);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(o.dataset.households[i].portfolio == ds.households[i].portfolio);
  double bottom_before = 0, bottom_after = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.households[i].net() < 1e6) {
      bottom_before += ds.households[i].weight * ds.households[i].amount(Item::shares);
      bottom_after += o.dataset.households[i].weight * o.dataset.households[i].amount(Item::shares);
    }
  CHECK(relative(bottom_after, bottom_before) < 1e-6);

  SUBCASE("re-running on its own output is the identity") {
    const AdjustmentOutcome again = pareto_calibration(o.dataset, fit, bm);
    CHECK((again.weight_factors.array() - 1).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("simultaneous run on error-free data stays put") {
  const SurveyDataset ds = two_part_survey(10.0);
  MacroBenchmarks bm = region_counts(ds, 1.0);
  AdjustmentConfig cfg;
  cfg.fixed_w0 = 1e6;
  cfg.comparable_items = {Item::deposits, Item::shares};
  ParetoOptions po;
  po.fixed_w0 = 1e6;
  const ParetoFit fit = fit_pareto(ds, {}, po);
  // Benchmarks consistent with the Pareto-calibrated weights plus the
  // implied missing tail.
  const SurveyDataset reweighted = pareto_calibration(ds, fit, bm, cfg).dataset;
  const Portfolio shares = tail_portfolio_shares(ds, 1e6);
  for (Item it : {Item::deposits, Item::shares})
    bm.item_totals[it] = horvitz_thompson(reweighted, Variable::of(it)) + shares[index(it)] * *fit.t_w_miss;

  const AdjustmentOutcome o = simultaneous(ds, {}, bm, cfg);
  CHECK(o.converged);
  CHECK(o.iterations == 1);
  CHECK((o.amount_factors.array() - 1).abs().maxCoeff() < 1e-6);
  for (Item it : {Item::deposits, Item::shares})
    CHECK(relative(horvitz_thompson(o.dataset, Variable::of(it)), bm.item(it)) < 1e-4);
  REQUIRE(o.synthetic_tail_observation);
  CHECK(o.dataset.households.back().weight == doctest::Approx(fit.t_d_miss));
}

TEST_CASE("configuration checks") {
  AdjustmentConfig cfg;
  cfg.tau = -1;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidArgument);
  CHECK(parse_method("single_iteration_portfolio") == Method::single_iteration_portfolio);
  CHECK(code_of([] { parse_method("magic"); }) == ErrorCode::InvalidArgument);
  for (Method m : {Method::survey_missing_tail, Method::pareto_cal, Method::pareto_cal_proportional,
                   Method::single_iteration, Method::single_iteration_portfolio, Method::simultaneous})
    CHECK(parse_method(to_string(m)) == m);
}
