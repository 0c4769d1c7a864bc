#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "tailcal/synth.hpp"

using namespace tailcal;

namespace {

const Population& default_population() {
  static const Population pop = generate_population(PopulationSpec{});
  return pop;
}

}  // namespace

TEST_CASE("oracle benchmarks are the column sums") {
  const Population& pop = default_population();
  REQUIRE(pop.table.size() == 100000);
  for (Item it : kAllItems) {
    double s = 0;
    for (const Household& h : pop.table.households) s += h.amount(it);
    CHECK(pop.oracle.benchmarks.item(it) == doctest::Approx(s).epsilon(1e-12));
  }
  double north = 0;
  for (const Household& h : pop.table.households) north += h.demographics[0] == "north";
  CHECK(pop.oracle.benchmarks.demographic_counts.at("region=north") == north);
  CHECK(pop.oracle.tail_count == pop.count_above(1e6));
  CHECK(std::is_sorted(pop.sorted_wealth.begin(), pop.sorted_wealth.end()));
  CHECK(pop.wealth_above(pop.sorted_wealth.back()) == pop.sorted_wealth.back());
}

TEST_CASE("same seed, same population") {
  PopulationSpec spec;
  spec.N = 2000;
  const Population a = generate_population(spec);
  const Population b = generate_population(spec);
  CHECK(a.sorted_wealth == b.sorted_wealth);
  spec.seed = 9;
  CHECK(generate_population(spec).sorted_wealth != a.sorted_wealth);
}

TEST_CASE("tail follows the Pareto law") {
  PopulationSpec spec;
  spec.tail_alpha = 2.0;
  const Population pop = generate_population(spec);
  std::vector<double> tail;
  for (double w : pop.sorted_wealth)
    if (w >= spec.tail_w0) tail.push_back(w);
  REQUIRE(tail.size() > 1000);
  double ks = 0;
  const double n = static_cast<double>(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i) {
    const double F = 1 - std::pow(spec.tail_w0 / tail[i], 2.0);
    ks = std::max({ks, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  CHECK(ks < 0.05);
}

TEST_CASE("pure lognormal population") {
  PopulationSpec spec;
  spec.N = 5000;
  spec.tail_fraction = 0.0;
  const Population pop = generate_population(spec);
  CHECK(pop.table.size() == 5000);
  CHECK_FALSE(pop.oracle.indicators.alpha_final.has_value());
}

TEST_CASE("survey draws") {
  const Population& pop = default_population();
  SUBCASE("error-free sample tracks the benchmarks") {
    const SurveyDraw d = draw_survey(pop, SamplingSpec{});
    CHECK(d.survey.size() > 4500);
    CHECK(d.survey.size() < 5500);
    CHECK(d.rich_list.size() == 20);
    CHECK(d.rich_list.entries.front().wealth == pop.sorted_wealth.back());
    const double cr = coverage_ratio(d.survey, d.benchmarks, Item::deposits);
    CHECK(cr > 0.9);
    CHECK(cr < 1.1);
  }
  SUBCASE("under-reported deposits") {
    SamplingSpec s;
    s.underreporting[index(Item::deposits)] = 0.8;
    const SurveyDraw d = draw_survey(pop, s);
    const SurveyDraw clean = draw_survey(pop, SamplingSpec{});
    CHECK(coverage_ratio(d.survey, d.benchmarks, Item::deposits) ==
          doctest::Approx(0.8 * coverage_ratio(clean.survey, clean.benchmarks, Item::deposits)).epsilon(1e-9));
  }
  SUBCASE("truncation") {
    SamplingSpec s;
    s.truncation_w1 = pop.sorted_wealth[pop.sorted_wealth.size() - 200];
    const SurveyDraw d = draw_survey(pop, s);
    double top = 0;
    for (const Household& h : d.survey.households) top = std::max(top, h.net());
    CHECK(top <= *s.truncation_w1);
    CHECK(top < pop.sorted_wealth.back());
  }
  SUBCASE("nonresponse thins the top") {
    SamplingSpec s;
    s.nonresponse_floor = 0.2;
    CHECK(s.propensity(1.0) < s.propensity(0.5));
    const SurveyDraw d = draw_survey(pop, s);
    const SurveyDraw clean = draw_survey(pop, SamplingSpec{});
    auto rich = [](const SurveyDataset& ds) {
      std::size_t c = 0;
      for (const Household& h : ds.households) c += h.net() >= 1e6;
      return c;
    };
    CHECK(rich(d.survey) < rich(clean.survey));
  }
}

TEST_CASE("spec validation") {
  PopulationSpec p;
  p.tail_fraction = 1.0;
  CHECK_THROWS_AS(generate_population(p), Error);
  SamplingSpec s;
  s.sample_size = 0;
  CHECK_THROWS_AS(s.validate(), Error);
}
