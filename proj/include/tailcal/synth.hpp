#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailcal/dataset.hpp"
#include "tailcal/indicators.hpp"

namespace tailcal {

/// Portfolio composition of one wealth band. Asset shares are Dirichlet
/// means over the eight asset items for owners; `ownership` is the
/// probability of holding each asset at all.
struct PortfolioProfile {
  std::array<double, kItemCount - 1> asset_shares{};
  std::array<double, kItemCount - 1> ownership{};
  double liability_probability = 0.0;
  double liability_ratio = 0.0;  // liabilities / gross for debtors
};

PortfolioProfile default_body_profile();
PortfolioProfile default_tail_profile();

struct DemographicVar {
  std::string name;
  std::vector<std::string> categories;
  std::vector<double> probabilities;
};

struct PopulationSpec {
  std::size_t N = 100000;
  double body_mu = 12.8;  // log of the lognormal body median
  double body_sigma = 0.8;
  double tail_fraction = 0.142;  // keeps the density continuous at tail_w0 for the defaults above
  double tail_w0 = 1e6;
  double tail_alpha = 1.5;
  PortfolioProfile body = default_body_profile();
  PortfolioProfile tail = default_tail_profile();
  double share_concentration = 20.0;
  std::vector<DemographicVar> demographics = {
      {"region", {"north", "centre", "south"}, {0.45, 0.25, 0.30}},
      {"size", {"1", "2", "3plus"}, {0.30, 0.35, 0.35}}};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground truth computed on the full population.
struct PopulationOracle {
  IndicatorReport indicators;  // unit weights, net wealth
  MacroBenchmarks benchmarks;  // exact column sums and cell counts
  std::size_t tail_count = 0;  // households with net wealth >= tail_w0
  double total_net_wealth = 0.0;
};

struct Population {
  SurveyDataset table;  // unit weights, true amounts
  PopulationOracle oracle;
  std::vector<double> sorted_wealth;  // ascending net wealth

  /// Households with net wealth >= w.
  std::size_t count_above(double w) const;
  /// Sum of net wealth of households with net wealth >= w.
  double wealth_above(double w) const;
};

Population generate_population(const PopulationSpec& spec);

struct SamplingSpec {
  std::size_t sample_size = 5000;
  /// Logistic response propensity in the wealth-rank percentile q (1 = richest):
  /// floor + (1 - floor) / (1 + exp(slope (q - midpoint))). floor = 1 disables it.
  double nonresponse_floor = 1.0;
  double nonresponse_midpoint = 0.95;
  double nonresponse_slope = 40.0;
  /// Households richer than this are never sampled.
  std::optional<double> truncation_w1;
  std::array<double, kItemCount> underreporting = {1, 1, 1, 1, 1, 1, 1, 1, 1};  // zeta_item
  std::array<double, kItemCount> zero_reporting{};
  std::size_t rich_list_size = 20;
  std::uint64_t seed = 2;

  double propensity(double rank_percentile) const;
  void validate() const;
};

struct SurveyDraw {
  SurveyDataset survey;
  RichList rich_list;
  MacroBenchmarks benchmarks;
};

/// Poisson sample with design weight N / sample_size (the designer does not
/// know the response propensities); measurement error is applied to the
/// reported items, the rich list is error-free.
SurveyDraw draw_survey(const Population& pop, const SamplingSpec& spec);

}  // namespace tailcal
