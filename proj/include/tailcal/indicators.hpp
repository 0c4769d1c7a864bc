#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tailcal/dataset.hpp"

namespace tailcal {

inline constexpr std::array<double, 4> kTopShareLevels = {0.01, 0.05, 0.10, 0.20};

struct IndicatorReport {
  double gini = 0.0;
  std::map<double, double> top_shares;  // fraction -> share of wealth
  double bottom50_share = 0.0;
  double median = 0.0;
  double mean = 0.0;
  std::map<Item, double> coverage_ratios;
  std::optional<double> alpha_final;
  double household_count_weighted = 0.0;
};

/// Gini of the weight-expanded distribution via the sorted cumulative-weight
/// form; negative values are kept, so the index can exceed 1.
double weighted_gini(std::span<const double> values, std::span<const double> weights);
double weighted_gini(const SurveyDataset& ds, const Variable& var);

/// Share of the total held by the richest fraction p of weighted units. The
/// boundary unit contributes the fraction of its weight needed to reach p.
double top_share(std::span<const double> values, std::span<const double> weights, double p);
double top_share(const SurveyDataset& ds, double p);

/// Weighted median (lower median on exact ties of cumulative weight).
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q);

struct CcdfPoint {
  double wealth = 0.0;
  double survivor = 0.0;  // weight share of tail households at least this rich
};

/// Empirical survivor function of households with wealth >= `above`,
/// ordered by wealth descending.
std::vector<CcdfPoint> ccdf_points(const SurveyDataset& ds, double above);

struct LorenzPoint {
  double population_share = 0.0;
  double wealth_share = 0.0;
};
std::vector<LorenzPoint> lorenz_curve(const SurveyDataset& ds);

struct IndicatorOptions {
  std::optional<WealthConcept> rank_by;  // defaults to the dataset concept
};

/// Indicator set for a dataset; coverage ratios only for items with a
/// positive benchmark.
IndicatorReport compute_indicators(const SurveyDataset& ds, const MacroBenchmarks* bm = nullptr,
                                   const IndicatorOptions& opts = {});

}  // namespace tailcal
