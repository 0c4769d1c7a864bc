#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailcal/calib.hpp"
#include "tailcal/dataset.hpp"
#include "tailcal/pareto.hpp"

namespace tailcal {

enum class Method {
  survey_missing_tail,
  pareto_cal,
  pareto_cal_proportional,
  single_iteration,
  single_iteration_portfolio,
  simultaneous,
};

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct AdjustmentConfig {
  Method method = Method::simultaneous;
  double tau = 1.0;
  double alpha_tolerance = 0.05;
  int max_iterations = 10;
  std::size_t min_tail = 50;
  std::vector<Item> comparable_items = kComparableItems;
  /// Range restriction on weight factors; nullopt calibrates without bounds.
  std::optional<std::pair<double, double>> weight_bounds = kDefaultWeightBounds;
  /// Wealth concept of the single-iteration scaling; dataset concept if unset.
  std::optional<WealthConcept> zeta_concept;
  TailCountRange tail_range;
  std::optional<double> fixed_w0;

  void validate() const;
  ParetoOptions pareto_options() const;
};

struct TraceRecord {
  int iteration = 0;
  double w0 = 0.0;
  double alpha = 0.0;
  std::optional<double> alpha_after;  // re-estimated on the adjusted amounts
  double t_d_miss = 0.0;
  double t_w_miss = 0.0;
  std::map<Item, double> coverage_ratios;
  /// Largest |relative residual| of the calibrations run in this step.
  double max_relative_residual = 0.0;
};

struct AdjustmentOutcome {
  SurveyDataset dataset;
  std::vector<TraceRecord> trace;
  std::optional<std::string> synthetic_tail_observation;
  std::optional<double> zeta;
  std::optional<ParetoFit> fit;
  /// Per original household; ones where a step did not apply.
  Eigen::VectorXd weight_factors;
  Eigen::VectorXd amount_factors;
  bool converged = true;
  int iterations = 0;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kMissingTailId = "missing_tail";

/// Weighted portfolio of households with wealth >= w0, each item divided by
/// the tail's total wealth (dataset concept). Assets minus liabilities sum to
/// one for net wealth.
Portfolio tail_portfolio_shares(const SurveyDataset& ds, double w0);

/// Reweights so that the tail reproduces the Pareto estimates and the
/// bottom keeps its item totals, under demographic count constraints.
AdjustmentOutcome pareto_calibration(const SurveyDataset& ds, const ParetoFit& fit, const MacroBenchmarks& bm,
                                     const AdjustmentConfig& cfg = {});

/// Reverse calibration of amounts: a_i from a chi-squared calibration with
/// base weights = current weights, aux = the target items and
/// c_i = (1/w_i)^tau on gross wealth, applied to every item of household i.
/// `constants` overrides c_i when non-empty.
AdjustmentOutcome multivariate_imputation(const SurveyDataset& ds, const std::map<Item, double>& targets, double tau,
                                          const Eigen::VectorXd& constants = {});

/// Scales each listed item by target / HT.
AdjustmentOutcome proportional_allocation(const SurveyDataset& ds, const std::map<Item, double>& targets);

/// y*_i = y_i + b_i (t - HT); negative results are flagged in warnings.
AdjustmentOutcome difference_adjustment(const SurveyDataset& ds, Item item, const Eigen::VectorXd& b, double target);

/// Appends the missing-tail household (weight t_d_miss, wealth
/// t_w_miss / t_d_miss) with the given portfolio shares.
AdjustmentOutcome impute_missing_tail_observation(const SurveyDataset& ds, const ParetoFit& fit,
                                                  const Portfolio& shares);
AdjustmentOutcome impute_missing_tail_observation(const SurveyDataset& ds, const ParetoFit& fit);

/// Splits each rich-list net worth into items using the survey tail's
/// asset shares of gross wealth and its liability/gross ratio.
RichList integrate_rich_list(const RichList& rl, const SurveyDataset& ds, double w0);

enum class TailPart { top, missing };

/// Benchmarks minus each item's share of the tail wealth total, floored at 0.
MacroBenchmarks subtract_tail_totals(const MacroBenchmarks& bm, const ParetoFit& fit, const Portfolio& shares,
                                     TailPart part = TailPart::top, std::vector<std::string>* warnings = nullptr);

/// Factors a_i = 1 + lambda d_i minimising sum (a_i w_i - w_i)^2 / w_i
/// subject to sum d_i a_i w_i = T, over households with w_i > 0 (others 1).
Eigen::VectorXd wealth_calibration_factors(const Eigen::VectorXd& d, const Eigen::VectorXd& w, double T);

AdjustmentOutcome survey_missing_tail(const SurveyDataset& ds, const RichList& rl, const AdjustmentConfig& cfg = {});
AdjustmentOutcome single_iteration(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                                   const AdjustmentConfig& cfg = {}, bool portfolio_step = false);
AdjustmentOutcome simultaneous(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                               const AdjustmentConfig& cfg = {});

/// Constraint set of a standalone weight calibration. Item targets come
/// from the benchmarks; demographic cells add a household-total column.
struct WeightConstraints {
  std::vector<Item> items;
  bool demographics = true;
  std::optional<std::pair<double, double>> bounds = kDefaultWeightBounds;
  std::map<std::string, double> ridge;  // constraint label -> tolerance
};

CalibrationProblem weight_calibration_problem(const SurveyDataset& ds, const MacroBenchmarks& bm,
                                              const WeightConstraints& wc);

/// Ridge when tolerances are present, bounded when bounds are, else exact.
CalibrationResult solve_calibration(const CalibrationProblem& p);

AdjustmentOutcome run_adjustment(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                                 const AdjustmentConfig& cfg);

}  // namespace tailcal
