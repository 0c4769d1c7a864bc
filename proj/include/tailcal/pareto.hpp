#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tailcal/dataset.hpp"

namespace tailcal {

/// Truncated Pareto upper tail fitted to survey (plus rich-list) wealth.
/// Household counts are in population units (sums of weights); wealth totals
/// are only defined for alpha > 1.
struct ParetoFit {
  double w0 = 0.0;         // threshold where the power law starts
  double alpha = 0.0;      // shape
  double intercept = 0.0;  // constant of the rank regression
  double r2 = 0.0;         // goodness of the mean-excess regression at w0
  double w1 = 0.0;         // truncation point: richest survey household in the tail
  std::size_t m = 0;       // pooled tail observations (survey + rich list)
  std::size_t survey_tail_size = 0;
  double D = 0.0;          // survey weight in the tail
  double t_d_top = 0.0;
  double t_d_miss = 0.0;
  double t_d_obs = 0.0;
  std::optional<double> t_w_top;
  std::optional<double> t_w_miss;

  /// Observable tail wealth t(w;top) - t(w;miss).
  std::optional<double> t_w_obs() const {
    if (!t_w_top || !t_w_miss) return std::nullopt;
    return *t_w_top - *t_w_miss;
  }
};

/// alpha must exceed this for Pareto means to be finite.
inline constexpr double kMinFiniteMeanAlpha = 1.0 + 1e-6;

double pareto_cdf(double w, double w0, double alpha);
double pareto_mean(double w0, double alpha);

/// Weighted mean excess over households strictly richer than `w`.
double mean_excess(const SurveyDataset& ds, double w);

struct MeanExcessPoint {
  double wealth = 0.0;
  double mean_excess = 0.0;
  double weight_above = 0.0;  // survey weight strictly richer than `wealth`
};

/// Mean excess at every positive observed wealth value with at least one
/// richer household, ordered by wealth descending.
std::vector<MeanExcessPoint> mean_excess_curve(const SurveyDataset& ds);

struct ThresholdOptions {
  std::size_t min_tail = 50;
  /// Candidates are limited to this top fraction of positive-wealth households.
  double candidate_fraction = 0.2;
};

struct ThresholdResult {
  double w0 = 0.0;
  double r2 = 0.0;
  std::size_t candidates = 0;
};

/// Chooses the threshold maximising the weighted R^2 of the regression of
/// mean excess on wealth above it; each point is weighted by the survey
/// weight of richer households to damp the truncation bias near the top.
ThresholdResult detect_threshold(const SurveyDataset& ds, const ThresholdOptions& opts = {});

struct TailPoint {
  double wealth = 0.0;
  double weight = 1.0;
  bool from_rich_list = false;
};

/// Survey households with wealth >= w0 merged with rich-list entries >= w0
/// (weight 1), ranked by wealth descending; on equal wealth the rich-list
/// entry ranks first. Position p has rank p + 1.
std::vector<TailPoint> pool_with_rich_list(const SurveyDataset& ds, double w0, const RichList& rl);

struct AlphaEstimate {
  double alpha = 0.0;
  double intercept = 0.0;
};

/// OLS of ln((i - 1/2) Dbar_i / Dbar) on ln(w_i) over the ranked pooled
/// sample; alpha is the negated slope.
AlphaEstimate estimate_alpha(std::span<const TailPoint> pooled, double w0);

/// Optional restriction of the ranks averaged when estimating the tail
/// household count. Ranks are 1-based within the survey tail.
struct TailCountRange {
  std::size_t first_rank = 1;
  std::optional<std::size_t> last_rank;
};

/// Mean over survey tail households of (D - D_{i-1}) / (1 - (w0/w_i)^alpha),
/// skipping households at exactly w0.
double estimate_tail_households(const SurveyDataset& ds, double w0, double alpha,
                                const TailCountRange& range = {});

/// (t(d;miss), t(w;miss)) from t(d;top), w0, w1 and alpha.
std::pair<double, double> missing_tail(const ParetoFit& fit);
double tail_wealth(const ParetoFit& fit);

/// Fills t_d_miss, t_d_obs, t_w_top and t_w_miss from t_d_top, w0, w1 and
/// alpha (wealth totals left empty when alpha <= 1).
void derive_tail_totals(ParetoFit& fit);

struct ParetoOptions {
  ThresholdOptions threshold;
  /// Skip threshold detection and use this w0.
  std::optional<double> fixed_w0;
  TailCountRange tail_range;
};

/// Full tail fit: threshold, pooled alpha, truncation point and tail totals.
ParetoFit fit_pareto(const SurveyDataset& ds, const RichList& rl, const ParetoOptions& opts = {});

}  // namespace tailcal
