#include "tailcal/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tailcal/numeric.hpp"

namespace tailcal {

namespace {

std::vector<std::size_t> order_by(std::span<const double> values, bool descending) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  return order;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

double weighted_gini(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw Error(ErrorCode::InvalidArgument, "values and weights differ in length");
  CompensatedSum<double> W, X;
  for (std::size_t i = 0; i < values.size(); ++i) {
    W += weights[i];
    X += weights[i] * values[i];
  }
  if (!(W.value() > 0.0)) throw Error(ErrorCode::EmptyDataset, "Gini needs positive total weight");
  if (X.value() == 0.0) throw Error(ErrorCode::ZeroMean, "Gini undefined for zero mean");

  const auto order = order_by(values, false);
  CompensatedSum<double> cum, acc;
  const double total_w = W.value();
  for (std::size_t i : order) {
    cum += weights[i];
    acc += weights[i] * values[i] * (2.0 * cum.value() - weights[i] - total_w);
  }
  return acc.value() / (total_w * X.value());
}

double weighted_gini(const SurveyDataset& ds, const Variable& var) {
  const auto v = to_std(values(ds, var));
  const auto w = to_std(ds.weights());
  return weighted_gini(v, w);
}

double top_share(std::span<const double> values, std::span<const double> weights, double p) {
  if (!(p > 0.0) || p > 1.0) throw Error(ErrorCode::InvalidArgument, "top share fraction must lie in (0, 1]");
  CompensatedSum<double> W, X;
  for (std::size_t i = 0; i < values.size(); ++i) {
    W += weights[i];
    X += weights[i] * values[i];
  }
  if (!(W.value() > 0.0)) throw Error(ErrorCode::EmptyDataset, "top share needs positive total weight");
  if (X.value() == 0.0) throw Error(ErrorCode::ZeroMean, "top share undefined for zero total");
  if (p == 1.0) return 1.0;

  const double quota = p * W.value();
  CompensatedSum<double> taken_w, taken_x;
  for (std::size_t i : order_by(values, true)) {
    const double room = quota - taken_w.value();
    if (room <= 0.0) break;
    const double w = std::min(weights[i], room);
    taken_w += w;
    taken_x += w * values[i];
  }
  return taken_x.value() / X.value();
}

double top_share(const SurveyDataset& ds, double p) {
  const auto v = to_std(ds.wealth());
  const auto w = to_std(ds.weights());
  return top_share(v, w, p);
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyDataset, "quantile of an empty sample");
  CompensatedSum<double> W;
  for (double w : weights) W += w;
  const double target = q * W.value();
  CompensatedSum<double> cum;
  const auto order = order_by(values, false);
  for (std::size_t i : order) {
    cum += weights[i];
    if (cum.value() >= target) return values[i];
  }
  return values[order.back()];
}

std::vector<CcdfPoint> ccdf_points(const SurveyDataset& ds, double above) {
  std::vector<std::pair<double, double>> tail;  // wealth, weight
  for (std::size_t i : ds.ranked()) {
    const double w = ds.households[i].wealth(ds.wealth_concept);
    if (w < above) break;
    tail.emplace_back(w, ds.households[i].weight);
  }
  std::vector<CcdfPoint> out;
  if (tail.empty()) return out;
  CompensatedSum<double> D;
  for (const auto& t : tail) D += t.second;
  CompensatedSum<double> cum;
  std::size_t k = 0;
  while (k < tail.size()) {
    std::size_t end = k;
    while (end < tail.size() && tail[end].first == tail[k].first) ++end;
    for (std::size_t j = k; j < end; ++j) cum += tail[j].second;
    for (std::size_t j = k; j < end; ++j) out.push_back({tail[j].first, cum.value() / D.value()});
    k = end;
  }
  return out;
}

std::vector<LorenzPoint> lorenz_curve(const SurveyDataset& ds) {
  const auto v = to_std(ds.wealth());
  const auto w = to_std(ds.weights());
  CompensatedSum<double> W, X;
  for (std::size_t i = 0; i < v.size(); ++i) {
    W += w[i];
    X += w[i] * v[i];
  }
  std::vector<LorenzPoint> out{{0.0, 0.0}};
  if (!(W.value() > 0.0) || X.value() == 0.0) return out;
  CompensatedSum<double> cw, cx;
  for (std::size_t i : order_by(v, false)) {
    cw += w[i];
    cx += w[i] * v[i];
    out.push_back({cw.value() / W.value(), cx.value() / X.value()});
  }
  return out;
}

IndicatorReport compute_indicators(const SurveyDataset& ds, const MacroBenchmarks* bm, const IndicatorOptions& opts) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "indicators need at least one household");
  const WealthConcept wc = opts.rank_by.value_or(ds.wealth_concept);
  const auto v = to_std(ds.wealth(wc));
  const auto w = to_std(ds.weights());

  IndicatorReport r;
  r.gini = weighted_gini(v, w);
  for (double p : kTopShareLevels) r.top_shares[p] = top_share(v, w, p);
  r.bottom50_share = 1.0 - top_share(v, w, 0.5);
  r.median = weighted_quantile(v, w, 0.5);
  CompensatedSum<double> W, X;
  for (std::size_t i = 0; i < v.size(); ++i) {
    W += w[i];
    X += w[i] * v[i];
  }
  r.household_count_weighted = W.value();
  r.mean = X.value() / W.value();
  if (bm) {
    for (const auto& [item, total] : bm->item_totals)
      if (total > 0.0) r.coverage_ratios[item] = coverage_ratio(ds, *bm, item);
  }
  return r;
}

}  // namespace tailcal
