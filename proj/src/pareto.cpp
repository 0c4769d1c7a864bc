#include "tailcal/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tailcal/numeric.hpp"

namespace tailcal {

namespace {

struct RankedObs {
  double wealth;
  double weight;
};

/// Positive-wealth households ranked descending (ties by id).
std::vector<RankedObs> ranked_positive(const SurveyDataset& ds) {
  std::vector<RankedObs> out;
  for (std::size_t i : ds.ranked()) {
    const double w = ds.households[i].wealth(ds.wealth_concept);
    if (w > 0.0) out.push_back({w, ds.households[i].weight});
  }
  return out;
}

/// Weighted least squares of y on x; returns (slope, intercept, r2).
struct Fit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool ok = false;
};

Fit weighted_ls(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  Fit f;
  CompensatedSum<double> sw, sx, sy;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
  }
  const double W = sw.value();
  if (!(W > 0.0)) return f;
  const double mx = sx.value() / W;
  const double my = sy.value() / W;
  CompensatedSum<double> sxx, sxy, syy;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxx += w[k] * dx * dx;
    sxy += w[k] * dx * dy;
    syy += w[k] * dy * dy;
  }
  if (!(sxx.value() > 0.0)) return f;
  f.slope = sxy.value() / sxx.value();
  f.intercept = my - f.slope * mx;
  f.r2 = syy.value() > 0.0 ? (sxy.value() * sxy.value()) / (sxx.value() * syy.value()) : 1.0;
  f.ok = true;
  return f;
}

}  // namespace

double pareto_cdf(double w, double w0, double alpha) {
  if (!(w0 > 0.0)) throw Error(ErrorCode::DomainError, "Pareto threshold must be positive");
  if (!(alpha > 0.0)) throw Error(ErrorCode::DomainError, "Pareto shape must be positive");
  if (w < w0) throw Error(ErrorCode::DomainError, "wealth below the Pareto threshold");
  return -std::expm1(alpha * std::log(w0 / w));
}

double pareto_mean(double w0, double alpha) {
  if (!(alpha > kMinFiniteMeanAlpha))
    throw Error(ErrorCode::InfiniteMean, "Pareto mean is infinite for alpha <= 1 (alpha = " + std::to_string(alpha) + ")");
  return alpha * w0 / (alpha - 1.0);
}

double mean_excess(const SurveyDataset& ds, double w) {
  CompensatedSum<double> num, den;
  for (const Household& h : ds.households) {
    const double wj = h.wealth(ds.wealth_concept);
    if (wj > w) {
      num += h.weight * (wj - w);
      den += h.weight;
    }
  }
  if (!(den.value() > 0.0))
    throw Error(ErrorCode::EmptyExceedanceSet, "no household is richer than " + std::to_string(w));
  return num.value() / den.value();
}

std::vector<MeanExcessPoint> mean_excess_curve(const SurveyDataset& ds) {
  const auto obs = ranked_positive(ds);
  std::vector<MeanExcessPoint> out;
  out.reserve(obs.size());
  CompensatedSum<double> above_w, above_wealth;  // over strictly richer groups
  std::size_t k = 0;
  while (k < obs.size()) {
    std::size_t end = k;
    while (end < obs.size() && obs[end].wealth == obs[k].wealth) ++end;
    const double wv = obs[k].wealth;
    const double W = above_w.value();
    if (W > 0.0) {
      const double me = (above_wealth.value() - wv * W) / W;
      for (std::size_t j = k; j < end; ++j) out.push_back({wv, me, W});
    }
    for (std::size_t j = k; j < end; ++j) {
      above_w += obs[j].weight;
      above_wealth += obs[j].weight * obs[j].wealth;
    }
    k = end;
  }
  return out;
}

ThresholdResult detect_threshold(const SurveyDataset& ds, const ThresholdOptions& opts) {
  const auto obs = ranked_positive(ds);
  const std::size_t n_pos = obs.size();
  if (n_pos < opts.min_tail + 1 || opts.min_tail < 2)
    throw Error(ErrorCode::InsufficientTail, "fewer than min_tail + 1 households with positive wealth");

  const auto curve = mean_excess_curve(ds);
  std::vector<double> x(curve.size()), y(curve.size()), wt(curve.size());
  for (std::size_t k = 0; k < curve.size(); ++k) {
    x[k] = curve[k].wealth;
    y[k] = curve[k].mean_excess;
    wt[k] = curve[k].weight_above;
  }

  // Count of observations strictly richer than each ranked position.
  std::vector<std::size_t> richer(n_pos);
  for (std::size_t k = 0; k < n_pos; ++k)
    richer[k] = (k > 0 && obs[k].wealth == obs[k - 1].wealth) ? richer[k - 1] : k;

  const auto limit = std::max<std::size_t>(
      opts.min_tail + 1, static_cast<std::size_t>(std::ceil(opts.candidate_fraction * static_cast<double>(n_pos))));
  const std::size_t last = std::min(limit, n_pos);

  ThresholdResult best;
  bool found = false;
  // curve index: curve holds every position with a richer household, i.e.
  // positions whose value is below the maximum; count them as we go.
  const std::size_t top_group = richer.size() > 0 ? std::count(richer.begin(), richer.end(), std::size_t{0}) : 0;
  for (std::size_t c = 0; c < last; ++c) {
    if (richer[c] < opts.min_tail) continue;
    if (c + 1 < n_pos && obs[c + 1].wealth == obs[c].wealth) continue;  // evaluate each value once
    const std::size_t npts = c + 1 - top_group;  // curve entries at positions <= c
    if (npts < 3) continue;
    const Fit f = weighted_ls(std::span(x).first(npts), std::span(y).first(npts), std::span(wt).first(npts));
    if (!f.ok) continue;
    ++best.candidates;
    const double w0 = obs[c].wealth;
    if (!found || f.r2 > best.r2 || (f.r2 == best.r2 && w0 < best.w0)) {
      best.w0 = w0;
      best.r2 = f.r2;
      found = true;
    }
  }
  if (!found)
    throw Error(ErrorCode::InsufficientTail,
                "no candidate threshold has " + std::to_string(opts.min_tail) + " observations above it");
  return best;
}

std::vector<TailPoint> pool_with_rich_list(const SurveyDataset& ds, double w0, const RichList& rl) {
  std::vector<TailPoint> pooled;
  for (std::size_t i : ds.ranked()) {
    const double w = ds.households[i].wealth(ds.wealth_concept);
    if (w < w0) break;
    pooled.push_back({w, ds.households[i].weight, false});
  }
  for (const auto& e : rl.entries)
    if (e.wealth >= w0) pooled.push_back({e.wealth, 1.0, true});
  std::stable_sort(pooled.begin(), pooled.end(), [](const TailPoint& a, const TailPoint& b) {
    if (a.wealth != b.wealth) return a.wealth > b.wealth;
    return a.from_rich_list && !b.from_rich_list;
  });
  return pooled;
}

AlphaEstimate estimate_alpha(std::span<const TailPoint> pooled, double w0) {
  const std::size_t m = pooled.size();
  if (m >= 2 && std::all_of(pooled.begin(), pooled.end(), [&](const TailPoint& p) { return p.wealth == pooled[0].wealth; }))
    throw Error(ErrorCode::DegenerateRegression, "all pooled wealth values are equal");
  if (m < 3) throw Error(ErrorCode::InsufficientTail, "alpha regression needs at least 3 tail observations");
  for (const auto& p : pooled)
    if (!(p.wealth >= w0) || !(p.wealth > 0.0)) throw Error(ErrorCode::DomainError, "pooled wealth below threshold");

  CompensatedSum<double> total;
  for (const auto& p : pooled) total += p.weight;
  const double mean_weight = total.value() / static_cast<double>(m);

  // Extended precision keeps the slope unchanged when every wealth is scaled
  // by the same factor: the log of the factor cancels before rounding.
  using Wide = long double;
  std::vector<Wide> x(m), y(m);
  CompensatedSum<double> cum;
  Wide sx = 0, sy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double rank = static_cast<double>(k + 1);
    cum += pooled[k].weight;
    const double mean_weight_i = cum.value() / rank;
    y[k] = std::log(static_cast<Wide>((rank - 0.5) * mean_weight_i / mean_weight));
    x[k] = std::log(static_cast<Wide>(pooled[k].wealth));
    sx += x[k];
    sy += y[k];
  }
  const Wide mx = sx / static_cast<Wide>(m), my = sy / static_cast<Wide>(m);
  Wide sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (!(sxx > 0)) throw Error(ErrorCode::DegenerateRegression, "zero variance in log wealth");
  const Wide slope = sxy / sxx;
  // alpha keeps 44 significant bits so that the last rounding of scaled
  // inputs cannot flip it
  int e = 0;
  const Wide mant = std::frexp(slope, &e);
  const Wide kept = std::ldexp(std::round(std::ldexp(mant, 44)), e - 44);
  return {static_cast<double>(-kept), static_cast<double>(my - kept * mx)};
}

double estimate_tail_households(const SurveyDataset& ds, double w0, double alpha, const TailCountRange& range) {
  if (!(w0 > 0.0) || !(alpha > 0.0)) throw Error(ErrorCode::DomainError, "tail count needs w0 > 0 and alpha > 0");
  std::vector<RankedObs> tail;
  for (std::size_t i : ds.ranked()) {
    const double w = ds.households[i].wealth(ds.wealth_concept);
    if (w < w0) break;
    tail.push_back({w, ds.households[i].weight});
  }
  if (tail.empty()) throw Error(ErrorCode::EmptyTail, "no survey household at or above w0");

  CompensatedSum<double> total;
  for (const auto& t : tail) total += t.weight;
  const double D = total.value();

  const std::size_t first = std::max<std::size_t>(range.first_rank, 1);
  const std::size_t last = std::min(range.last_rank.value_or(tail.size()), tail.size());

  CompensatedSum<double> richer, acc;
  std::size_t used = 0;
  std::size_t k = 0;
  while (k < tail.size()) {
    std::size_t end = k;
    while (end < tail.size() && tail[end].wealth == tail[k].wealth) ++end;
    const double at_or_below = D - richer.value();  // D - D_{i-1}
    const double cdf = -std::expm1(alpha * std::log(w0 / tail[k].wealth));
    for (std::size_t j = k; j < end; ++j) {
      const std::size_t rank = j + 1;
      if (rank < first || rank > last) continue;
      if (!(cdf > 0.0)) continue;  // w_i == w0
      acc += at_or_below / cdf;
      ++used;
    }
    for (std::size_t j = k; j < end; ++j) richer += tail[j].weight;
    k = end;
  }
  if (used == 0) throw Error(ErrorCode::EmptyTail, "every tail household sits exactly at w0");
  return acc.value() / static_cast<double>(used);
}

std::pair<double, double> missing_tail(const ParetoFit& fit) {
  if (!(fit.w1 >= fit.w0) || !(fit.w0 > 0.0)) throw Error(ErrorCode::DomainError, "missing tail needs w1 >= w0 > 0");
  const double miss = fit.t_d_top * std::pow(fit.w0 / fit.w1, fit.alpha);
  if (!(fit.alpha > kMinFiniteMeanAlpha))
    throw Error(ErrorCode::InfiniteMean, "missing-tail wealth is infinite for alpha <= 1");
  return {miss, miss * fit.alpha * fit.w1 / (fit.alpha - 1.0)};
}

double tail_wealth(const ParetoFit& fit) { return pareto_mean(fit.w0, fit.alpha) * fit.t_d_top; }

void derive_tail_totals(ParetoFit& fit) {
  if (!(fit.w1 >= fit.w0) || !(fit.w0 > 0.0)) throw Error(ErrorCode::DomainError, "tail totals need w1 >= w0 > 0");
  fit.t_d_miss = fit.t_d_top * std::pow(fit.w0 / fit.w1, fit.alpha);
  fit.t_d_obs = fit.t_d_top - fit.t_d_miss;
  if (fit.alpha > kMinFiniteMeanAlpha) {
    fit.t_w_top = tail_wealth(fit);
    fit.t_w_miss = missing_tail(fit).second;
  } else {
    fit.t_w_top.reset();
    fit.t_w_miss.reset();
  }
}

ParetoFit fit_pareto(const SurveyDataset& ds, const RichList& rl, const ParetoOptions& opts) {
  ParetoFit fit;
  if (opts.fixed_w0) {
    if (!(*opts.fixed_w0 > 0.0)) throw Error(ErrorCode::DomainError, "fixed threshold must be positive");
    fit.w0 = *opts.fixed_w0;
    fit.r2 = 0.0;
  } else {
    const auto thr = detect_threshold(ds, opts.threshold);
    fit.w0 = thr.w0;
    fit.r2 = thr.r2;
  }
  const auto pooled = pool_with_rich_list(ds, fit.w0, rl);
  const auto est = estimate_alpha(pooled, fit.w0);
  fit.alpha = est.alpha;
  fit.intercept = est.intercept;
  fit.m = pooled.size();
  if (!(fit.alpha > 0.0)) throw Error(ErrorCode::DegenerateRegression, "estimated alpha is not positive");

  CompensatedSum<double> D;
  double w1 = 0.0;
  for (const Household& h : ds.households) {
    if (h.synthetic) continue;
    const double w = h.wealth(ds.wealth_concept);
    if (w >= fit.w0) {
      D += h.weight;
      ++fit.survey_tail_size;
      w1 = std::max(w1, w);
    }
  }
  fit.D = D.value();
  fit.w1 = w1;
  fit.t_d_top = estimate_tail_households(ds, fit.w0, fit.alpha, opts.tail_range);
  derive_tail_totals(fit);
  return fit;
}

}  // namespace tailcal
