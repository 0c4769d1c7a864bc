#include "tailcal/adjust.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tailcal/indicators.hpp"
#include "tailcal/numeric.hpp"

namespace tailcal {

namespace {

constexpr std::array<std::string_view, 6> kMethodNames = {
    "survey_missing_tail", "pareto_cal", "pareto_cal_proportional",
    "single_iteration",    "single_iteration_portfolio", "simultaneous"};

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::map<Item, double> coverage(const SurveyDataset& ds, const MacroBenchmarks& bm) {
  std::map<Item, double> out;
  for (const auto& [it, total] : bm.item_totals)
    if (total > 0.0) out[it] = horvitz_thompson(ds, Variable::of(it)) / total;
  return out;
}

double positive_median(const SurveyDataset& ds, WealthConcept wc) {
  std::vector<double> v, w;
  for (const Household& h : ds.households) {
    const double x = h.wealth(wc);
    if (x > 0.0) {
      v.push_back(x);
      w.push_back(h.weight);
    }
  }
  if (v.empty()) throw Error(ErrorCode::ZeroMean, "no household has positive wealth");
  return weighted_quantile(v, w, 0.5);
}

void scale_household(Household& h, double a) {
  for (double& y : h.portfolio) y *= a;
}

/// Demographic indicator columns and their benchmark counts. The last
/// category of a variable is dropped when every category has a count, since
/// the cells then sum to the household total already constrained.
void add_demographic_columns(const SurveyDataset& ds, const MacroBenchmarks& bm, std::vector<Eigen::VectorXd>& cols,
                             std::vector<double>& targets, std::vector<std::string>& labels) {
  const std::size_t n = ds.size();
  for (std::size_t v = 0; v < ds.demographic_vars.size(); ++v) {
    std::set<std::string> cats;
    for (const Household& h : ds.households)
      if (!h.synthetic) cats.insert(h.demographics[v]);
    std::vector<std::string> present;
    for (const std::string& c : cats)
      if (bm.demographic_counts.count(ds.demographic_vars[v] + "=" + c)) present.push_back(c);
    if (present.empty()) continue;
    if (present.size() == cats.size()) present.pop_back();
    for (const std::string& c : present) {
      const std::string key = ds.demographic_vars[v] + "=" + c;
      Eigen::VectorXd col = Eigen::VectorXd::Zero(idx(n));
      for (std::size_t i = 0; i < n; ++i)
        if (!ds.households[i].synthetic && ds.households[i].demographics[v] == c) col(idx(i)) = 1.0;
      cols.push_back(std::move(col));
      targets.push_back(bm.demographic_counts.at(key));
      labels.push_back(key);
    }
  }
}

CalibrationResult calibrate_weights(const Eigen::VectorXd& d, const std::vector<Eigen::VectorXd>& cols,
                                    const std::vector<double>& targets, std::vector<std::string> labels,
                                    const AdjustmentConfig& cfg) {
  CalibrationProblem p;
  p.base_weights = d;
  p.aux.resize(d.size(), idx(cols.size()));
  for (std::size_t r = 0; r < cols.size(); ++r) p.aux.col(idx(r)) = cols[r];
  p.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), idx(targets.size()));
  p.labels = std::move(labels);
  if (cfg.weight_bounds) {
    p.bounds = cfg.weight_bounds;
    return solve_bounded(p);
  }
  return solve_chi2(p);
}

void require_wealth_totals(const ParetoFit& fit) {
  if (!(fit.alpha > kMinFiniteMeanAlpha) || !fit.t_w_top || !fit.t_w_miss)
    throw Error(ErrorCode::InfiniteMean, "tail wealth is infinite for alpha <= 1");
}

std::map<Item, double> comparable_targets(const MacroBenchmarks& bm, const std::vector<Item>& items) {
  std::map<Item, double> out;
  for (Item it : items) out[it] = bm.item(it);
  return out;
}

TraceRecord trace_of(int iteration, const ParetoFit& fit, const SurveyDataset& ds, const MacroBenchmarks& bm) {
  TraceRecord r;
  r.iteration = iteration;
  r.w0 = fit.w0;
  r.alpha = fit.alpha;
  r.t_d_miss = fit.t_d_miss;
  r.t_w_miss = fit.t_w_miss.value_or(0.0);
  r.coverage_ratios = coverage(ds, bm);
  return r;
}

void append_warnings(std::vector<std::string>& to, const std::vector<std::string>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

}  // namespace

std::string_view to_string(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

Method parse_method(std::string_view name) {
  for (std::size_t k = 0; k < kMethodNames.size(); ++k)
    if (kMethodNames[k] == name) return static_cast<Method>(k);
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

void AdjustmentConfig::validate() const {
  if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
  if (!(alpha_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (comparable_items.empty() && method != Method::survey_missing_tail && method != Method::pareto_cal &&
      method != Method::single_iteration)
    throw Error(ErrorCode::InvalidArgument, "comparable_items must not be empty");
  if (weight_bounds) {
    const auto [lo, hi] = *weight_bounds;
    if (!(lo >= 0.0 && lo < 1.0 && hi > 1.0)) throw Error(ErrorCode::InvalidArgument, "weight bounds must satisfy 0 <= L < 1 < U");
  }
}

ParetoOptions AdjustmentConfig::pareto_options() const {
  ParetoOptions o;
  o.threshold.min_tail = min_tail;
  o.fixed_w0 = fixed_w0;
  o.tail_range = tail_range;
  return o;
}

Portfolio tail_portfolio_shares(const SurveyDataset& ds, double w0) {
  std::array<CompensatedSum<double>, kItemCount> item;
  CompensatedSum<double> total;
  bool any = false;
  for (const Household& h : ds.households) {
    const double w = h.wealth(ds.wealth_concept);
    if (w < w0) continue;
    any = true;
    for (std::size_t j = 0; j < kItemCount; ++j) item[j] += h.weight * h.portfolio[j];
    total += h.weight * w;
  }
  if (!any) throw Error(ErrorCode::EmptyTail, "no household at or above the threshold");
  if (!(total.value() > 0.0)) throw Error(ErrorCode::EmptyTail, "tail wealth is not positive");
  Portfolio s{};
  for (std::size_t j = 0; j < kItemCount; ++j) s[j] = item[j].value() / total.value();
  return s;
}

AdjustmentOutcome pareto_calibration(const SurveyDataset& ds, const ParetoFit& fit, const MacroBenchmarks& bm,
                                     const AdjustmentConfig& cfg) {
  require_wealth_totals(fit);
  const std::size_t n = ds.size();
  const Eigen::VectorXd d = ds.weights();
  const Eigen::VectorXd w = ds.wealth();
  Eigen::VectorXd in_tail(idx(n));
  for (std::size_t i = 0; i < n; ++i) in_tail(idx(i)) = w(idx(i)) >= fit.w0 ? 1.0 : 0.0;
  const Eigen::VectorXd bottom = Eigen::VectorXd::Ones(idx(n)) - in_tail;

  std::vector<Eigen::VectorXd> cols;
  std::vector<double> targets;
  std::vector<std::string> labels;
  cols.push_back(w.cwiseProduct(in_tail));
  targets.push_back(*fit.t_w_obs());
  labels.emplace_back("tail_wealth");
  cols.push_back(in_tail);
  targets.push_back(fit.t_d_obs);
  labels.emplace_back("tail_households");
  for (Item it : kAllItems) {
    Eigen::VectorXd col = ds.amounts(it).cwiseProduct(bottom);
    if ((col.array() == 0.0).all()) continue;
    targets.push_back(weighted_total(d, col));
    cols.push_back(std::move(col));
    labels.push_back("bottom_" + std::string(item_name(it)));
  }
  const double total = bm.total_households(ds).value_or(weighted_total(d, Eigen::VectorXd::Ones(idx(n))));
  cols.push_back(bottom);
  targets.push_back(total - fit.t_d_obs);
  labels.emplace_back("bottom_households");
  add_demographic_columns(ds, bm, cols, targets, labels);

  const CalibrationResult res = calibrate_weights(d, cols, targets, labels, cfg);

  AdjustmentOutcome out;
  out.dataset = ds;
  out.dataset.set_weights(res.new_weights);
  out.fit = fit;
  out.weight_factors = res.factors;
  out.amount_factors = Eigen::VectorXd::Ones(idx(n));
  out.warnings = res.warnings;
  out.converged = res.converged;
  TraceRecord tr = trace_of(1, fit, out.dataset, bm);
  tr.max_relative_residual = max_abs(res.relative_residuals);
  out.trace.push_back(tr);
  out.iterations = 1;
  return out;
}

AdjustmentOutcome multivariate_imputation(const SurveyDataset& ds, const std::map<Item, double>& targets, double tau,
                                          const Eigen::VectorXd& constants) {
  if (targets.empty()) throw Error(ErrorCode::InvalidArgument, "imputation needs at least one item target");
  if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
  const std::size_t n = ds.size();
  CalibrationProblem p;
  p.base_weights = ds.weights();
  p.aux.resize(idx(n), idx(targets.size()));
  p.targets.resize(idx(targets.size()));
  Eigen::Index r = 0;
  for (const auto& [it, t] : targets) {
    p.aux.col(r) = ds.amounts(it);
    p.targets(r) = t;
    p.labels.emplace_back(item_name(it));
    ++r;
  }
  if (constants.size() != 0) {
    if (constants.size() != idx(n)) throw Error(ErrorCode::InvalidArgument, "one constant per household is required");
    p.constants = constants;
  } else {
    p.constants.resize(idx(n));
    const Eigen::VectorXd w = ds.wealth(WealthConcept::gross);
    double fallback = 0.0;
    bool have_fallback = false;
    for (std::size_t i = 0; i < n; ++i) {
      double wi = w(idx(i));
      if (!(wi > 0.0)) {
        if (!have_fallback) {
          fallback = positive_median(ds, WealthConcept::gross);
          have_fallback = true;
        }
        wi = fallback;
      }
      p.constants(idx(i)) = std::pow(1.0 / wi, tau);
    }
  }
  const CalibrationResult res = solve_chi2(p);
  if ((res.factors.array() < 0.0).any()) {
    throw Error(ErrorCode::NegativeAmountProduced, "imputation factors would make some amounts negative");
  }

  AdjustmentOutcome out;
  out.dataset = ds;
  for (std::size_t i = 0; i < n; ++i) scale_household(out.dataset.households[i], res.factors(idx(i)));
  out.amount_factors = res.factors;
  out.weight_factors = Eigen::VectorXd::Ones(idx(n));
  out.warnings = res.warnings;
  TraceRecord tr;
  tr.iteration = 1;
  tr.max_relative_residual = max_abs(res.relative_residuals);
  out.trace.push_back(tr);
  out.iterations = 1;
  return out;
}

AdjustmentOutcome proportional_allocation(const SurveyDataset& ds, const std::map<Item, double>& targets) {
  AdjustmentOutcome out;
  out.dataset = ds;
  out.amount_factors = Eigen::VectorXd::Ones(idx(ds.size()));
  out.weight_factors = Eigen::VectorXd::Ones(idx(ds.size()));
  for (const auto& [it, t] : targets) {
    const double ht = horvitz_thompson(ds, Variable::of(it));
    if (!(ht > 0.0) || !(t > 0.0))
      throw Error(ErrorCode::ZeroItemTotal, "item '" + std::string(item_name(it)) + "' has a zero survey or benchmark total");
    const double k = t / ht;
    for (Household& h : out.dataset.households) h.portfolio[index(it)] *= k;
  }
  out.iterations = 1;
  return out;
}

AdjustmentOutcome difference_adjustment(const SurveyDataset& ds, Item item, const Eigen::VectorXd& b, double target) {
  const std::size_t n = ds.size();
  if (b.size() != idx(n)) throw Error(ErrorCode::InvalidArgument, "one share per household is required");
  const Eigen::VectorXd d = ds.weights();
  const double db = weighted_total(d, b);
  if (std::abs(db - 1.0) > 1e-9) throw Error(ErrorCode::SharesNotNormalized, "weighted shares must sum to 1");
  const double gap = target - horvitz_thompson(ds, Variable::of(item));
  AdjustmentOutcome out;
  out.dataset = ds;
  out.amount_factors = Eigen::VectorXd::Ones(idx(n));
  out.weight_factors = Eigen::VectorXd::Ones(idx(n));
  std::size_t negative = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double& y = out.dataset.households[i].portfolio[index(item)];
    y += b(idx(i)) * gap;
    if (y < 0.0) ++negative;
  }
  if (negative > 0)
    out.warnings.push_back("NegativeAmountProduced: " + std::to_string(negative) + " households have a negative '" +
                           std::string(item_name(item)) + "'");
  out.iterations = 1;
  return out;
}

AdjustmentOutcome impute_missing_tail_observation(const SurveyDataset& ds, const ParetoFit& fit,
                                                  const Portfolio& shares) {
  require_wealth_totals(fit);
  AdjustmentOutcome out;
  out.dataset = ds;
  out.fit = fit;
  out.amount_factors = Eigen::VectorXd::Ones(idx(ds.size()));
  out.weight_factors = Eigen::VectorXd::Ones(idx(ds.size()));
  out.iterations = 1;
  if (!(fit.t_d_miss > 0.0)) return out;

  std::set<std::string> ids;
  for (const Household& h : ds.households) ids.insert(h.id);
  std::string id(kMissingTailId);
  for (int k = 2; ids.count(id); ++k) id = std::string(kMissingTailId) + "_" + std::to_string(k);

  const double wealth = *fit.t_w_miss / fit.t_d_miss;
  Household h;
  h.id = id;
  h.weight = fit.t_d_miss;
  for (std::size_t j = 0; j < kItemCount; ++j) h.portfolio[j] = std::max(0.0, shares[j] * wealth);
  h.demographics.assign(ds.demographic_vars.size(), "");
  h.psu = id;
  h.synthetic = true;
  out.dataset.households.push_back(std::move(h));
  out.synthetic_tail_observation = id;
  return out;
}

AdjustmentOutcome impute_missing_tail_observation(const SurveyDataset& ds, const ParetoFit& fit) {
  return impute_missing_tail_observation(ds, fit, tail_portfolio_shares(ds, fit.w0));
}

RichList integrate_rich_list(const RichList& rl, const SurveyDataset& ds, double w0) {
  std::array<CompensatedSum<double>, kItemCount> item;
  CompensatedSum<double> gross;
  bool any = false;
  for (const Household& h : ds.households) {
    if (h.wealth(ds.wealth_concept) < w0) continue;
    any = true;
    for (std::size_t j = 0; j < kItemCount; ++j) item[j] += h.weight * h.portfolio[j];
    gross += h.weight * h.gross();
  }
  if (!any || !(gross.value() > 0.0)) throw Error(ErrorCode::EmptyTail, "no survey tail to take portfolio shares from");
  const double G = gross.value();
  const double ratio = item[index(Item::liabilities)].value() / G;
  if (!(ratio < 1.0)) throw Error(ErrorCode::DomainError, "tail liabilities exceed gross wealth");

  RichList out = rl;
  for (RichListEntry& e : out.entries) {
    const double g = e.wealth / (1.0 - ratio);
    Portfolio p{};
    for (Item it : kAllItems) p[index(it)] = is_asset(it) ? g * item[index(it)].value() / G : g * ratio;
    e.portfolio = p;
  }
  return out;
}

MacroBenchmarks subtract_tail_totals(const MacroBenchmarks& bm, const ParetoFit& fit, const Portfolio& shares,
                                     TailPart part, std::vector<std::string>* warnings) {
  const std::optional<double> total = part == TailPart::top ? fit.t_w_top : fit.t_w_miss;
  if (!total) throw Error(ErrorCode::InfiniteMean, "tail wealth is infinite for alpha <= 1");
  MacroBenchmarks out = bm;
  for (auto& [it, v] : out.item_totals) {
    const double left = v - shares[index(it)] * *total;
    if (left < 0.0) {
      if (warnings)
        warnings->push_back("benchmark for '" + std::string(item_name(it)) + "' is below the tail holdings; floored at 0");
      v = 0.0;
    } else {
      v = left;
    }
  }
  return out;
}

Eigen::VectorXd wealth_calibration_factors(const Eigen::VectorXd& d, const Eigen::VectorXd& w, double T) {
  if (d.size() != w.size()) throw Error(ErrorCode::InvalidArgument, "weights and wealth differ in length");
  CompensatedSum<double> s1, s2;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w(i) > 0.0)) continue;
    s1 += d(i) * w(i);
    s2 += d(i) * d(i) * w(i);
  }
  if (!(s2.value() > 0.0)) throw Error(ErrorCode::ZeroMean, "no household has positive wealth");
  const double lambda = (T - s1.value()) / s2.value();
  Eigen::VectorXd a = Eigen::VectorXd::Ones(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w(i) > 0.0) a(i) = 1.0 + lambda * d(i);
  return a;
}

AdjustmentOutcome survey_missing_tail(const SurveyDataset& ds, const RichList& rl, const AdjustmentConfig& cfg) {
  const ParetoFit fit = fit_pareto(ds, rl, cfg.pareto_options());
  AdjustmentOutcome out = impute_missing_tail_observation(ds, fit);
  TraceRecord tr;
  tr.iteration = 1;
  tr.w0 = fit.w0;
  tr.alpha = fit.alpha;
  tr.t_d_miss = fit.t_d_miss;
  tr.t_w_miss = fit.t_w_miss.value_or(0.0);
  out.trace.push_back(tr);
  return out;
}

AdjustmentOutcome single_iteration(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                                   const AdjustmentConfig& cfg, bool portfolio_step) {
  cfg.validate();
  SurveyDataset work = ds;
  work.wealth_concept = cfg.zeta_concept.value_or(ds.wealth_concept);
  const ParetoFit fit = fit_pareto(work, rl, cfg.pareto_options());
  require_wealth_totals(fit);
  AdjustmentOutcome pc = pareto_calibration(work, fit, bm, cfg);

  const Eigen::VectorXd d = pc.dataset.weights();
  const Eigen::VectorXd w = pc.dataset.wealth();
  CompensatedSum<double> below, all, nonpositive;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) < fit.w0) below += d(i) * w(i);
    all += d(i) * w(i);
    if (!(w(i) > 0.0)) nonpositive += d(i) * w(i);
  }
  const double estimated = *fit.t_w_top + below.value();
  if (!(estimated > 0.0)) throw Error(ErrorCode::ZeroMean, "estimated total wealth is not positive");
  const double zeta = bm.total_wealth(work.wealth_concept) / estimated;
  const double T = zeta * all.value() - nonpositive.value();
  const Eigen::VectorXd a = wealth_calibration_factors(d, w, T);
  if ((a.array() < 0.0).any()) throw Error(ErrorCode::NegativeAmountProduced, "wealth calibration gives negative factors");

  AdjustmentOutcome out;
  out.dataset = pc.dataset;
  for (std::size_t i = 0; i < out.dataset.size(); ++i) scale_household(out.dataset.households[i], a(idx(i)));
  out.weight_factors = pc.weight_factors;
  out.amount_factors = a;
  out.zeta = zeta;
  out.warnings = pc.warnings;

  ParetoFit scaled = fit;
  scaled.w0 *= zeta;
  scaled.w1 *= zeta;
  derive_tail_totals(scaled);
  const Portfolio shares = tail_portfolio_shares(out.dataset, scaled.w0);

  TraceRecord tr = trace_of(1, scaled, out.dataset, bm);
  tr.max_relative_residual = pc.trace.front().max_relative_residual;

  if (portfolio_step) {
    const MacroBenchmarks adj = subtract_tail_totals(bm, scaled, shares, TailPart::missing, &out.warnings);
    const SurveyDataset& cur = out.dataset;
    const std::size_t n = cur.size();
    std::vector<Eigen::VectorXd> cols;
    std::vector<double> targets;
    std::vector<std::string> labels;
    for (Item it : cfg.comparable_items) {
      cols.push_back(cur.amounts(it));
      targets.push_back(adj.item(it));
      labels.emplace_back(item_name(it));
    }
    const Eigen::VectorXd cw = cur.wealth();
    Eigen::VectorXd in_tail(idx(n));
    for (std::size_t i = 0; i < n; ++i) in_tail(idx(i)) = cw(idx(i)) >= scaled.w0 ? 1.0 : 0.0;
    cols.push_back(in_tail);
    targets.push_back(scaled.t_d_obs);
    labels.emplace_back("tail_households");
    add_demographic_columns(cur, bm, cols, targets, labels);
    const CalibrationResult res = calibrate_weights(cur.weights(), cols, targets, labels, cfg);
    out.dataset.set_weights(res.new_weights);
    out.weight_factors = out.weight_factors.cwiseProduct(res.factors);
    append_warnings(out.warnings, res.warnings);
    tr.max_relative_residual = std::max(tr.max_relative_residual, max_abs(res.relative_residuals));
  }

  AdjustmentOutcome rec = impute_missing_tail_observation(out.dataset, scaled, shares);
  out.dataset = std::move(rec.dataset);
  out.dataset.wealth_concept = ds.wealth_concept;
  out.synthetic_tail_observation = rec.synthetic_tail_observation;
  out.fit = scaled;
  tr.coverage_ratios = coverage(out.dataset, bm);
  out.trace.push_back(tr);
  out.iterations = 1;
  return out;
}

AdjustmentOutcome simultaneous(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                               const AdjustmentConfig& cfg) {
  cfg.validate();
  const ParetoOptions opts = cfg.pareto_options();
  const Eigen::VectorXd d = ds.weights();
  SurveyDataset cur = ds;
  ParetoFit fit = fit_pareto(cur, rl, opts);

  AdjustmentOutcome out;
  out.converged = false;
  out.amount_factors = Eigen::VectorXd::Ones(idx(ds.size()));
  SurveyDataset last;
  ParetoFit last_fit;
  Portfolio last_shares{};

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    AdjustmentOutcome pc = pareto_calibration(cur, fit, bm, cfg);
    append_warnings(out.warnings, pc.warnings);
    const Portfolio shares = tail_portfolio_shares(pc.dataset, fit.w0);
    const MacroBenchmarks adj = subtract_tail_totals(bm, fit, shares, TailPart::missing, &out.warnings);
    AdjustmentOutcome mi = multivariate_imputation(pc.dataset, comparable_targets(adj, cfg.comparable_items), cfg.tau);
    append_warnings(out.warnings, mi.warnings);
    out.amount_factors = out.amount_factors.cwiseProduct(mi.amount_factors);
    out.weight_factors = pc.weight_factors;

    for (std::size_t i = 0; i < cur.size(); ++i) cur.households[i].portfolio = mi.dataset.households[i].portfolio;
    const ParetoFit next = fit_pareto(cur, rl, opts);

    TraceRecord tr;
    tr.iteration = it;
    tr.w0 = fit.w0;
    tr.alpha = fit.alpha;
    tr.alpha_after = next.alpha;
    tr.t_d_miss = fit.t_d_miss;
    tr.t_w_miss = fit.t_w_miss.value_or(0.0);
    tr.max_relative_residual = std::max(pc.trace.front().max_relative_residual, mi.trace.front().max_relative_residual);
    const AdjustmentOutcome with_tail = impute_missing_tail_observation(mi.dataset, fit, shares);
    tr.coverage_ratios = coverage(with_tail.dataset, bm);
    out.trace.push_back(tr);
    out.iterations = it;

    last = std::move(mi.dataset);
    last_fit = fit;
    last_shares = shares;
    if (std::abs(next.alpha - fit.alpha) < cfg.alpha_tolerance) {
      out.converged = true;
      break;
    }
    fit = next;
  }
  if (!out.converged)
    out.warnings.push_back("NonConvergence: alpha still moving after " + std::to_string(cfg.max_iterations) + " iterations");

  AdjustmentOutcome rec = impute_missing_tail_observation(last, last_fit, last_shares);
  out.dataset = std::move(rec.dataset);
  out.synthetic_tail_observation = rec.synthetic_tail_observation;
  out.fit = last_fit;
  return out;
}

CalibrationProblem weight_calibration_problem(const SurveyDataset& ds, const MacroBenchmarks& bm,
                                              const WeightConstraints& wc) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "cannot calibrate an empty dataset");
  const std::size_t n = ds.size();
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> targets;
  std::vector<std::string> labels;
  for (Item it : wc.items) {
    if (!bm.has_item(it))
      throw Error(ErrorCode::ZeroBenchmark, "no benchmark for item '" + std::string(item_name(it)) + "'");
    cols.push_back(ds.amounts(it));
    targets.push_back(bm.item(it));
    labels.emplace_back(item_name(it));
  }
  if (wc.demographics) {
    if (auto total = bm.total_households(ds)) {
      cols.push_back(Eigen::VectorXd::Ones(idx(n)));
      targets.push_back(*total);
      labels.emplace_back("households");
      add_demographic_columns(ds, bm, cols, targets, labels);
    }
  }
  if (cols.empty()) throw Error(ErrorCode::InvalidArgument, "weight calibration has no constraints");

  CalibrationProblem p;
  p.base_weights = ds.weights();
  p.aux.resize(idx(n), idx(cols.size()));
  for (std::size_t r = 0; r < cols.size(); ++r) p.aux.col(idx(r)) = cols[r];
  p.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), idx(targets.size()));
  p.bounds = wc.bounds;
  if (!wc.ridge.empty()) {
    p.ridge_tolerances = Eigen::VectorXd::Zero(idx(labels.size()));
    for (const auto& [label, tol] : wc.ridge) {
      auto hit = std::find(labels.begin(), labels.end(), label);
      if (hit == labels.end()) throw Error(ErrorCode::InvalidArgument, "ridge tolerance for unknown constraint '" + label + "'");
      p.ridge_tolerances(hit - labels.begin()) = tol;
    }
  }
  p.labels = std::move(labels);
  return p;
}

CalibrationResult solve_calibration(const CalibrationProblem& p) {
  if (p.ridge_tolerances.size() != 0) return solve_ridge(p);
  if (p.bounds) return solve_bounded(p);
  return solve_chi2(p);
}

AdjustmentOutcome run_adjustment(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                                 const AdjustmentConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case Method::survey_missing_tail:
      return survey_missing_tail(ds, rl, cfg);
    case Method::pareto_cal:
    case Method::pareto_cal_proportional: {
      const ParetoFit fit = fit_pareto(ds, rl, cfg.pareto_options());
      AdjustmentOutcome out = pareto_calibration(ds, fit, bm, cfg);
      const Portfolio shares = tail_portfolio_shares(out.dataset, fit.w0);
      if (cfg.method == Method::pareto_cal_proportional) {
        const MacroBenchmarks adj = subtract_tail_totals(bm, fit, shares, TailPart::missing, &out.warnings);
        AdjustmentOutcome pa = proportional_allocation(out.dataset, comparable_targets(adj, cfg.comparable_items));
        out.dataset = std::move(pa.dataset);
      }
      AdjustmentOutcome rec = impute_missing_tail_observation(out.dataset, fit, shares);
      out.dataset = std::move(rec.dataset);
      out.synthetic_tail_observation = rec.synthetic_tail_observation;
      out.trace.front().coverage_ratios = coverage(out.dataset, bm);
      return out;
    }
    case Method::single_iteration:
      return single_iteration(ds, rl, bm, cfg, false);
    case Method::single_iteration_portfolio:
      return single_iteration(ds, rl, bm, cfg, true);
    case Method::simultaneous:
      return simultaneous(ds, rl, bm, cfg);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace tailcal
