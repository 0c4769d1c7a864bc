#include "tailcal/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace tailcal {

namespace {

std::string percent_key(double p) { return std::to_string(static_cast<int>(std::lround(p * 100))); }

double quantile_sorted(const std::vector<double>& xs, double q) {
  if (xs.empty()) return std::nan("");
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace

double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::strtod(buf, nullptr);
}

void normalize(Json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    j = std::isfinite(v) ? Json(round12(v)) : Json(nullptr);
  } else if (j.is_structured()) {
    for (auto& child : j) normalize(child);
  }
}

std::string dump_json(Json j) {
  normalize(j);
  return j.dump(2) + "\n";
}

void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MalformedInput, "cannot write '" + path + "'");
  out << dump_json(j);
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedInput, path + ": " + e.what());
  }
}

Json to_json(const ParetoFit& fit) {
  Json j;
  j["w0"] = fit.w0;
  j["alpha"] = fit.alpha;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  j["w1"] = fit.w1;
  j["pooled_tail_size"] = fit.m;
  j["survey_tail_size"] = fit.survey_tail_size;
  j["survey_tail_weight"] = fit.D;
  j["t_d_top"] = fit.t_d_top;
  j["t_d_miss"] = fit.t_d_miss;
  j["t_d_obs"] = fit.t_d_obs;
  j["t_w_top"] = fit.t_w_top ? Json(*fit.t_w_top) : Json(nullptr);
  j["t_w_miss"] = fit.t_w_miss ? Json(*fit.t_w_miss) : Json(nullptr);
  j["t_w_obs"] = fit.t_w_obs() ? Json(*fit.t_w_obs()) : Json(nullptr);
  return j;
}

Json to_json(const IndicatorReport& rep) {
  Json j;
  j["gini"] = rep.gini;
  j["top_shares"] = Json::object();
  for (const auto& [p, s] : rep.top_shares) j["top_shares"][percent_key(p)] = s;
  j["bottom50_share"] = rep.bottom50_share;
  j["median"] = rep.median;
  j["mean"] = rep.mean;
  j["households"] = rep.household_count_weighted;
  j["coverage_ratios"] = Json::object();
  for (const auto& [it, cr] : rep.coverage_ratios) j["coverage_ratios"][std::string(item_name(it))] = cr;
  j["alpha_final"] = rep.alpha_final ? Json(*rep.alpha_final) : Json(nullptr);
  return j;
}

Json to_json(const TraceRecord& tr) {
  Json j;
  j["iteration"] = tr.iteration;
  j["w0"] = tr.w0;
  j["alpha"] = tr.alpha;
  j["alpha_after"] = tr.alpha_after ? Json(*tr.alpha_after) : Json(nullptr);
  j["t_d_miss"] = tr.t_d_miss;
  j["t_w_miss"] = tr.t_w_miss;
  j["max_relative_residual"] = tr.max_relative_residual;
  j["coverage_ratios"] = Json::object();
  for (const auto& [it, cr] : tr.coverage_ratios) j["coverage_ratios"][std::string(item_name(it))] = cr;
  return j;
}

Json to_json(const BootstrapSummary& s) {
  Json j;
  j["replicates"] = s.replicates;
  j["successful_replicates"] = s.successful;
  j["discarded_replicates"] = s.discarded;
  j["failures"] = s.failures;
  j["indicators"] = Json::object();
  for (const auto& [k, st] : s.indicators) j["indicators"][k] = {{"mean", st.mean}, {"sd", st.sd}, {"cv", st.cv}};
  return j;
}

Json to_json(const PopulationOracle& o) {
  Json j;
  j["indicators"] = to_json(o.indicators);
  j["tail_count"] = o.tail_count;
  j["total_net_wealth"] = o.total_net_wealth;
  return j;
}

Json to_json(const AdjustmentConfig& cfg) {
  Json j;
  j["method"] = std::string(to_string(cfg.method));
  j["tau"] = cfg.tau;
  j["alpha_tolerance"] = cfg.alpha_tolerance;
  j["max_iterations"] = cfg.max_iterations;
  j["min_tail"] = cfg.min_tail;
  Json items = Json::array();
  for (Item it : cfg.comparable_items) items.push_back(std::string(item_name(it)));
  j["comparable_items"] = items;
  j["weight_bounds"] = cfg.weight_bounds ? Json::array({cfg.weight_bounds->first, cfg.weight_bounds->second}) : Json(nullptr);
  j["zeta_concept"] = cfg.zeta_concept ? Json(std::string(to_string(*cfg.zeta_concept))) : Json(nullptr);
  j["fixed_w0"] = cfg.fixed_w0 ? Json(*cfg.fixed_w0) : Json(nullptr);
  j["tail_first_rank"] = cfg.tail_range.first_rank;
  j["tail_last_rank"] = cfg.tail_range.last_rank ? Json(*cfg.tail_range.last_rank) : Json(nullptr);
  return j;
}

Json calibration_diagnostics(const CalibrationProblem& p, const CalibrationResult& res) {
  Json j;
  Json cons = Json::array();
  for (Eigen::Index r = 0; r < p.constraints(); ++r) {
    const std::string label =
        static_cast<std::size_t>(r) < p.labels.size() ? p.labels[static_cast<std::size_t>(r)] : "c" + std::to_string(r + 1);
    cons.push_back({{"label", label},
                    {"target", p.targets(r)},
                    {"residual", res.residuals(r)},
                    {"relative_residual", res.relative_residuals(r)},
                    {"multiplier", res.multipliers(r)}});
  }
  j["constraints"] = cons;
  std::vector<double> a(res.factors.data(), res.factors.data() + res.factors.size());
  std::sort(a.begin(), a.end());
  Json q;
  for (double level : {0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0}) {
    char key[16];
    std::snprintf(key, sizeof(key), "p%02d", static_cast<int>(std::lround(level * 100)));
    q[level == 1.0 ? std::string("p100") : std::string(key)] = quantile_sorted(a, level);
  }
  j["factor_quantiles"] = q;
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["rank"] = res.rank;
  j["negative_weights"] = res.negative_weights;
  j["warnings"] = res.warnings;
  return j;
}

Json adjustment_report(const AdjustmentOutcome& out) {
  Json j;
  Json trace = Json::array();
  for (const auto& tr : out.trace) trace.push_back(to_json(tr));
  j["trace"] = trace;
  j["converged"] = out.converged;
  j["iterations"] = out.iterations;
  j["warnings"] = out.warnings;
  j["fit"] = out.fit ? to_json(*out.fit) : Json(nullptr);
  j["zeta"] = out.zeta ? Json(*out.zeta) : Json(nullptr);
  j["synthetic_tail_observation"] =
      out.synthetic_tail_observation ? Json(*out.synthetic_tail_observation) : Json(nullptr);
  if (out.amount_factors.size() != 0) j["amount_factor_range"] = {out.amount_factors.minCoeff(), out.amount_factors.maxCoeff()};
  if (out.weight_factors.size() != 0) j["weight_factor_range"] = {out.weight_factors.minCoeff(), out.weight_factors.maxCoeff()};
  return j;
}

void write_adjusted_csv(std::ostream& out, const SurveyDataset& original, const AdjustmentOutcome& outcome) {
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < original.size(); ++i) row_of.emplace(original.households[i].id, i);

  std::ostringstream body;
  write_survey(body, outcome.dataset);
  std::istringstream lines(body.str());
  std::string line;
  std::getline(lines, line);
  out << line << ",a,d,d_star\n";
  for (const Household& h : outcome.dataset.households) {
    std::getline(lines, line);
    out << line;
    auto hit = row_of.find(h.id);
    if (h.synthetic || hit == row_of.end()) {
      out << ",1,," << format_exact(h.weight) << '\n';
      continue;
    }
    const auto i = static_cast<Eigen::Index>(hit->second);
    const double a = i < outcome.amount_factors.size() ? outcome.amount_factors(i) : 1.0;
    out << ',' << format_exact(a) << ',' << format_exact(original.households[hit->second].weight) << ','
        << format_exact(h.weight) << '\n';
  }
}

void write_mean_excess_csv(std::ostream& out, const std::vector<MeanExcessPoint>& pts) {
  out << "wealth,mean_excess,weight_above\n";
  for (const auto& p : pts)
    out << format_exact(p.wealth) << ',' << format_exact(p.mean_excess) << ',' << format_exact(p.weight_above) << '\n';
}

void write_lorenz_csv(std::ostream& out, const std::vector<LorenzPoint>& pts) {
  out << "population_share,wealth_share\n";
  for (const auto& p : pts) out << format_exact(p.population_share) << ',' << format_exact(p.wealth_share) << '\n';
}

void write_ccdf_csv(std::ostream& out, const std::vector<CcdfPoint>& pts) {
  out << "wealth,survivor\n";
  for (const auto& p : pts) out << format_exact(p.wealth) << ',' << format_exact(p.survivor) << '\n';
}

}  // namespace tailcal
