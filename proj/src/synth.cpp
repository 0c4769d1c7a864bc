#include "tailcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "tailcal/numeric.hpp"

namespace tailcal {

namespace {

std::string padded_id(char prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%07zu", prefix, k);
  return buf;
}

Portfolio draw_portfolio(double net, const PortfolioProfile& prof, double concentration, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<double, kItemCount - 1> raw{};
  double total = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (prof.asset_shares[j] <= 0.0 || unif(rng) >= prof.ownership[j]) continue;
    std::gamma_distribution<double> g(concentration * prof.asset_shares[j], 1.0);
    raw[j] = g(rng);
    total += raw[j];
  }
  if (!(total > 0.0)) {
    raw[index(Item::deposits)] = 1.0;
    total = 1.0;
  }
  double ratio = 0.0;
  if (unif(rng) < prof.liability_probability)
    ratio = std::min(0.9, prof.liability_ratio * (0.5 + unif(rng)));
  const double gross = net / (1.0 - ratio);
  Portfolio p{};
  for (std::size_t j = 0; j < raw.size(); ++j) p[j] = gross * raw[j] / total;
  p[index(Item::liabilities)] = gross * ratio;
  return p;
}

std::size_t draw_category(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    cum += probs[c];
    if (u < cum) return c;
  }
  return probs.size() - 1;
}

}  // namespace

PortfolioProfile default_body_profile() {
  PortfolioProfile p;
  p.asset_shares = {0.15, 0.03, 0.02, 0.03, 0.07, 0.01, 0.04, 0.65};
  p.ownership = {1.0, 0.15, 0.10, 0.12, 0.35, 0.08, 0.10, 0.60};
  p.liability_probability = 0.45;
  p.liability_ratio = 0.25;
  return p;
}

PortfolioProfile default_tail_profile() {
  PortfolioProfile p;
  p.asset_shares = {0.08, 0.06, 0.15, 0.08, 0.05, 0.02, 0.25, 0.31};
  p.ownership = {1.0, 0.40, 0.50, 0.40, 0.50, 0.15, 0.45, 0.95};
  p.liability_probability = 0.50;
  p.liability_ratio = 0.10;
  return p;
}

void PopulationSpec::validate() const {
  if (N == 0) throw Error(ErrorCode::InvalidArgument, "population size must be positive");
  if (tail_fraction < 0.0 || tail_fraction >= 1.0)
    throw Error(ErrorCode::InvalidArgument, "tail_fraction must lie in [0, 1)");
  if (tail_fraction > 0.0 && !(tail_alpha > 1.0)) throw Error(ErrorCode::InvalidArgument, "tail alpha must exceed 1");
  if (!(tail_w0 > 0.0) || !(body_sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "invalid body/tail parameters");
  for (const auto* prof : {&body, &tail}) {
    double s = 0.0;
    for (double v : prof->asset_shares) s += v;
    if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "portfolio shares must sum to 1");
  }
  for (const auto& d : demographics) {
    double s = 0.0;
    for (double v : d.probabilities) s += v;
    if (d.categories.size() != d.probabilities.size() || std::abs(s - 1.0) > 1e-9)
      throw Error(ErrorCode::InvalidArgument, "demographic probabilities for '" + d.name + "' must sum to 1");
  }
}

std::size_t Population::count_above(double w) const {
  return static_cast<std::size_t>(sorted_wealth.end() - std::lower_bound(sorted_wealth.begin(), sorted_wealth.end(), w));
}

double Population::wealth_above(double w) const {
  CompensatedSum<double> s;
  for (auto it = std::lower_bound(sorted_wealth.begin(), sorted_wealth.end(), w); it != sorted_wealth.end(); ++it) s += *it;
  return s.value();
}

Population generate_population(const PopulationSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Population pop;
  SurveyDataset& t = pop.table;
  for (const auto& d : spec.demographics) t.demographic_vars.push_back(d.name);
  t.households.reserve(spec.N);

  for (std::size_t k = 0; k < spec.N; ++k) {
    const bool in_tail = spec.tail_fraction > 0.0 && unif(rng) < spec.tail_fraction;
    double w;
    if (in_tail) {
      w = spec.tail_w0 * std::pow(1.0 - unif(rng), -1.0 / spec.tail_alpha);
    } else {
      do {
        w = std::exp(spec.body_mu + spec.body_sigma * normal(rng));
      } while (spec.tail_fraction > 0.0 && w >= spec.tail_w0);
    }
    Household h;
    h.id = padded_id('p', k + 1);
    h.weight = 1.0;
    h.portfolio = draw_portfolio(w, in_tail ? spec.tail : spec.body, spec.share_concentration, rng);
    for (const auto& d : spec.demographics) h.demographics.push_back(d.categories[draw_category(d.probabilities, unif(rng))]);
    h.psu = h.id;
    t.households.push_back(std::move(h));
  }

  PopulationOracle& o = pop.oracle;
  for (Item it : kAllItems) o.benchmarks.item_totals[it] = horvitz_thompson(t, Variable::of(it));
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t v = 0; v < t.demographic_vars.size(); ++v) o.benchmarks.demographic_counts[t.cell_key(i, v)] += 1.0;
  o.indicators = compute_indicators(t, &o.benchmarks);
  o.total_net_wealth = horvitz_thompson(t, Variable::of(WealthConcept::net));

  const Eigen::VectorXd wealth = t.wealth(WealthConcept::net);
  pop.sorted_wealth.assign(wealth.data(), wealth.data() + wealth.size());
  std::sort(pop.sorted_wealth.begin(), pop.sorted_wealth.end());
  o.tail_count = pop.count_above(spec.tail_w0);
  return pop;
}

double SamplingSpec::propensity(double q) const {
  if (nonresponse_floor >= 1.0) return 1.0;
  return nonresponse_floor + (1.0 - nonresponse_floor) / (1.0 + std::exp(nonresponse_slope * (q - nonresponse_midpoint)));
}

void SamplingSpec::validate() const {
  if (sample_size == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be positive");
  if (!(nonresponse_floor > 0.0) || nonresponse_floor > 1.0)
    throw Error(ErrorCode::InvalidArgument, "response propensity floor must lie in (0, 1]");
  for (double z : underreporting)
    if (!(z > 0.0)) throw Error(ErrorCode::InvalidArgument, "under-reporting factors must be positive");
  for (double z : zero_reporting)
    if (z < 0.0 || z >= 1.0) throw Error(ErrorCode::InvalidArgument, "zero-reporting probabilities must lie in [0, 1)");
}

SurveyDraw draw_survey(const Population& pop, const SamplingSpec& spec) {
  spec.validate();
  const SurveyDataset& t = pop.table;
  const std::size_t N = t.size();
  if (N == 0) throw Error(ErrorCode::EmptySample, "empty population");
  const double base_rate = std::min(1.0, static_cast<double>(spec.sample_size) / static_cast<double>(N));

  // wealth-rank percentile of each population household
  const auto order = t.ranked(WealthConcept::net);  // descending
  std::vector<double> percentile(N);
  for (std::size_t r = 0; r < N; ++r) percentile[order[r]] = 1.0 - static_cast<double>(r) / static_cast<double>(N);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SurveyDraw out;
  out.survey.demographic_vars = t.demographic_vars;
  out.survey.currency = t.currency;
  for (std::size_t i = 0; i < N; ++i) {
    const Household& h = t.households[i];
    const double u = unif(rng);
    const double net = h.net();
    if (spec.truncation_w1 && net > *spec.truncation_w1) continue;
    if (u >= base_rate * spec.propensity(percentile[i])) continue;
    Household s = h;
    s.weight = 1.0 / base_rate;
    for (Item it : kAllItems) {
      const std::size_t k = index(it);
      s.portfolio[k] = h.portfolio[k] * spec.underreporting[k];
      if (spec.zero_reporting[k] > 0.0 && unif(rng) < spec.zero_reporting[k]) s.portfolio[k] = 0.0;
    }
    s.psu = s.id;
    s.stratum = s.demographics.empty() ? std::string() : s.demographics.front();
    out.survey.households.push_back(std::move(s));
  }
  if (out.survey.empty()) throw Error(ErrorCode::EmptySample, "no household was sampled");

  for (std::size_t r = 0; r < std::min(spec.rich_list_size, N); ++r) {
    const Household& h = t.households[order[r]];
    out.rich_list.entries.push_back({"rich_" + h.id, h.net(), h.portfolio});
  }
  out.rich_list.sort();
  out.benchmarks = pop.oracle.benchmarks;
  return out;
}

}  // namespace tailcal
