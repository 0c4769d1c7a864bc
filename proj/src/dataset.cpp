#include "tailcal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "tailcal/numeric.hpp"

namespace tailcal {

namespace {

constexpr std::array<std::string_view, kItemCount> kItemNames = {
    "deposits",     "bonds",           "shares",         "mutual_funds", "insurance_pensions",
    "money_owed",   "business_wealth", "housing_wealth", "liabilities"};

constexpr std::string_view kDemoPrefix = "demo_";

double parse_double(const std::string& field, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first == last) return 0.0;  // empty amount reads as zero
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw RowError(ErrorCode::MalformedInput, row, "column '" + column + "' is not a number: '" + field + "'");
  return v;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string_view item_name(Item item) { return kItemNames[index(item)]; }

std::optional<Item> parse_item(std::string_view name) {
  for (std::size_t k = 0; k < kItemCount; ++k)
    if (kItemNames[k] == name) return static_cast<Item>(k);
  return std::nullopt;
}

double gross_wealth(const Portfolio& p) {
  CompensatedSum<double> s;
  for (Item it : kAllItems)
    if (is_asset(it)) s += p[index(it)];
  return s.value();
}

double net_wealth(const Portfolio& p) { return gross_wealth(p) - p[index(Item::liabilities)]; }

std::string_view to_string(WealthConcept wc) {
  return wc == WealthConcept::net ? "net" : "gross";
}

WealthConcept parse_wealth_concept(std::string_view name) {
  if (name == "net") return WealthConcept::net;
  if (name == "gross") return WealthConcept::gross;
  throw Error(ErrorCode::InvalidArgument, "wealth wc must be 'net' or 'gross', got '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

Eigen::VectorXd SurveyDataset::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) w(static_cast<Eigen::Index>(i)) = households[i].weight;
  return w;
}

Eigen::VectorXd SurveyDataset::wealth() const { return wealth(wealth_concept); }

Eigen::VectorXd SurveyDataset::wealth(WealthConcept wc) const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) w(static_cast<Eigen::Index>(i)) = households[i].wealth(wc);
  return w;
}

Eigen::VectorXd SurveyDataset::amounts(Item item) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = households[i].amount(item);
  return v;
}

void SurveyDataset::set_weights(const Eigen::VectorXd& w) {
  if (static_cast<std::size_t>(w.size()) != size())
    throw Error(ErrorCode::InvalidArgument, "weight vector length does not match dataset");
  for (std::size_t i = 0; i < size(); ++i) households[i].weight = w(static_cast<Eigen::Index>(i));
}

std::vector<std::size_t> SurveyDataset::ranked(WealthConcept wc) const {
  std::vector<double> w(size());
  for (std::size_t i = 0; i < size(); ++i) w[i] = households[i].wealth(wc);
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (w[a] != w[b]) return w[a] > w[b];
    return households[a].id < households[b].id;
  });
  return order;
}

std::string SurveyDataset::cell_key(std::size_t i, std::size_t v) const {
  return demographic_vars[v] + "=" + households[i].demographics[v];
}

void SurveyDataset::validate() const {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < size(); ++i) {
    const Household& h = households[i];
    const std::size_t row = i + 1;
    if (!(h.weight > 0.0) || !std::isfinite(h.weight))
      throw RowError(ErrorCode::NonPositiveWeight, row, "weight must be positive and finite");
    for (Item it : kAllItems) {
      const double a = h.amount(it);
      if (!std::isfinite(a) || a < 0.0)
        throw RowError(ErrorCode::NegativeAmount, row,
                       "item '" + std::string(item_name(it)) + "' must be non-negative and finite");
    }
    if (h.demographics.size() != demographic_vars.size())
      throw RowError(ErrorCode::MalformedInput, row, "demographic label count mismatch");
    if (!seen.insert(h.id).second) throw RowError(ErrorCode::DuplicateId, row, "duplicate id '" + h.id + "'");
  }
}

void RichList::sort() {
  std::stable_sort(entries.begin(), entries.end(), [](const RichListEntry& a, const RichListEntry& b) {
    if (a.wealth != b.wealth) return a.wealth > b.wealth;
    return a.id < b.id;
  });
}

void RichList::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!(entries[i].wealth > 0.0) || !std::isfinite(entries[i].wealth))
      throw RowError(ErrorCode::NegativeAmount, i + 1, "rich-list wealth must be positive");
    if (i > 0 && entries[i].wealth > entries[i - 1].wealth)
      throw RowError(ErrorCode::MalformedInput, i + 1, "rich list not sorted descending");
  }
}

double MacroBenchmarks::item(Item it) const {
  auto found = item_totals.find(it);
  if (found == item_totals.end())
    throw Error(ErrorCode::UnknownVariable, "no benchmark for item '" + std::string(item_name(it)) + "'");
  return found->second;
}

double MacroBenchmarks::total_wealth(WealthConcept wc) const {
  CompensatedSum<double> s;
  for (const auto& [it, v] : item_totals) {
    if (is_asset(it))
      s += v;
    else if (wc == WealthConcept::net)
      s += -v;
  }
  return s.value();
}

std::optional<double> MacroBenchmarks::total_households(const SurveyDataset& ds) const {
  for (const std::string& var : ds.demographic_vars) {
    const std::string prefix = var + "=";
    CompensatedSum<double> s;
    bool any = false;
    for (const auto& [key, count] : demographic_counts) {
      if (key.compare(0, prefix.size(), prefix) == 0) {
        s += count;
        any = true;
      }
    }
    if (any) return s.value();
  }
  return std::nullopt;
}

void MacroBenchmarks::validate() const {
  for (const auto& [it, v] : item_totals)
    if (!std::isfinite(v) || v < 0.0)
      throw Error(ErrorCode::MalformedInput, "benchmark for '" + std::string(item_name(it)) + "' must be finite and >= 0");
  for (const auto& [key, v] : demographic_counts)
    if (!std::isfinite(v) || !(v > 0.0))
      throw Error(ErrorCode::MalformedInput, "demographic count for '" + key + "' must be positive");
}

// ---------------------------------------------------------------------------

Variable parse_variable(std::string_view name, WealthConcept default_concept) {
  if (auto it = parse_item(name)) return Variable::of(*it);
  if (name == "net_wealth" || name == "net") return Variable::of(WealthConcept::net);
  if (name == "gross_wealth" || name == "gross") return Variable::of(WealthConcept::gross);
  if (name == "wealth") return Variable::of(default_concept);
  if (name == "households" || name == "count") return {Variable::Kind::count, Item::deposits};
  throw Error(ErrorCode::UnknownVariable, "unknown variable '" + std::string(name) + "'");
}

Eigen::VectorXd values(const SurveyDataset& ds, const Variable& var) {
  switch (var.kind) {
    case Variable::Kind::item:
      return ds.amounts(var.item);
    case Variable::Kind::net_wealth:
      return ds.wealth(WealthConcept::net);
    case Variable::Kind::gross_wealth:
      return ds.wealth(WealthConcept::gross);
    case Variable::Kind::count:
      return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.size()));
  }
  return {};
}

double weighted_total(const Eigen::VectorXd& weights, const Eigen::VectorXd& v) {
  CompensatedSum<double> s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += weights(i) * v(i);
  return s.value();
}

double horvitz_thompson(const SurveyDataset& ds, const Variable& var) {
  return weighted_total(ds.weights(), values(ds, var));
}

double horvitz_thompson(const SurveyDataset& ds, std::string_view variable) {
  return horvitz_thompson(ds, parse_variable(variable, ds.wealth_concept));
}

double coverage_ratio(const SurveyDataset& ds, const MacroBenchmarks& bm, Item item) {
  const double target = bm.item(item);
  if (!(target > 0.0))
    throw Error(ErrorCode::ZeroBenchmark, "benchmark for '" + std::string(item_name(item)) + "' is zero");
  return horvitz_thompson(ds, Variable::of(item)) / target;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string CsvSchema::item_column(Item it) const {
  auto found = items.find(it);
  return found != items.end() ? found->second : std::string(item_name(it));
}

SurveyDataset read_survey(std::istream& in, const CsvSchema& schema, LoadReport* report) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty file: header row required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM

  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col.emplace(header[k], k);

  auto require = [&](const std::string& name) {
    auto found = col.find(name);
    if (found == col.end()) throw Error(ErrorCode::MissingColumn, "required column '" + name + "' not found");
    return found->second;
  };
  auto optional_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto found = col.find(name);
    if (found == col.end()) return std::nullopt;
    return found->second;
  };

  const std::size_t id_col = require(schema.id);
  const std::size_t weight_col = require(schema.weight);
  std::array<std::size_t, kItemCount> item_cols{};
  for (Item it : kAllItems) item_cols[index(it)] = require(schema.item_column(it));

  SurveyDataset ds;
  std::vector<std::size_t> demo_cols;
  if (!schema.demographics.empty()) {
    for (const auto& name : schema.demographics) {
      demo_cols.push_back(require(name));
      ds.demographic_vars.push_back(name.rfind(kDemoPrefix, 0) == 0 ? name.substr(kDemoPrefix.size()) : name);
    }
  } else {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k].rfind(kDemoPrefix, 0) == 0 && header[k].size() > kDemoPrefix.size()) {
        demo_cols.push_back(k);
        ds.demographic_vars.push_back(header[k].substr(kDemoPrefix.size()));
      }
    }
  }
  const auto psu_col = optional_col(schema.psu);
  const auto stratum_col = optional_col(schema.stratum);
  const auto synthetic_col = optional_col(schema.synthetic);

  if (report) {
    std::set<std::size_t> used = {id_col, weight_col};
    used.insert(item_cols.begin(), item_cols.end());
    used.insert(demo_cols.begin(), demo_cols.end());
    for (auto c : {psu_col, stratum_col, synthetic_col})
      if (c) used.insert(*c);
    for (std::size_t k = 0; k < header.size(); ++k)
      if (!used.count(k)) report->warnings.push_back("ignoring unknown column '" + header[k] + "'");
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() < header.size())
      throw RowError(ErrorCode::MalformedInput, row,
                     "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    Household h;
    h.id = trim(f[id_col]);
    h.weight = parse_double(f[weight_col], row, schema.weight);
    for (Item it : kAllItems) h.portfolio[index(it)] = parse_double(f[item_cols[index(it)]], row, schema.item_column(it));
    for (std::size_t c : demo_cols) h.demographics.push_back(trim(f[c]));
    if (psu_col) h.psu = trim(f[*psu_col]);
    if (stratum_col) h.stratum = trim(f[*stratum_col]);
    if (synthetic_col) {
      const std::string s = trim(f[*synthetic_col]);
      h.synthetic = (s == "1" || s == "true");
    }
    ds.households.push_back(std::move(h));
  }
  ds.validate();
  return ds;
}

SurveyDataset load_survey(const std::string& path, const CsvSchema& schema, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open survey file '" + path + "'");
  return read_survey(in, schema, report);
}

void write_survey(std::ostream& out, const SurveyDataset& ds) {
  out << "id,weight";
  for (Item it : kAllItems) out << ',' << item_name(it);
  for (const auto& v : ds.demographic_vars) out << ',' << kDemoPrefix << v;
  out << ",psu,stratum,synthetic\n";
  for (const Household& h : ds.households) {
    out << csv_escape(h.id) << ',' << format_exact(h.weight);
    for (double a : h.portfolio) out << ',' << format_exact(a);
    for (const auto& d : h.demographics) out << ',' << csv_escape(d);
    out << ',' << csv_escape(h.psu) << ',' << csv_escape(h.stratum) << ',' << (h.synthetic ? 1 : 0) << '\n';
  }
}

void save_survey(const std::string& path, const SurveyDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MalformedInput, "cannot write '" + path + "'");
  write_survey(out, ds);
}

RichList read_rich_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty rich-list file: header row required");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  std::optional<std::size_t> id_col, wealth_col;
  std::array<std::optional<std::size_t>, kItemCount> item_cols{};
  bool any_item = false;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "id") id_col = k;
    if (header[k] == "wealth" || header[k] == "net_wealth") wealth_col = k;
    if (auto it = parse_item(header[k])) {
      item_cols[index(*it)] = k;
      any_item = true;
    }
  }
  if (!wealth_col) throw Error(ErrorCode::MissingColumn, "rich list requires a 'wealth' column");

  RichList rl;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto f = split_csv_line(line);
    if (f.size() < header.size()) throw RowError(ErrorCode::MalformedInput, row, "too few fields");
    RichListEntry e;
    e.id = id_col ? trim(f[*id_col]) : "rich_" + std::to_string(row);
    e.wealth = parse_double(f[*wealth_col], row, "wealth");
    if (any_item) {
      Portfolio p{};
      for (Item it : kAllItems)
        if (item_cols[index(it)]) p[index(it)] = parse_double(f[*item_cols[index(it)]], row, std::string(item_name(it)));
      e.portfolio = p;
    }
    rl.entries.push_back(std::move(e));
  }
  rl.sort();
  rl.validate();
  return rl;
}

RichList load_rich_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open rich-list file '" + path + "'");
  return read_rich_list(in);
}

void write_rich_list(std::ostream& out, const RichList& rl) {
  const bool with_portfolio =
      std::any_of(rl.entries.begin(), rl.entries.end(), [](const auto& e) { return e.portfolio.has_value(); });
  out << "id,wealth";
  if (with_portfolio)
    for (Item it : kAllItems) out << ',' << item_name(it);
  out << '\n';
  for (const auto& e : rl.entries) {
    out << csv_escape(e.id) << ',' << format_exact(e.wealth);
    if (with_portfolio) {
      const Portfolio p = e.portfolio.value_or(Portfolio{});
      for (double a : p) out << ',' << format_exact(a);
    }
    out << '\n';
  }
}

MacroBenchmarks parse_benchmarks(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("benchmarks JSON: ") + e.what());
  }
  MacroBenchmarks bm;
  if (j.contains("items")) {
    for (const auto& [key, value] : j.at("items").items()) {
      auto it = parse_item(key);
      if (!it) throw Error(ErrorCode::UnknownVariable, "benchmarks: unknown item '" + key + "'");
      if (!value.is_number()) throw Error(ErrorCode::MalformedInput, "benchmarks: item '" + key + "' is not a number");
      bm.item_totals[*it] = value.get<double>();
    }
  }
  if (j.contains("demographics")) {
    for (const auto& [key, value] : j.at("demographics").items()) {
      if (!value.is_number()) throw Error(ErrorCode::MalformedInput, "benchmarks: count '" + key + "' is not a number");
      bm.demographic_counts[key] = value.get<double>();
    }
  }
  bm.validate();
  return bm;
}

MacroBenchmarks load_benchmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open benchmarks file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_benchmarks(ss.str());
}

std::string benchmarks_to_json(const MacroBenchmarks& bm) {
  nlohmann::json j;
  j["items"] = nlohmann::json::object();
  j["demographics"] = nlohmann::json::object();
  for (const auto& [it, v] : bm.item_totals) j["items"][std::string(item_name(it))] = v;
  for (const auto& [k, v] : bm.demographic_counts) j["demographics"][k] = v;
  return j.dump(2);
}

}  // namespace tailcal
