#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tailcal/error.hpp"

namespace tailcal {

enum class Item : std::size_t {
  deposits = 0,
  bonds,
  shares,
  mutual_funds,
  insurance_pensions,
  money_owed,
  business_wealth,
  housing_wealth,
  liabilities,
};

inline constexpr std::size_t kItemCount = 9;

inline constexpr std::array<Item, kItemCount> kAllItems = {
    Item::deposits,           Item::bonds,      Item::shares,
    Item::mutual_funds,       Item::insurance_pensions,
    Item::money_owed,         Item::business_wealth,
    Item::housing_wealth,     Item::liabilities};

/// Instruments with high survey/national-accounts comparability. Business and
/// housing wealth are excluded and follow the household factor instead.
inline const std::vector<Item> kComparableItems = {
    Item::deposits,   Item::bonds,      Item::shares,     Item::mutual_funds,
    Item::insurance_pensions, Item::money_owed, Item::liabilities};

std::string_view item_name(Item item);
std::optional<Item> parse_item(std::string_view name);
inline std::size_t index(Item item) { return static_cast<std::size_t>(item); }
inline bool is_asset(Item item) { return item != Item::liabilities; }

using Portfolio = std::array<double, kItemCount>;

double gross_wealth(const Portfolio& p);
double net_wealth(const Portfolio& p);

enum class WealthConcept { net, gross };

std::string_view to_string(WealthConcept wc);
WealthConcept parse_wealth_concept(std::string_view name);

struct Household {
  std::string id;
  double weight = 1.0;
  Portfolio portfolio{};
  /// Labels aligned with SurveyDataset::demographic_vars.
  std::vector<std::string> demographics;
  std::string psu;
  std::string stratum;
  bool synthetic = false;

  double gross() const { return gross_wealth(portfolio); }
  double net() const { return net_wealth(portfolio); }
  double wealth(WealthConcept wc) const {
    return wc == WealthConcept::net ? net() : gross();
  }
  double amount(Item item) const { return portfolio[index(item)]; }
};

struct SurveyDataset {
  std::vector<Household> households;
  std::vector<std::string> demographic_vars;
  std::string currency = "EUR";
  WealthConcept wealth_concept = WealthConcept::net;

  std::size_t size() const { return households.size(); }
  bool empty() const { return households.empty(); }

  Eigen::VectorXd weights() const;
  Eigen::VectorXd wealth() const;  // per wealth_concept
  Eigen::VectorXd wealth(WealthConcept wc) const;
  Eigen::VectorXd amounts(Item item) const;

  void set_weights(const Eigen::VectorXd& w);

  /// Household indices ordered by wealth descending, ties by id ascending,
  /// so position 0 is rank 1.
  std::vector<std::size_t> ranked(WealthConcept wc) const;
  std::vector<std::size_t> ranked() const { return ranked(wealth_concept); }

  /// "var=value" key of household i for demographic variable v.
  std::string cell_key(std::size_t i, std::size_t v) const;

  /// Throws on any invariant violation (row numbers are 1-based).
  void validate() const;
};

struct RichListEntry {
  std::string id;
  double wealth = 0.0;
  std::optional<Portfolio> portfolio;
};

struct RichList {
  std::vector<RichListEntry> entries;  // descending by wealth

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  void sort();
  void validate() const;
};

struct MacroBenchmarks {
  std::map<Item, double> item_totals;
  std::map<std::string, double> demographic_counts;

  double item(Item it) const;
  bool has_item(Item it) const { return item_totals.count(it) != 0; }
  /// Net or gross wealth implied by the item totals.
  double total_wealth(WealthConcept wc) const;
  /// Population households: the counts of the first demographic variable
  /// present in both the dataset and the benchmarks, or nullopt.
  std::optional<double> total_households(const SurveyDataset& ds) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Variables and basic estimators

struct Variable {
  enum class Kind { item, net_wealth, gross_wealth, count };
  Kind kind = Kind::net_wealth;
  Item item = Item::deposits;

  static Variable of(Item it) { return {Kind::item, it}; }
  static Variable of(WealthConcept c) {
    return {c == WealthConcept::net ? Kind::net_wealth : Kind::gross_wealth, Item::deposits};
  }
};

/// Accepts item names, "net_wealth", "gross_wealth", "wealth" (dataset
/// wc) and "households".
Variable parse_variable(std::string_view name, WealthConcept default_concept = WealthConcept::net);

Eigen::VectorXd values(const SurveyDataset& ds, const Variable& var);

/// Sum of d_i v_i with compensated accumulation.
double horvitz_thompson(const SurveyDataset& ds, const Variable& var);
double horvitz_thompson(const SurveyDataset& ds, std::string_view variable);
double weighted_total(const Eigen::VectorXd& weights, const Eigen::VectorXd& values);

double coverage_ratio(const SurveyDataset& ds, const MacroBenchmarks& bm, Item item);

// ---------------------------------------------------------------------------
// Ingestion

struct CsvSchema {
  std::string id = "id";
  std::string weight = "weight";
  std::map<Item, std::string> items;  // empty -> canonical item names
  /// Explicit demographic columns. When empty, every column named
  /// "demo_<var>" is taken as demographic variable <var>.
  std::vector<std::string> demographics;
  std::string psu = "psu";
  std::string stratum = "stratum";
  std::string synthetic = "synthetic";

  std::string item_column(Item it) const;
};

/// Result of loading; warnings hold non-fatal notes such as ignored columns.
struct LoadReport {
  std::vector<std::string> warnings;
};

SurveyDataset read_survey(std::istream& in, const CsvSchema& schema = {}, LoadReport* report = nullptr);
SurveyDataset load_survey(const std::string& path, const CsvSchema& schema = {}, LoadReport* report = nullptr);
void write_survey(std::ostream& out, const SurveyDataset& ds);
void save_survey(const std::string& path, const SurveyDataset& ds);

RichList read_rich_list(std::istream& in);
RichList load_rich_list(const std::string& path);
void write_rich_list(std::ostream& out, const RichList& rl);

MacroBenchmarks parse_benchmarks(std::string_view json_text);
MacroBenchmarks load_benchmarks(const std::string& path);
std::string benchmarks_to_json(const MacroBenchmarks& bm);

/// Splits one CSV line (RFC 4180 quoting) into fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// Shortest decimal form that round-trips the double exactly.
std::string format_exact(double v);

}  // namespace tailcal
