#include "tailcal/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "tailcal/adjust.hpp"
#include "tailcal/indicators.hpp"
#include "tailcal/io.hpp"
#include "tailcal/pareto.hpp"
#include "tailcal/synth.hpp"
#include "tailcal/variance.hpp"

namespace tailcal::cli {

namespace fs = std::filesystem;

namespace {

/// Flat JSON object -> CLI11 config items routed to one subcommand.
class JsonConfig : public CLI::Config {
 public:
  std::string section;

  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    Json j = Json::object();
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = opt->get_single_name();
      if (opt->get_lnames().empty() || name == "help" || name == "config") continue;
      if (opt->get_expected_max() == 0) {
        j[name] = opt->count() > 0;
        continue;
      }
      std::vector<std::string> vals = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
      if (vals.empty() && !opt->get_default_str().empty()) vals.push_back(opt->get_default_str());
      Json arr = Json::array();
      for (const auto& v : vals) arr.push_back(scalar(v));
      if (arr.empty())
        j[name] = nullptr;
      else if (opt->get_expected_max() > 1)
        j[name] = arr;
      else
        j[name] = arr.front();
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      if (!section.empty()) item.parents = {section};
      item.name = key;
      if (value.is_null()) continue;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v));
      } else {
        item.inputs.push_back(text(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float() && v.get<double>() == std::trunc(v.get<double>()) && std::abs(v.get<double>()) < 1e15)
      return std::to_string(static_cast<long long>(v.get<double>()));
    return v.dump();
  }
  static Json scalar(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    char* end = nullptr;
    const long long i = std::strtoll(s.c_str(), &end, 10);
    if (!s.empty() && end == s.c_str() + s.size()) return i;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return d;
    return s;
  }
};

enum class Level { error, warn, info, debug };

struct Logger {
  std::ostream* err = &std::cerr;
  Level level = Level::info;
  void operator()(Level l, const std::string& msg) const {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= level) *err << "[" << names[static_cast<int>(l)] << "] " << msg << '\n';
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::InvalidArgument, "cannot create output directory '" + dir + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  return f;
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::MalformedInput, what + " file not found: '" + path + "'");
}

Item item_or_throw(const std::string& name) {
  auto it = parse_item(name);
  if (!it) throw Error(ErrorCode::UnknownVariable, "unknown item '" + name + "'");
  return *it;
}

/// Options shared by adjust and bootstrap.
struct AdjustFlags {
  std::string method = std::string(to_string(Method::simultaneous));
  double tau = 1.0;
  double alpha_tolerance = 0.05;
  int max_iterations = 10;
  std::size_t min_tail = 50;
  std::vector<std::string> comparable;
  std::vector<double> bounds;
  bool no_bounds = false;
  std::string zeta_concept;
  std::optional<double> w0;

  void attach(CLI::App* app) {
    app->add_option("--method", method, "survey_missing_tail, pareto_cal, pareto_cal_proportional, "
                                        "single_iteration, single_iteration_portfolio or simultaneous")
        ->capture_default_str();
    app->add_option("--tau", tau, "shrinkage exponent of the imputation constants")->capture_default_str();
    app->add_option("--alpha-tolerance", alpha_tolerance, "stop when alpha moves less than this")->capture_default_str();
    app->add_option("--max-iterations", max_iterations)->capture_default_str();
    app->add_option("--min-tail", min_tail, "smallest tail allowed in threshold search")->capture_default_str();
    app->add_option("--comparable-items", comparable, "items calibrated to benchmarks");
    app->add_option("--weight-bounds", bounds, "L U range on weight factors")->expected(2);
    app->add_flag("--no-weight-bounds", no_bounds, "calibrate weights without range restrictions");
    app->add_option("--zeta-concept", zeta_concept, "net or gross (single-iteration scaling)");
    app->add_option("--w0", w0, "fixed Pareto threshold");
  }

  AdjustmentConfig config() const {
    AdjustmentConfig cfg;
    cfg.method = parse_method(method);
    cfg.tau = tau;
    cfg.alpha_tolerance = alpha_tolerance;
    cfg.max_iterations = max_iterations;
    cfg.min_tail = min_tail;
    if (!comparable.empty()) {
      cfg.comparable_items.clear();
      for (const auto& c : comparable) cfg.comparable_items.push_back(item_or_throw(c));
    }
    if (no_bounds)
      cfg.weight_bounds.reset();
    else if (bounds.size() == 2)
      cfg.weight_bounds = std::make_pair(bounds[0], bounds[1]);
    if (!zeta_concept.empty()) cfg.zeta_concept = parse_wealth_concept(zeta_concept);
    cfg.fixed_w0 = w0;
    cfg.validate();
    return cfg;
  }
};

struct Inputs {
  std::string survey, rich_list, benchmarks, out_dir = ".";

  SurveyDataset load_survey_checked(const Logger& log) const {
    require_file(survey, "survey");
    LoadReport rep;
    SurveyDataset ds = load_survey(survey, {}, &rep);
    for (const auto& w : rep.warnings) log(Level::warn, w);
    log(Level::info, "loaded " + std::to_string(ds.size()) + " households from " + survey);
    return ds;
  }
  RichList load_rich(const Logger& log) const {
    if (rich_list.empty()) return {};
    require_file(rich_list, "rich list");
    RichList rl = load_rich_list(rich_list);
    log(Level::info, "loaded " + std::to_string(rl.size()) + " rich-list entries");
    return rl;
  }
  MacroBenchmarks load_bm() const {
    require_file(benchmarks, "benchmarks");
    return load_benchmarks(benchmarks);
  }
};

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void echo_config(const JsonConfig& formatter, const CLI::App* sub, const std::string& dir) {
  std::ofstream f = open_out(path_in(dir, "config.json"));
  Json j = Json::parse(formatter.to_config(sub, true, false, ""));
  j["command"] = sub->get_name();
  f << dump_json(j);
}

}  // namespace

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app("Micro-macro adjustment of household wealth surveys", "tailcal");
  auto formatter = std::make_shared<JsonConfig>();
  app.config_formatter(formatter);
  app.set_config("--config", "", "JSON file with option values keyed by long option name");
  app.require_subcommand(1);
  app.fallthrough();

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "error, warn, info or debug")->capture_default_str();

  Inputs in;
  AdjustFlags adj;

  // synth
  PopulationSpec ps;
  SamplingSpec ss;
  std::vector<std::string> underreport, zero_report;
  bool truncate_rich = false;
  std::optional<double> truncation;
  auto* synth = app.add_subcommand("synth", "generate a synthetic population, survey, rich list and benchmarks");
  synth->add_option("--out", in.out_dir, "output directory")->capture_default_str();
  synth->add_option("--population", ps.N, "population size")->capture_default_str();
  synth->add_option("--sample-size", ss.sample_size)->capture_default_str();
  synth->add_option("--seed", ps.seed, "population seed")->capture_default_str();
  synth->add_option("--sample-seed", ss.seed)->capture_default_str();
  synth->add_option("--alpha", ps.tail_alpha, "Pareto shape of the tail")->capture_default_str();
  synth->add_option("--w0", ps.tail_w0, "Pareto threshold of the tail")->capture_default_str();
  synth->add_option("--tail-fraction", ps.tail_fraction)->capture_default_str();
  synth->add_option("--nonresponse-floor", ss.nonresponse_floor, "1 disables nonresponse")->capture_default_str();
  synth->add_option("--nonresponse-midpoint", ss.nonresponse_midpoint)->capture_default_str();
  synth->add_option("--nonresponse-slope", ss.nonresponse_slope)->capture_default_str();
  synth->add_option("--underreport", underreport, "item=factor, reported share of true holdings");
  synth->add_option("--zero-report", zero_report, "item=probability of reporting zero");
  synth->add_option("--rich-list-size", ss.rich_list_size)->capture_default_str();
  synth->add_option("--truncation", truncation, "households richer than this are never sampled");
  synth->add_flag("--truncate-at-rich-list", truncate_rich, "truncate the survey at the poorest rich-list entry");

  // fit-pareto
  auto* fitp = app.add_subcommand("fit-pareto", "detect the threshold and fit the Pareto tail");
  fitp->add_option("--survey", in.survey)->required();
  fitp->add_option("--rich-list", in.rich_list);
  fitp->add_option("--out", in.out_dir)->capture_default_str();
  fitp->add_option("--min-tail", adj.min_tail)->capture_default_str();
  fitp->add_option("--w0", adj.w0, "fixed threshold");

  // calibrate
  std::string constraints_path;
  auto* cal = app.add_subcommand("calibrate", "chi-squared calibration of the survey weights");
  cal->add_option("--survey", in.survey)->required();
  cal->add_option("--benchmarks", in.benchmarks)->required();
  cal->add_option("--constraints", constraints_path, "JSON with items, demographics, bounds and ridge");
  cal->add_option("--out", in.out_dir)->capture_default_str();

  // adjust
  auto* adjc = app.add_subcommand("adjust", "run one of the micro-macro adjustment methods");
  adjc->add_option("--survey", in.survey)->required();
  adjc->add_option("--rich-list", in.rich_list);
  adjc->add_option("--benchmarks", in.benchmarks)->required();
  adjc->add_option("--out", in.out_dir)->capture_default_str();
  adj.attach(adjc);

  // indicators
  std::string rank_by;
  bool lorenz = false;
  std::optional<double> ccdf_above;
  auto* ind = app.add_subcommand("indicators", "inequality indicators of a dataset");
  ind->add_option("--survey", in.survey)->required();
  ind->add_option("--benchmarks", in.benchmarks);
  ind->add_option("--out", in.out_dir)->capture_default_str();
  ind->add_option("--rank-by", rank_by, "net or gross");
  ind->add_flag("--lorenz", lorenz, "also write lorenz.csv");
  ind->add_option("--ccdf-above", ccdf_above, "also write ccdf.csv for wealth at least this");

  // bootstrap
  std::size_t replicates = 1000;
  std::uint64_t boot_seed = 1;
  std::size_t threads = 0;
  std::string replicate_path;
  auto* boot = app.add_subcommand("bootstrap", "Rao-Wu bootstrap of an adjustment method");
  boot->add_option("--survey", in.survey)->required();
  boot->add_option("--rich-list", in.rich_list);
  boot->add_option("--benchmarks", in.benchmarks)->required();
  boot->add_option("--out", in.out_dir)->capture_default_str();
  boot->add_option("--replicates", replicates)->capture_default_str();
  boot->add_option("--seed", boot_seed)->capture_default_str();
  boot->add_option("--threads", threads, "worker threads; 0 uses TAILCAL_THREADS or all cores")->capture_default_str();
  boot->add_option("--replicate-weights", replicate_path, "CSV of released replicate weights");
  adj.attach(boot);

  // The config file belongs to the chosen subcommand; allow it anywhere on
  // the line by moving it in front.
  std::vector<std::string> args = args_in;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      std::vector<std::string> moved = {args[k], args[k + 1]};
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k + 2));
      args.insert(args.begin(), moved.begin(), moved.end());
      break;
    }
  }
  for (const auto& a : args) {
    if (a.rfind("-", 0) == 0) continue;
    if (auto* s = [&]() -> CLI::App* {
          for (CLI::App* sub : app.get_subcommands({})) if (sub->get_name() == a) return sub;
          return nullptr;
        }()) {
      formatter->section = s->get_name();
      break;
    }
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUserError;
  }

  Logger log;
  log.err = &err;
  if (log_level == "error") log.level = Level::error;
  else if (log_level == "warn") log.level = Level::warn;
  else if (log_level == "debug") log.level = Level::debug;

  CLI::App* sub = app.get_subcommands().front();
  try {
    ensure_dir(in.out_dir);
    echo_config(*formatter, sub, in.out_dir);

    if (sub == synth) {
      for (const auto& spec : {std::make_pair(&underreport, &ss.underreporting), std::make_pair(&zero_report, &ss.zero_reporting)}) {
        for (const std::string& kv : *spec.first) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "expected item=value, got '" + kv + "'");
          (*spec.second)[index(item_or_throw(kv.substr(0, eq)))] = std::stod(kv.substr(eq + 1));
        }
      }
      Population pop = generate_population(ps);
      if (truncate_rich && ss.rich_list_size > 0)
        ss.truncation_w1 = pop.sorted_wealth[pop.sorted_wealth.size() - std::min(ss.rich_list_size, pop.sorted_wealth.size())];
      if (truncation) ss.truncation_w1 = truncation;
      SurveyDraw d = draw_survey(pop, ss);
      save_survey(path_in(in.out_dir, "population.csv"), pop.table);
      save_survey(path_in(in.out_dir, "survey.csv"), d.survey);
      {
        std::ofstream f = open_out(path_in(in.out_dir, "rich_list.csv"));
        write_rich_list(f, d.rich_list);
      }
      {
        std::ofstream f = open_out(path_in(in.out_dir, "benchmarks.json"));
        f << benchmarks_to_json(d.benchmarks) << '\n';
      }
      save_json(path_in(in.out_dir, "oracle.json"), to_json(pop.oracle));
      log(Level::info, "sampled " + std::to_string(d.survey.size()) + " of " + std::to_string(ps.N) + " households");
      return kOk;
    }

    if (sub == fitp) {
      const SurveyDataset ds = in.load_survey_checked(log);
      const RichList rl = in.load_rich(log);
      ParetoOptions po;
      po.threshold.min_tail = adj.min_tail;
      po.fixed_w0 = adj.w0;
      const ParetoFit fit = fit_pareto(ds, rl, po);
      save_json(path_in(in.out_dir, "fit.json"), to_json(fit));
      std::ofstream f = open_out(path_in(in.out_dir, "mean_excess.csv"));
      write_mean_excess_csv(f, mean_excess_curve(ds));
      log(Level::info, "alpha " + std::to_string(fit.alpha) + " above w0 " + std::to_string(fit.w0));
      return kOk;
    }

    if (sub == cal) {
      const SurveyDataset ds = in.load_survey_checked(log);
      const MacroBenchmarks bm = in.load_bm();
      WeightConstraints wc;
      wc.items = kComparableItems;
      if (!constraints_path.empty()) {
        require_file(constraints_path, "constraints");
        const Json j = load_json(constraints_path);
        try {
          if (j.contains("items")) {
            wc.items.clear();
            for (const auto& s : j.at("items")) wc.items.push_back(item_or_throw(s.get<std::string>()));
          }
          if (j.contains("demographics")) wc.demographics = j.at("demographics").get<bool>();
          if (j.contains("bounds")) {
            if (j.at("bounds").is_null())
              wc.bounds.reset();
            else
              wc.bounds = std::make_pair(j.at("bounds").at(0).get<double>(), j.at("bounds").at(1).get<double>());
          }
          if (j.contains("ridge"))
            for (const auto& [k, v] : j.at("ridge").items()) wc.ridge[k] = v.get<double>();
        } catch (const Json::exception& e) {
          throw Error(ErrorCode::MalformedInput, constraints_path + ": " + e.what());
        }
      }
      else {
        std::vector<Item> present;
        for (Item it : wc.items)
          if (bm.has_item(it)) present.push_back(it);
        wc.items = present;
      }
      const CalibrationProblem p = weight_calibration_problem(ds, bm, wc);
      const CalibrationResult res = solve_calibration(p);
      for (const auto& w : res.warnings) log(Level::warn, w);
      save_json(path_in(in.out_dir, "calibration.json"), calibration_diagnostics(p, res));
      std::ofstream f = open_out(path_in(in.out_dir, "weights.csv"));
      f << "id,d,d_star,a\n";
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        f << ds.households[i].id << ',' << format_exact(p.base_weights(r)) << ',' << format_exact(res.new_weights(r))
          << ',' << format_exact(res.factors(r)) << '\n';
      }
      return res.negative_weights ? kNumericalError : kOk;
    }

    if (sub == adjc) {
      const AdjustmentConfig cfg = adj.config();
      const SurveyDataset ds = in.load_survey_checked(log);
      const RichList rl = in.load_rich(log);
      const MacroBenchmarks bm = in.load_bm();
      const AdjustmentOutcome o = run_adjustment(ds, rl, bm, cfg);
      for (const auto& w : o.warnings) log(Level::warn, w);
      {
        std::ofstream f = open_out(path_in(in.out_dir, "adjusted.csv"));
        write_adjusted_csv(f, ds, o);
      }
      Json report = adjustment_report(o);
      report["method"] = std::string(to_string(cfg.method));
      save_json(path_in(in.out_dir, "trace.json"), report);
      IndicatorReport rep = compute_indicators(o.dataset, &bm);
      if (o.fit) rep.alpha_final = o.fit->alpha;
      save_json(path_in(in.out_dir, "indicators.json"), to_json(rep));
      log(Level::info, std::string(to_string(cfg.method)) + ": top 1% share " + std::to_string(rep.top_shares.at(0.01)));
      return kOk;
    }

    if (sub == ind) {
      const SurveyDataset ds = in.load_survey_checked(log);
      std::optional<MacroBenchmarks> bm;
      if (!in.benchmarks.empty()) bm = in.load_bm();
      IndicatorOptions opts;
      if (!rank_by.empty()) opts.rank_by = parse_wealth_concept(rank_by);
      const IndicatorReport rep = compute_indicators(ds, bm ? &*bm : nullptr, opts);
      save_json(path_in(in.out_dir, "indicators.json"), to_json(rep));
      if (lorenz) {
        std::ofstream f = open_out(path_in(in.out_dir, "lorenz.csv"));
        write_lorenz_csv(f, lorenz_curve(ds));
      }
      if (ccdf_above) {
        std::ofstream f = open_out(path_in(in.out_dir, "ccdf.csv"));
        write_ccdf_csv(f, ccdf_points(ds, *ccdf_above));
      }
      return kOk;
    }

    if (sub == boot) {
      const AdjustmentConfig cfg = adj.config();
      const SurveyDataset ds = in.load_survey_checked(log);
      const RichList rl = in.load_rich(log);
      const MacroBenchmarks bm = in.load_bm();
      ReplicateWeights reps;
      if (!replicate_path.empty()) {
        require_file(replicate_path, "replicate-weight");
        reps = load_replicate_weights(replicate_path, ds);
      } else {
        reps = generate_rao_wu(ds, replicates, boot_seed);
      }
      for (const auto& note : reps.validate(ds)) log(Level::warn, note);
      const BootstrapSummary s = bootstrap_run(ds, rl, bm, cfg, reps, threads);
      log(Level::info, std::to_string(s.successful) + " of " + std::to_string(s.replicates) + " replicates succeeded");
      save_json(path_in(in.out_dir, "bootstrap.json"), to_json(s));
      return kOk;
    }
  } catch (const Error& e) {
    log(Level::error, e.what());
    return is_input_error(e.code()) ? kUserError : kNumericalError;
  } catch (const std::invalid_argument& e) {
    log(Level::error, e.what());
    return kUserError;
  }
  return kUserError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace tailcal::cli
