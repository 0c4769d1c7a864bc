#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "tailcal/cli.hpp"
#include "tailcal/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run tailcal_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = tailcal::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One synthetic dataset shared by every case.
const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("tailcal_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    const Run r = tailcal_run({"synth", "--out", (d / "data").string(), "--population", "30000", "--sample-size", "3000",
                               "--seed", "3", "--nonresponse-floor", "0.3", "--underreport", "deposits=0.8",
                               "shares=0.8", "--log-level", "warn"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> adjust_args(const std::string& out) {
  const fs::path data = workdir() / "data";
  return {"adjust",       "--survey",     (data / "survey.csv").string(), "--benchmarks",
          (data / "benchmarks.json").string(), "--rich-list", (data / "rich_list.csv").string(),
          "--out",        (workdir() / out).string(), "--comparable-items", "deposits", "shares",
          "--log-level",  "warn"};
}

}  // namespace

TEST_CASE("synth writes its files") {
  for (const char* f : {"population.csv", "survey.csv", "rich_list.csv", "benchmarks.json", "oracle.json", "config.json"})
    CHECK(fs::exists(workdir() / "data" / f));
  const auto oracle = tailcal::load_json((workdir() / "data" / "oracle.json").string());
  CHECK(oracle.contains("indicators"));
}

TEST_CASE("adjust end to end") {
  const Run r = tailcal_run(adjust_args("adj"));
  REQUIRE(r.code == 0);
  const fs::path out = workdir() / "adj";
  for (const char* f : {"adjusted.csv", "trace.json", "indicators.json", "config.json"}) CHECK(fs::exists(out / f));
  const auto trace = tailcal::load_json((out / "trace.json").string());
  CHECK(trace["method"] == "simultaneous");
  CHECK(trace["trace"].size() >= 1);
  CHECK(slurp(out / "adjusted.csv").find(",a,d,d_star\n") != std::string::npos);

  SUBCASE("a second run is byte identical") {
    REQUIRE(tailcal_run(adjust_args("adj2")).code == 0);
    CHECK(slurp(out / "trace.json") == slurp(workdir() / "adj2" / "trace.json"));
    CHECK(slurp(out / "indicators.json") == slurp(workdir() / "adj2" / "indicators.json"));
    CHECK(slurp(out / "adjusted.csv") == slurp(workdir() / "adj2" / "adjusted.csv"));
  }
  SUBCASE("the echoed config reproduces the run") {
    const Run again = tailcal_run({"adjust", "--config", (out / "config.json").string(), "--out",
                                   (workdir() / "adj3").string(), "--log-level", "warn"});
    REQUIRE(again.code == 0);
    CHECK(slurp(out / "trace.json") == slurp(workdir() / "adj3" / "trace.json"));
  }
}

TEST_CASE("config file values are honoured") {
  const fs::path cfg = workdir() / "pareto_cal.json";
  std::ofstream(cfg) << R"({"method": "pareto_cal", "max-iterations": 3})";
  std::vector<std::string> args = adjust_args("cfg");
  args.insert(args.begin() + 1, {"--config", cfg.string()});
  const Run r = tailcal_run(args);
  REQUIRE(r.code == 0);
  CHECK(tailcal::load_json((workdir() / "cfg" / "trace.json").string())["method"] == "pareto_cal");
  CHECK(tailcal::load_json((workdir() / "cfg" / "config.json").string())["max-iterations"] == 3);
}

TEST_CASE("other subcommands") {
  const fs::path data = workdir() / "data";
  SUBCASE("fit-pareto") {
    const Run r = tailcal_run({"fit-pareto", "--survey", (data / "survey.csv").string(), "--rich-list",
                               (data / "rich_list.csv").string(), "--out", (workdir() / "fit").string()});
    REQUIRE(r.code == 0);
    const auto fit = tailcal::load_json((workdir() / "fit" / "fit.json").string());
    CHECK(fit["alpha"].get<double>() > 1.0);
    CHECK(fs::exists(workdir() / "fit" / "mean_excess.csv"));
  }
  SUBCASE("calibrate") {
    const Run r = tailcal_run({"calibrate", "--survey", (data / "survey.csv").string(), "--benchmarks",
                               (data / "benchmarks.json").string(), "--out", (workdir() / "cal").string()});
    CHECK(r.code != 1);
    CHECK(fs::exists(workdir() / "cal" / "calibration.json"));
  }
  SUBCASE("indicators with curves") {
    const Run r = tailcal_run({"indicators", "--survey", (data / "survey.csv").string(), "--benchmarks",
                               (data / "benchmarks.json").string(), "--out", (workdir() / "ind").string(), "--lorenz",
                               "--ccdf-above", "1e6"});
    REQUIRE(r.code == 0);
    const auto ind = tailcal::load_json((workdir() / "ind" / "indicators.json").string());
    CHECK(ind["gini"].get<double>() > 0.3);
    CHECK(ind["coverage_ratios"]["deposits"].get<double>() < 0.9);
    CHECK(fs::exists(workdir() / "ind" / "lorenz.csv"));
    CHECK(fs::exists(workdir() / "ind" / "ccdf.csv"));
  }
  SUBCASE("bootstrap does not depend on the thread count") {
    auto boot = [&](const std::string& threads) {
      std::vector<std::string> args = adjust_args("boot" + threads);
      args[0] = "bootstrap";
      for (const char* a : {"--replicates", "8", "--seed", "5", "--threads"}) args.emplace_back(a);
      args.push_back(threads);
      REQUIRE(tailcal_run(args).code == 0);
      return slurp(workdir() / ("boot" + threads) / "bootstrap.json");
    };
    CHECK(boot("1") == boot("3"));
  }
}

TEST_CASE("exit codes") {
  const fs::path data = workdir() / "data";
  SUBCASE("missing benchmarks file") {
    std::vector<std::string> args = adjust_args("bad");
    args[4] = (workdir() / "nope.json").string();
    const Run r = tailcal_run(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("nope.json") != std::string::npos);
  }
  SUBCASE("empty survey") {
    const fs::path empty = workdir() / "empty.csv";
    std::ofstream(empty) << "id,weight,deposits,bonds,shares,mutual_funds,insurance_pensions,money_owed,"
                            "business_wealth,housing_wealth,liabilities\n";
    CHECK(tailcal_run({"indicators", "--survey", empty.string(), "--out", (workdir() / "e").string()}).code == 1);
  }
  SUBCASE("threshold above every household") {
    const Run r = tailcal_run({"fit-pareto", "--survey", (data / "survey.csv").string(), "--w0", "1e15", "--out",
                               (workdir() / "hi").string()});
    CHECK(r.code == 2);
  }
  SUBCASE("unknown method") {
    std::vector<std::string> args = adjust_args("m");
    args.insert(args.end(), {"--method", "magic"});
    CHECK(tailcal_run(args).code == 1);
  }
  SUBCASE("usage") {
    CHECK(tailcal_run({}).code == 1);
    CHECK(tailcal_run({"frobnicate"}).code == 1);
    const Run help = tailcal_run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("adjust") != std::string::npos);
  }
}
