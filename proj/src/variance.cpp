#include "tailcal/variance.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <unordered_map>

#include "tailcal/indicators.hpp"
#include "tailcal/numeric.hpp"

namespace tailcal {

namespace {

std::string trimmed(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct ReplicateResult {
  bool ok = false;
  std::map<std::string, double> values;
  std::string failure;
};

}  // namespace

std::vector<std::string> ReplicateWeights::validate(const SurveyDataset& ds) const {
  if (weights.rows() != static_cast<Eigen::Index>(ds.size()))
    throw Error(ErrorCode::InvalidArgument, "replicate weights need one row per household");
  if (weights.cols() < 1) throw Error(ErrorCode::InvalidArgument, "at least one replicate is required");
  if ((weights.array() < 0.0).any() || !weights.allFinite())
    throw Error(ErrorCode::InvalidArgument, "replicate weights must be finite and non-negative");
  std::vector<std::string> notes;
  const double base = ds.weights().sum();
  for (Eigen::Index r = 0; r < weights.cols(); ++r) {
    const double s = weights.col(r).sum();
    if (std::abs(s / base - 1.0) > 0.2)
      notes.push_back("replicate " + std::to_string(r + 1) + " weight sum is " + std::to_string(s / base) +
                      " times the original");
  }
  return notes;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (r + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ReplicateWeights generate_rao_wu(const SurveyDataset& ds, std::size_t R, std::uint64_t seed) {
  if (R < 1) throw Error(ErrorCode::InvalidArgument, "replicate count must be at least 1");
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "cannot build replicates of an empty dataset");
  const std::size_t n = ds.size();

  // stratum -> PSU list (first-appearance order); household -> PSU index
  std::map<std::string, std::vector<std::string>> strata;
  std::map<std::pair<std::string, std::string>, std::size_t> psu_index;
  std::vector<std::pair<std::string, std::size_t>> unit_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Household& h = ds.households[i];
    const std::string psu = h.psu.empty() ? "#" + h.id : h.psu;
    auto key = std::make_pair(h.stratum, psu);
    auto found = psu_index.find(key);
    if (found == psu_index.end()) {
      auto& list = strata[h.stratum];
      found = psu_index.emplace(key, list.size()).first;
      list.push_back(psu);
    }
    unit_of[i] = {h.stratum, found->second};
  }
  for (const auto& [name, psus] : strata)
    if (psus.size() < 2)
      throw Error(ErrorCode::SingletonStratum, "stratum '" + name + "' has a single PSU");

  ReplicateWeights reps;
  reps.seed = seed;
  reps.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(R));
  std::map<std::string, std::vector<double>> mult;
  for (std::size_t r = 0; r < R; ++r) {
    std::mt19937_64 rng(replicate_seed(seed, r));
    for (const auto& [name, psus] : strata) {
      const std::size_t nh = psus.size();
      auto& m = mult[name];
      m.assign(nh, 0.0);
      std::uniform_int_distribution<std::size_t> pick(0, nh - 1);
      for (std::size_t k = 0; k + 1 < nh; ++k) m[pick(rng)] += 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& [stratum, u] = unit_of[i];
      const double nh = static_cast<double>(strata[stratum].size());
      reps.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) =
          ds.households[i].weight * nh / (nh - 1.0) * mult[stratum][u];
    }
  }
  return reps;
}

ReplicateWeights read_replicate_weights(std::istream& in, const SurveyDataset& ds) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty replicate-weight file");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trimmed(h);
  std::optional<std::size_t> id_col;
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "id")
      id_col = k;
    else
      cols.push_back(k);
  }
  if (!id_col) throw Error(ErrorCode::MissingColumn, "replicate weights require an 'id' column");
  if (cols.empty()) throw Error(ErrorCode::MissingColumn, "replicate weights have no replicate columns");

  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < ds.size(); ++i) row_of.emplace(ds.households[i].id, i);

  ReplicateWeights reps;
  reps.weights = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(cols.size()),
                                           std::numeric_limits<double>::quiet_NaN());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trimmed(line).empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) throw RowError(ErrorCode::MalformedInput, row, "wrong number of fields");
    auto hit = row_of.find(trimmed(fields[*id_col]));
    if (hit == row_of.end()) throw RowError(ErrorCode::MalformedInput, row, "unknown household id");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string f = trimmed(fields[cols[c]]);
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size())
        throw RowError(ErrorCode::MalformedInput, row, "replicate weight '" + f + "' is not a number");
      reps.weights(static_cast<Eigen::Index>(hit->second), static_cast<Eigen::Index>(c)) = v;
    }
  }
  if (!reps.weights.allFinite()) throw Error(ErrorCode::MalformedInput, "replicate weights missing for some households");
  reps.validate(ds);
  return reps;
}

ReplicateWeights load_replicate_weights(const std::string& path, const SurveyDataset& ds) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open replicate-weight file '" + path + "'");
  return read_replicate_weights(in, ds);
}

void write_replicate_weights(std::ostream& out, const SurveyDataset& ds, const ReplicateWeights& reps) {
  out << "id";
  for (Eigen::Index r = 0; r < reps.replicates(); ++r) out << ",rep" << (r + 1);
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.households[i].id;
    for (Eigen::Index r = 0; r < reps.replicates(); ++r)
      out << ',' << format_exact(reps.weights(static_cast<Eigen::Index>(i), r));
    out << '\n';
  }
}

SurveyDataset replicate_dataset(const SurveyDataset& ds, const ReplicateWeights& reps, Eigen::Index r) {
  SurveyDataset out;
  out.demographic_vars = ds.demographic_vars;
  out.currency = ds.currency;
  out.wealth_concept = ds.wealth_concept;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double w = reps.weights(static_cast<Eigen::Index>(i), r);
    if (!(w > 0.0)) continue;
    out.households.push_back(ds.households[i]);
    out.households.back().weight = w;
  }
  return out;
}

std::map<std::string, double> bootstrap_indicators(const AdjustmentOutcome& out, const MacroBenchmarks& bm) {
  const IndicatorReport rep = compute_indicators(out.dataset, &bm);
  std::map<std::string, double> v;
  v["gini"] = rep.gini;
  for (const auto& [p, s] : rep.top_shares) v["top_" + std::to_string(static_cast<int>(std::lround(p * 100)))] = s;
  v["bottom_50"] = rep.bottom50_share;
  v["median"] = rep.median;
  v["mean"] = rep.mean;
  if (out.fit) v["alpha"] = out.fit->alpha;
  return v;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("TAILCAL_THREADS")) {
    const long k = std::strtol(env, nullptr, 10);
    if (k > 0) return static_cast<std::size_t>(k);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

BootstrapSummary bootstrap_run(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                               const AdjustmentConfig& cfg, const ReplicateWeights& reps, std::size_t threads) {
  cfg.validate();
  reps.validate(ds);
  const auto R = static_cast<std::size_t>(reps.replicates());
  std::vector<ReplicateResult> results(R);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < R; r = next++) {
      ReplicateResult& res = results[r];
      try {
        const SurveyDataset rep = replicate_dataset(ds, reps, static_cast<Eigen::Index>(r));
        res.values = bootstrap_indicators(run_adjustment(rep, rl, bm, cfg), bm);
        res.ok = true;
      } catch (const Error& e) {
        res.failure = e.what();
      }
    }
  };
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, R);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BootstrapSummary s;
  s.replicates = R;
  std::map<std::string, std::vector<double>> samples;
  for (std::size_t r = 0; r < R; ++r) {
    if (!results[r].ok) {
      ++s.discarded;
      s.failures.push_back("replicate " + std::to_string(r + 1) + ": " + results[r].failure);
      continue;
    }
    ++s.successful;
    for (const auto& [k, v] : results[r].values) samples[k].push_back(v);
  }
  if (s.successful == 0) throw Error(ErrorCode::AllReplicatesFailed, "every bootstrap replicate failed");

  for (auto& [k, xs] : samples) {
    IndicatorStats st;
    const double n = static_cast<double>(xs.size());
    st.mean = compensated_sum(xs) / n;
    if (xs.size() > 1) {
      CompensatedSum<double> ss;
      for (double x : xs) ss += (x - st.mean) * (x - st.mean);
      st.sd = std::sqrt(ss.value() / (n - 1.0));
    }
    st.cv = st.mean != 0.0 ? st.sd / std::abs(st.mean) : std::numeric_limits<double>::quiet_NaN();
    s.indicators[k] = st;
  }
  return s;
}

}  // namespace tailcal
