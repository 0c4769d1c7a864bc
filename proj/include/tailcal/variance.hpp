#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailcal/adjust.hpp"
#include "tailcal/dataset.hpp"

namespace tailcal {

/// One column per replicate, rows aligned with the dataset households.
struct ReplicateWeights {
  Eigen::MatrixXd weights;
  std::uint64_t seed = 0;

  Eigen::Index replicates() const { return weights.cols(); }
  /// Throws on shape mismatch or negative weights; replicates whose weight
  /// sum leaves the 20% band around the original sum are reported.
  std::vector<std::string> validate(const SurveyDataset& ds) const;
};

/// Counter-based stream seed for replicate r (splitmix64 of seed and r).
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r);

/// Rao-Wu rescaled bootstrap. Each stratum draws n_h - 1 of its n_h PSUs
/// with replacement; household weight becomes d_i n_h / (n_h - 1) m_i.
/// Empty psu labels make each household its own PSU; empty strata labels
/// form a single stratum.
ReplicateWeights generate_rao_wu(const SurveyDataset& ds, std::size_t R, std::uint64_t seed);

/// CSV with an "id" column and one numeric column per replicate.
ReplicateWeights read_replicate_weights(std::istream& in, const SurveyDataset& ds);
ReplicateWeights load_replicate_weights(const std::string& path, const SurveyDataset& ds);
void write_replicate_weights(std::ostream& out, const SurveyDataset& ds, const ReplicateWeights& reps);

/// Copy of `ds` carrying replicate r's weights; households with zero
/// replicate weight are dropped.
SurveyDataset replicate_dataset(const SurveyDataset& ds, const ReplicateWeights& reps, Eigen::Index r);

struct IndicatorStats {
  double mean = 0.0;
  double sd = 0.0;
  double cv = 0.0;  // NaN when the mean is zero
};

struct BootstrapSummary {
  std::map<std::string, IndicatorStats> indicators;
  std::size_t replicates = 0;
  std::size_t successful = 0;
  std::size_t discarded = 0;
  std::vector<std::string> failures;  // "replicate <r>: <reason>"
};

/// Indicators tracked per replicate, keyed as in BootstrapSummary.
std::map<std::string, double> bootstrap_indicators(const AdjustmentOutcome& out, const MacroBenchmarks& bm);

/// TAILCAL_THREADS if set and positive, else the hardware concurrency.
std::size_t default_thread_count();

/// Runs the configured adjustment on every replicate; replicates whose
/// adjustment throws are discarded. Results do not depend on `threads`.
BootstrapSummary bootstrap_run(const SurveyDataset& ds, const RichList& rl, const MacroBenchmarks& bm,
                               const AdjustmentConfig& cfg, const ReplicateWeights& reps,
                               std::size_t threads = 0);

}  // namespace tailcal
