#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "tailcal/adjust.hpp"
#include "tailcal/calib.hpp"
#include "tailcal/indicators.hpp"
#include "tailcal/pareto.hpp"
#include "tailcal/synth.hpp"
#include "tailcal/variance.hpp"

namespace tailcal {

using Json = nlohmann::json;

/// Nearest double to v printed with 12 significant digits.
double round12(double v);

/// Rounds every float in place; NaN and infinities become null.
void normalize(Json& j);

/// Normalized, 2-space indented, keys sorted, trailing newline.
std::string dump_json(Json j);
void save_json(const std::string& path, const Json& j);
Json load_json(const std::string& path);

Json to_json(const ParetoFit& fit);
Json to_json(const IndicatorReport& rep);
Json to_json(const TraceRecord& tr);
Json to_json(const BootstrapSummary& s);
Json to_json(const PopulationOracle& o);
Json to_json(const AdjustmentConfig& cfg);

/// Residuals, multipliers and factor quantiles of a calibration.
Json calibration_diagnostics(const CalibrationProblem& p, const CalibrationResult& res);

/// Trace, warnings, fit and convergence status of an adjustment run.
Json adjustment_report(const AdjustmentOutcome& out);

/// Adjusted dataset as survey CSV plus columns a (amount factor), d_star
/// (final weight) and d (weight before adjustment, empty for synthetic rows).
void write_adjusted_csv(std::ostream& out, const SurveyDataset& original, const AdjustmentOutcome& outcome);

void write_mean_excess_csv(std::ostream& out, const std::vector<MeanExcessPoint>& pts);
void write_lorenz_csv(std::ostream& out, const std::vector<LorenzPoint>& pts);
void write_ccdf_csv(std::ostream& out, const std::vector<CcdfPoint>& pts);

}  // namespace tailcal
