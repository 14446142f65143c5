#pragma once

// JSON documents for models and reports. Keys keep insertion order so the
// output is stable across runs; +inf thresholds are written as "inf".

#include <string>

#include "json.hpp"

#include "adaptcp/calibration.hpp"
#include "adaptcp/experiments.hpp"
#include "adaptcp/metrics.hpp"

namespace adaptcp {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "adaptcp";
inline constexpr const char* kToolVersion = "0.1.0";

Json tool_json();

Json to_json(const ScoreSpec& spec);
ScoreSpec spec_from_json(const Json& j);

/// {spec, alpha, mode, thresholds[], bin_edges[]}
Json to_json(const ConformalModel& model);
ConformalModel model_from_json(const Json& j);

Json to_json(const MetricReport& report);
Json to_json(const AlgorithmConfig& config);
Json to_json(const RunMetrics& metrics);
Json to_json(const CompareReport& report);
Json to_json(const TuneResult& result);
Json to_json(const ValidationReport& report);

/// Number, or null when NaN / infinite.
Json number_or_null(double v);

/// Flat CSV header and row for a metric report.
std::string metric_csv_header();
std::string metric_csv_row(const std::string& algorithm, const MetricReport& report);
std::string compare_csv(const CompareReport& report);
/// One row per alpha: T-CV per algorithm, then T-SS per algorithm.
std::string compare_table_csv(const CompareReport& report);

std::string format_number(double v);

}  // namespace adaptcp
