#pragma once

// Experiment protocols built on the core modules: named prediction-set
// algorithms, hyperparameter tuning, repeated split comparison runs and the
// difficulty / set-size property experiment used to validate metrics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptcp/calibration.hpp"
#include "adaptcp/dataset.hpp"
#include "adaptcp/metrics.hpp"
#include "adaptcp/scores.hpp"

namespace adaptcp {

// ---------------------------------------------------------------------------
// Algorithms

/// O-LAC and O-SAPS are Mondrian calibration over ease bins with the LAC
/// and SAPS scores.
enum class AlgorithmKind { lac, aps, raps, saps, o_lac, o_saps };

std::string_view to_string(AlgorithmKind kind);
AlgorithmKind parse_algorithm(std::string_view name);
bool is_mondrian(AlgorithmKind kind);
bool needs_tuning(AlgorithmKind kind);
std::vector<AlgorithmKind> all_algorithms();

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::lac;
  double raps_lambda = 0.01;
  /// 0 derives k_reg from the ground-truth ranks of the fitting data.
  std::uint32_t raps_kreg = 0;
  double saps_w = 0.1;
  std::size_t bins = 10;
  /// Index of the ease variant used for Mondrian bins.
  std::size_t variant = 0;
  bool randomized = true;
  bool split_binning = false;
  std::size_t min_bin_count = 20;
};

/// One ease vector per transformation setting (e.g. noise severity).
struct EaseVariant {
  std::string name;
  std::vector<double> ease;
};

/// A classification dataset plus its ease variants. Variant 0 is the
/// reference ease used for evaluation binning.
struct ExperimentData {
  ScoreDataset data;
  std::vector<EaseVariant> variants;

  /// Wraps a dataset, taking its stored or computed ease as variant 0 if any.
  static ExperimentData from_dataset(ScoreDataset ds, std::string name = "default");
  std::span<const double> reference_ease() const;
};

ExperimentData subset(const ExperimentData& data, std::span<const std::size_t> indices);

/// The ceil((1-alpha) n)-th smallest ground-truth rank (at least 1).
std::uint32_t rank_quantile(std::span<const std::uint32_t> ranks, double alpha);

struct FittedAlgorithm {
  AlgorithmConfig config;
  ConformalModel model;
};

FittedAlgorithm fit_algorithm(const AlgorithmConfig& config, const ExperimentData& cal, const RankTable& table,
                              double alpha, std::uint64_t seed);
PredictionOutput predict_algorithm(const FittedAlgorithm& fitted, const ExperimentData& test,
                                   const RankTable& table);

// ---------------------------------------------------------------------------
// Tuning

struct TuneGrid {
  std::vector<std::size_t> bins{10, 20, 30};
  /// Ease variant indices to try; empty means every variant.
  std::vector<std::size_t> variants;
  std::vector<double> saps_w{0.0, 0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30,
                             0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65};
  std::vector<double> raps_lambda{0.001, 0.01, 0.1, 0.2, 0.5};
};

enum class TuneObjective { t_ss, sscv };

std::string_view to_string(TuneObjective objective);
/// T-SS for the ease-binned algorithms, SSCV for RAPS / SAPS.
TuneObjective default_objective(AlgorithmKind kind);

struct TuneOptions {
  double alpha = 0.1;
  std::size_t eval_bins = 50;
  bool randomized = true;
  std::size_t min_bin_count = 20;
  std::uint64_t seed = 0;
};

struct TunePoint {
  AlgorithmConfig config;
  double objective = 0.0;  ///< NaN when the point could not be fitted
};

struct TuneResult {
  AlgorithmConfig best;
  double objective = 0.0;
  TuneObjective kind = TuneObjective::t_ss;
  std::vector<TunePoint> points;
};

/// Exhaustive grid search: fit on `cal`, score the objective on `tune_set`.
/// Maximizes T-SS or minimizes SSCV; ties go to the smaller bin count, then
/// the smaller weight.
TuneResult tune(AlgorithmKind family, const ExperimentData& cal, const ExperimentData& tune_set,
                const TuneGrid& grid, TuneObjective objective, const TuneOptions& options);

// ---------------------------------------------------------------------------
// Repeated comparison runs

struct SplitPlan {
  std::vector<std::size_t> calibration;  ///< first half of validation
  std::vector<std::size_t> tuning;       ///< second half of validation
  std::vector<std::size_t> validation;   ///< calibration followed by tuning
  std::vector<std::size_t> test;
};

SplitPlan make_split_plan(std::size_t n_total, std::size_t n_val, std::size_t n_test, std::uint64_t seed,
                          std::size_t repeat);

struct RunMetrics {
  double coverage = 0.0;
  double avg_size = 0.0;
  double t_cv = 0.0;
  double t_ss = 0.0;
  double sscv = 0.0;
  double escv = 0.0;
  double deficit = 0.0;
  double excess = 0.0;
};

struct CompareConfig {
  std::vector<AlgorithmKind> algorithms = all_algorithms();
  std::vector<double> alphas{0.1};
  std::size_t repeats = 1;
  std::size_t n_val = 20000;
  std::size_t n_test = 20000;
  std::size_t eval_bins = 50;
  TuneGrid grid;
  bool randomized = true;
  std::size_t min_bin_count = 20;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct CompareRow {
  AlgorithmKind algorithm = AlgorithmKind::lac;
  double alpha = 0.1;
  RunMetrics median;
  std::vector<RunMetrics> repeats;
  std::vector<AlgorithmConfig> chosen;  ///< per repeat, after tuning
};

struct CompareReport {
  std::vector<CompareRow> rows;  ///< ordered by alpha, then algorithm
};

CompareReport compare_run(const ExperimentData& data, const CompareConfig& config);

/// Per-metric medians of a set of runs.
RunMetrics median_metrics(std::span<const RunMetrics> runs);

// ---------------------------------------------------------------------------
// Property experiment

struct PropertyConfig {
  std::size_t trials = 50;        ///< R
  std::size_t trial_size = 1000;  ///< M
  std::size_t subset_size = 50;   ///< m
  std::size_t draws = 1000;       ///< T
  bool overlap = false;           ///< draw the two subsets independently
  double alpha = 0.1;
  std::size_t eval_bins = 50;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  /// R = 1000, M = 2000, m = 100, T = 10000.
  static PropertyConfig full_scale();
};

/// Fraction of T draws of two size-m subsets whose mean-difficulty order and
/// mean-size order do not strictly disagree (ties count as agreement).
double property_satisfaction_rate(std::span<const double> difficulty, std::span<const double> sizes,
                                  std::size_t m, std::size_t draws, std::uint64_t seed, bool overlap = false);

/// Metrics compared against the property satisfaction rate.
inline constexpr std::string_view kValidatedMetrics[] = {"deficit", "excess", "sscv", "escv", "t_ss"};

/// +1 when larger metric values should mean better adaptivity.
int expected_sign(std::string_view metric);

struct MetricCorrelation {
  std::string metric;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t rank = 0;  ///< 1 = strongest correlation in the expected direction
};

struct AlgorithmValidation {
  AlgorithmKind algorithm = AlgorithmKind::lac;
  std::vector<double> rates;                  ///< per trial
  std::vector<std::vector<double>> metrics;   ///< [metric][trial]
  std::vector<MetricCorrelation> correlations;
};

struct ValidationReport {
  std::vector<AlgorithmValidation> algorithms;
  /// Per metric: how often it placed 1st..5th, and its average place.
  std::vector<std::vector<std::size_t>> rank_counts;
  std::vector<double> average_rank;
};

/// Spearman correlation of metric values against satisfaction rates, NaN
/// when either side is constant.
Correlation correlate_with_rates(std::span<const double> rates, std::span<const double> values);

ValidationReport metric_validation(const ExperimentData& data, const std::vector<AlgorithmConfig>& algorithms,
                                   const PropertyConfig& config);

}  // namespace adaptcp
