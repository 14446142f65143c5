#pragma once

// Evaluation metrics for prediction sets and intervals.
//
// T-CV and T-SS are computed over ease bins of the evaluated sample:
//   T-CV = max_b | coverage(I_b) - (1 - alpha) |
//   T-SS = signed R^2 of per-bin mean set size regressed on per-bin mean
//          difficulty (ground-truth rank, or absolute error for regression)
// SSCV / ESCV take the same worst-case deviation over set-size strata and
// exact set sizes. Deficit / Excess count classes missing / removable in
// softmax order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptcp/dataset.hpp"

namespace adaptcp {

using BinIndexSets = std::vector<std::vector<std::size_t>>;

/// sign(slope) * max(0, 1 - SS_res / SS_tot) of the OLS fit y ~ a x + c.
/// Returns 0 when x or y has zero variance.
double signed_r2(std::span<const double> x, std::span<const double> y);

struct BinStats {
  std::size_t count = 0;
  double coverage = 0.0;
  double mean_difficulty = 0.0;  ///< mean ground-truth rank, or mean |error|
  double mean_size = 0.0;        ///< mean set size, or mean interval width
};

std::vector<BinStats> bin_stats(const PredictionOutput& output, std::span<const double> difficulty,
                                const BinIndexSets& bins);

double t_cv(const PredictionOutput& output, const BinIndexSets& bins, double alpha);
double t_ss(std::span<const double> difficulty, const PredictionOutput& output, const BinIndexSets& bins);
double t_ss(const std::vector<BinStats>& stats);

/// Inclusive set-size range.
struct SizeStratum {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

/// {1}, {2-3}, {4-10}, {11-100}, {101-K}; size-0 sets count toward {1}.
/// Strata beyond K are dropped.
std::vector<SizeStratum> default_strata(std::size_t k);
/// Parses "1,2-3,4-10" style lists.
std::vector<SizeStratum> parse_strata(const std::string& text);

double sscv(const PredictionOutput& output, double alpha, std::span<const SizeStratum> strata);
double escv(const PredictionOutput& output, double alpha, std::size_t min_count = 1);

struct DeficitExcess {
  double deficit = 0.0;
  double excess = 0.0;
};

/// Per example: deficit = max(0, rank - |C|); excess = max(0, |C| - rank)
/// if covered, else 0. Returns the means.
DeficitExcess deficit_excess(std::span<const std::uint32_t> gt_ranks, const PredictionOutput& output);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Pearson correlation of average ranks; two-sided p-value from the
/// t-approximation with n-2 degrees of freedom (NaN when n < 3).
Correlation spearman(std::span<const double> x, std::span<const double> y);
/// Kendall tau-b, O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Average (fractional) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> v);

double median(std::vector<double> values);

struct MetricReport {
  double alpha = 0.1;
  std::size_t eval_bins = 0;
  double coverage = 0.0;
  double avg_size = 0.0;
  std::optional<double> t_cv;
  std::optional<double> t_ss;
  std::optional<double> sscv;
  std::optional<double> escv;
  std::optional<double> deficit;
  std::optional<double> excess;
  /// Regression only: signed R^2 and Kendall tau of |error| against width.
  std::optional<double> width_error_r2;
  std::optional<double> width_error_tau;
  std::vector<BinStats> bins;
};

struct EvaluationOptions {
  double alpha = 0.1;
  std::size_t eval_bins = 50;
  std::vector<SizeStratum> strata;  ///< empty selects default_strata(K)
  std::size_t escv_min_count = 1;
};

/// Full metric report for a classification run. `ease` may be empty, in
/// which case the bin-based metrics are left unset.
MetricReport evaluate(const ScoreDataset& ds, std::span<const std::uint32_t> gt_ranks,
                      const PredictionOutput& output, std::span<const double> ease,
                      const EvaluationOptions& options);
MetricReport evaluate(const RegressionDataset& ds, const PredictionOutput& output, std::span<const double> ease,
                      const EvaluationOptions& options);

}  // namespace adaptcp
