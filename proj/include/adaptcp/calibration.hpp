#pragma once

// Split-conformal and Mondrian (per-ease-bin) calibration.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "adaptcp/binning.hpp"
#include "adaptcp/dataset.hpp"
#include "adaptcp/scores.hpp"

namespace adaptcp {

enum class CalibrationMode { global, mondrian };

struct ConformalModel {
  ScoreSpec spec;
  double alpha = 0.1;
  CalibrationMode mode = CalibrationMode::global;
  /// One entry for split CP, one per bin for Mondrian. May hold +inf.
  std::vector<double> thresholds;
  /// Mondrian only. Test points are placed with assign_bin.
  std::optional<BinModel> bins;
};

struct MondrianOptions {
  std::size_t bins = 10;
  /// Fit the bins on the first half of the calibration data and the
  /// thresholds on the second half.
  bool split_binning = false;
  std::size_t min_bin_count = 20;
};

/// 1-based order statistic used as the conformal threshold:
/// ceil((n+1)(1-alpha)). May exceed n, meaning an infinite threshold.
std::size_t conformal_rank(std::size_t n, double alpha);

/// The ceil((n+1)(1-alpha))-th smallest score, or +inf past the end.
double conformal_quantile(std::span<const double> scores, double alpha);

/// Scores of the true labels, using the calibration randomization stream.
std::vector<double> calibration_scores(const ScoreDataset& ds, const RankTable& table, const ScoreSpec& spec);
std::vector<double> calibration_scores(const RegressionDataset& ds, const ScoreSpec& spec);

ConformalModel fit_global(const ScoreDataset& ds, const ScoreSpec& spec, double alpha);
ConformalModel fit_global(const ScoreDataset& ds, const RankTable& table, const ScoreSpec& spec, double alpha);
ConformalModel fit_global(const RegressionDataset& ds, const ScoreSpec& spec, double alpha);

ConformalModel fit_mondrian(const ScoreDataset& ds, std::span<const double> ease, const ScoreSpec& spec,
                            double alpha, const MondrianOptions& options);
ConformalModel fit_mondrian(const ScoreDataset& ds, const RankTable& table, std::span<const double> ease,
                            const ScoreSpec& spec, double alpha, const MondrianOptions& options);
ConformalModel fit_mondrian(const RegressionDataset& ds, std::span<const double> ease, const ScoreSpec& spec,
                            double alpha, const MondrianOptions& options);

/// Builds sets for every example. `ease` is required for Mondrian models
/// and ignored otherwise.
PredictionOutput predict(const ConformalModel& model, const ScoreDataset& ds, std::span<const double> ease = {});
PredictionOutput predict(const ConformalModel& model, const ScoreDataset& ds, const RankTable& table,
                         std::span<const double> ease = {});
PredictionOutput predict(const ConformalModel& model, const RegressionDataset& ds,
                         std::span<const double> ease = {});

}  // namespace adaptcp
