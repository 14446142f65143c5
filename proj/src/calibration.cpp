#include "adaptcp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "adaptcp/error.hpp"
#include "adaptcp/random.hpp"

namespace adaptcp {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
}

void check_spec_matches(const ScoreSpec& spec, bool regression) {
  spec.check();
  if (is_regression(spec.kind) != regression) {
    throw ValidationError(std::string("score '") + std::string(to_string(spec.kind)) +
                          (regression ? "' cannot be used with a regression dataset"
                                      : "' cannot be used with a classification dataset"));
  }
}

struct Grouping {
  BinModel bins;
  std::vector<std::vector<std::size_t>> members;  // dataset indices per bin
};

// Bins the calibration sample per the Mondrian options. Without splitting,
// the index-based partition itself defines the groups; with splitting, the
// first half fixes the edges and the second half is grouped by edge lookup.
Grouping make_groups(std::span<const double> ease, std::size_t n, const MondrianOptions& options) {
  if (ease.size() != n) throw ValidationError("ease length does not match calibration dataset");
  Grouping g;
  if (!options.split_binning) {
    g.bins = t_binning(ease, options.bins);
    g.members = g.bins.index_sets;
  } else {
    const std::size_t half = n / 2;
    if (half == 0) throw ValidationError("split binning needs at least two calibration examples");
    g.bins = t_binning(ease.first(half), options.bins);
    g.members.assign(options.bins, {});
    for (std::size_t i = half; i < n; ++i) g.members[assign_bin(g.bins, ease[i])].push_back(i);
  }
  for (std::size_t b = 0; b < g.members.size(); ++b) {
    const std::size_t count = g.members[b].size();
    if (count == 0 || count < options.min_bin_count) {
      throw ValidationError("bin " + std::to_string(b) + " has " + std::to_string(count) +
                            " calibration examples (minimum " + std::to_string(std::max<std::size_t>(1, options.min_bin_count)) +
                            "); reduce the number of bins");
    }
  }
  return g;
}

ConformalModel mondrian_from_scores(std::span<const double> scores, Grouping groups, const ScoreSpec& spec,
                                    double alpha) {
  ConformalModel model{.spec = spec, .alpha = alpha, .mode = CalibrationMode::mondrian};
  std::vector<double> bucket;
  for (const auto& members : groups.members) {
    bucket.clear();
    for (auto i : members) bucket.push_back(scores[i]);
    model.thresholds.push_back(conformal_quantile(bucket, alpha));
  }
  model.bins = std::move(groups.bins);
  return model;
}

std::size_t threshold_index(const ConformalModel& model, std::span<const double> ease, std::size_t i) {
  if (model.mode == CalibrationMode::global) return 0;
  return assign_bin(*model.bins, ease[i]);
}

void check_model(const ConformalModel& model, std::span<const double> ease, std::size_t n) {
  if (model.thresholds.empty()) throw ValidationError("model has no thresholds");
  if (model.mode == CalibrationMode::mondrian) {
    if (!model.bins || model.bins->bins() != model.thresholds.size()) {
      throw ValidationError("Mondrian model needs one threshold per bin");
    }
    if (ease.size() != n) throw ValidationError("Mondrian prediction requires ease for every test example");
  }
}

}  // namespace

std::size_t conformal_rank(std::size_t n, double alpha) {
  check_alpha(alpha);
  const double x = static_cast<double>(n + 1) * (1.0 - alpha);
  // Absorb representation error so e.g. 10 * (1 - 0.1) is exactly rank 9.
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(x - 1e-9)));
}

double conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw ValidationError("conformal quantile of an empty score list");
  const std::size_t rank = conformal_rank(scores.size(), alpha);
  if (rank > scores.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> work(scores.begin(), scores.end());
  const std::size_t pos = rank - 1;
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(pos), work.end());
  return work[pos];
}

std::vector<double> calibration_scores(const ScoreDataset& ds, const RankTable& table, const ScoreSpec& spec) {
  check_spec_matches(spec, false);
  std::vector<double> out(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const auto y = ds.labels[i];
    out[i] = score(spec, ds.row(i), table.order(i), table.rank(i, y), y, draw_u(spec, streams::calibration_u, i, y));
  }
  return out;
}

std::vector<double> calibration_scores(const RegressionDataset& ds, const ScoreSpec& spec) {
  check_spec_matches(spec, true);
  std::vector<double> out(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) out[i] = regression_score(spec.kind, ds.mu[i], ds.sigma[i], ds.targets[i]);
  return out;
}

ConformalModel fit_global(const ScoreDataset& ds, const ScoreSpec& spec, double alpha) {
  return fit_global(ds, RankTable(ds), spec, alpha);
}

ConformalModel fit_global(const ScoreDataset& ds, const RankTable& table, const ScoreSpec& spec, double alpha) {
  check_alpha(alpha);
  auto scores = calibration_scores(ds, table, spec);
  return ConformalModel{.spec = spec, .alpha = alpha, .thresholds = {conformal_quantile(scores, alpha)}};
}

ConformalModel fit_global(const RegressionDataset& ds, const ScoreSpec& spec, double alpha) {
  check_alpha(alpha);
  auto scores = calibration_scores(ds, spec);
  return ConformalModel{.spec = spec, .alpha = alpha, .thresholds = {conformal_quantile(scores, alpha)}};
}

ConformalModel fit_mondrian(const ScoreDataset& ds, std::span<const double> ease, const ScoreSpec& spec,
                            double alpha, const MondrianOptions& options) {
  return fit_mondrian(ds, RankTable(ds), ease, spec, alpha, options);
}

ConformalModel fit_mondrian(const ScoreDataset& ds, const RankTable& table, std::span<const double> ease,
                            const ScoreSpec& spec, double alpha, const MondrianOptions& options) {
  check_alpha(alpha);
  auto groups = make_groups(ease, ds.n, options);
  auto scores = calibration_scores(ds, table, spec);
  return mondrian_from_scores(scores, std::move(groups), spec, alpha);
}

ConformalModel fit_mondrian(const RegressionDataset& ds, std::span<const double> ease, const ScoreSpec& spec,
                            double alpha, const MondrianOptions& options) {
  check_alpha(alpha);
  auto groups = make_groups(ease, ds.n, options);
  auto scores = calibration_scores(ds, spec);
  return mondrian_from_scores(scores, std::move(groups), spec, alpha);
}

PredictionOutput predict(const ConformalModel& model, const ScoreDataset& ds, std::span<const double> ease) {
  return predict(model, ds, RankTable(ds), ease);
}

PredictionOutput predict(const ConformalModel& model, const ScoreDataset& ds, const RankTable& table,
                         std::span<const double> ease) {
  check_spec_matches(model.spec, false);
  check_model(model, ease, ds.n);
  PredictionOutput out;
  out.sets.resize(ds.n);
  out.covered.resize(ds.n);
  out.size.resize(ds.n);
  out.bin.resize(ds.n);
  std::vector<double> u(ds.k, 1.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const std::size_t b = threshold_index(model, ease, i);
    if (model.spec.uses_randomization()) {
      for (std::size_t j = 0; j < ds.k; ++j) u[j] = draw_u(model.spec, streams::test_u, i, j);
    }
    out.sets[i] = prediction_set(model.spec, ds.row(i), table.order(i), model.thresholds[b], u);
    out.covered[i] = std::binary_search(out.sets[i].begin(), out.sets[i].end(), ds.labels[i]) ? 1 : 0;
    out.size[i] = static_cast<double>(out.sets[i].size());
    out.bin[i] = static_cast<std::uint32_t>(b);
  }
  return out;
}

PredictionOutput predict(const ConformalModel& model, const RegressionDataset& ds, std::span<const double> ease) {
  check_spec_matches(model.spec, true);
  check_model(model, ease, ds.n);
  PredictionOutput out;
  out.intervals.resize(ds.n);
  out.covered.resize(ds.n);
  out.size.resize(ds.n);
  out.bin.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const std::size_t b = threshold_index(model, ease, i);
    out.intervals[i] = regression_interval(model.spec.kind, ds.mu[i], ds.sigma[i], model.thresholds[b]);
    out.covered[i] = out.intervals[i].contains(ds.targets[i]) ? 1 : 0;
    out.size[i] = out.intervals[i].width();
    out.bin[i] = static_cast<std::uint32_t>(b);
  }
  return out;
}

}  // namespace adaptcp
