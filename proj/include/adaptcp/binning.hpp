#pragma once

// Transformation-based ease and uniform-mass binning.
//
// Ease of an example is the mean similarity between the model's output on the
// original input and on each transformed copy: cosine similarity of softmax
// vectors for classification, exp(-|mu - mu'|) for regression. Sorting by ease
// and cutting the order at floor(b*N/B) yields B near-equal-count bins, each
// with a half-open edge interval [lower, upper) used to place unseen points.

#include <cstddef>
#include <span>
#include <vector>

#include "adaptcp/dataset.hpp"

namespace adaptcp {

/// Cosine similarity of two non-negative vectors. Throws on a zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// exp(-|a - b|).
double exp_abs_similarity(double a, double b);

std::vector<double> compute_ease(const ScoreDataset& ds);
std::vector<double> compute_ease(const RegressionDataset& ds);

/// Stored ease if present, otherwise computed from the transformed block.
/// Throws ValidationError when neither is available.
std::vector<double> resolve_ease(const ScoreDataset& ds);
std::vector<double> resolve_ease(const RegressionDataset& ds);

struct BinModel {
  /// Indices into the binned sample, per bin, in ascending ease order.
  std::vector<std::vector<std::size_t>> index_sets;
  /// Edge intervals [lower[b], upper[b]); lower[0] = 0, upper[B-1] = +inf.
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t bins() const { return lower.size(); }
};

/// Uniform-mass binning of `ease` into `bins` groups. Ties in ease are
/// ordered by index. Requires 1 <= bins <= ease.size().
BinModel t_binning(std::span<const double> ease, std::size_t bins);

/// 0-based bin whose edge interval contains `ease`; values below the first
/// edge go to bin 0 and values past the last edge go to the last bin.
std::size_t assign_bin(const BinModel& model, double ease);

/// Rebuilds the edge-only part of a BinModel from B+1 boundaries.
BinModel bin_model_from_boundaries(std::span<const double> boundaries);
/// B+1 boundaries: lower[0..B-1] followed by upper[B-1].
std::vector<double> bin_boundaries(const BinModel& model);

}  // namespace adaptcp
