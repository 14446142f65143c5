#include "adaptcp/binning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "adaptcp/error.hpp"

namespace adaptcp {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("zero-norm probability vector in cosine similarity");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double exp_abs_similarity(double a, double b) { return std::exp(-std::abs(a - b)); }

std::vector<double> compute_ease(const ScoreDataset& ds) {
  if (!ds.has_transformed() || ds.l == 0) throw ValidationError("ease requires a transformed block (L >= 1)");
  std::vector<double> ease(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double acc = 0.0;
    for (std::size_t t = 0; t < ds.l; ++t) {
      try {
        acc += cosine_similarity(ds.row(i), ds.transformed_row(i, t));
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " (row " + std::to_string(i) + ")");
      }
    }
    ease[i] = std::clamp(acc / static_cast<double>(ds.l), 0.0, 1.0);
  }
  return ease;
}

std::vector<double> compute_ease(const RegressionDataset& ds) {
  if (!ds.has_transformed() || ds.l == 0) throw ValidationError("ease requires a transformed block (L >= 1)");
  std::vector<double> ease(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double acc = 0.0;
    for (double m : ds.transformed_row(i)) acc += exp_abs_similarity(ds.mu[i], m);
    ease[i] = std::clamp(acc / static_cast<double>(ds.l), 0.0, 1.0);
  }
  return ease;
}

std::vector<double> resolve_ease(const ScoreDataset& ds) {
  if (ds.has_ease()) return ds.ease;
  if (ds.has_transformed()) return compute_ease(ds);
  throw ValidationError("dataset has neither ease nor transformed predictions");
}

std::vector<double> resolve_ease(const RegressionDataset& ds) {
  if (ds.has_ease()) return ds.ease;
  if (ds.has_transformed()) return compute_ease(ds);
  throw ValidationError("dataset has neither ease nor transformed predictions");
}

BinModel t_binning(std::span<const double> ease, std::size_t bins) {
  const std::size_t n = ease.size();
  if (bins == 0) throw ValidationError("number of bins must be at least 1");
  if (bins > n) {
    throw ValidationError("more bins (" + std::to_string(bins) + ") than examples (" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ease[a] < ease[b]; });

  BinModel model;
  model.index_sets.resize(bins);
  model.lower.resize(bins);
  model.upper.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    // 0-based sorted positions [floor(bN/B), floor((b+1)N/B))
    const std::size_t first = b * n / bins;
    const std::size_t last = (b + 1) * n / bins;
    model.index_sets[b].assign(order.begin() + static_cast<std::ptrdiff_t>(first),
                               order.begin() + static_cast<std::ptrdiff_t>(last));
    model.lower[b] = b == 0 ? 0.0 : ease[order[first]];
  }
  for (std::size_t b = 0; b + 1 < bins; ++b) model.upper[b] = model.lower[b + 1];
  model.upper[bins - 1] = std::numeric_limits<double>::infinity();
  return model;
}

std::size_t assign_bin(const BinModel& model, double ease) {
  const std::size_t bins = model.bins();
  if (bins <= 1) return 0;
  // Interior edges lower[1..B-1] are non-decreasing; count those <= ease.
  auto it = std::upper_bound(model.lower.begin() + 1, model.lower.end(), ease);
  return static_cast<std::size_t>(it - (model.lower.begin() + 1));
}

BinModel bin_model_from_boundaries(std::span<const double> boundaries) {
  if (boundaries.size() < 2) throw ValidationError("bin edges need at least two boundaries");
  BinModel model;
  const std::size_t bins = boundaries.size() - 1;
  model.index_sets.resize(bins);
  model.lower.assign(boundaries.begin(), boundaries.end() - 1);
  model.upper.assign(boundaries.begin() + 1, boundaries.end());
  if (!std::is_sorted(boundaries.begin(), boundaries.end())) throw ValidationError("bin edges must be non-decreasing");
  return model;
}

std::vector<double> bin_boundaries(const BinModel& model) {
  std::vector<double> out(model.lower);
  out.push_back(model.upper.empty() ? std::numeric_limits<double>::infinity() : model.upper.back());
  return out;
}

}  // namespace adaptcp
