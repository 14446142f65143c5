#pragma once

// Synthetic classifier / regressor outputs with a latent per-example
// difficulty that drives both the ground-truth rank and the instability of
// predictions under input transformation.

#include <cstddef>
#include <cstdint>

#include "adaptcp/dataset.hpp"

namespace adaptcp {

struct SynthConfig {
  std::size_t n = 20000;
  std::size_t k = 100;
  std::size_t l = 10;
  double target_accuracy = 0.8;
  /// Standard deviation of the latent difficulty.
  double difficulty_spread = 1.0;
  /// Scale of the logit perturbation applied to transformed copies.
  double noise_coupling = 1.0;
  std::uint64_t seed = 0;
  /// Keep the N x L x K transformed block; otherwise only ease is stored.
  bool keep_transformed = false;
};

/// Values are rounded to float32 so the dataset round-trips through CPS1
/// bit-exactly. The original softmax rows depend only on (seed, n, k,
/// target_accuracy, difficulty_spread): regenerating with another
/// noise_coupling yields an alternative ease for the same predictions.
ScoreDataset generate(const SynthConfig& config);

/// Margin added to the true-label logit at zero difficulty that yields
/// `target_accuracy` top-1 accuracy (estimated on a seeded pilot sample).
double calibrate_margin(const SynthConfig& config);

struct SynthRegressionConfig {
  std::size_t n = 20000;
  std::size_t l = 10;
  double difficulty_spread = 1.0;
  double noise_coupling = 1.0;
  std::uint64_t seed = 0;
  bool keep_transformed = false;
};

RegressionDataset generate_regression(const SynthRegressionConfig& config);

}  // namespace adaptcp
