#include "adaptcp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "adaptcp/binning.hpp"
#include "adaptcp/error.hpp"
#include "adaptcp/random.hpp"

namespace adaptcp {

namespace {

// Drop of the true-label margin per unit of latent difficulty.
constexpr double kMarginSlope = 2.0;
// Scale of non-true-label logits.
constexpr double kLogitScale = 1.0;
constexpr std::size_t kPilotSize = 20000;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

void softmax(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (auto& p : out) p /= sum;
}

void round_to_float(std::span<double> v) {
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

void check_config(const SynthConfig& c) {
  if (c.n == 0) throw ValidationError("synth: n must be >= 1");
  if (c.k < 2) throw ValidationError("synth: k must be >= 2");
  if (c.l == 0) throw ValidationError("synth: l must be >= 1");
  if (!(c.difficulty_spread >= 0.0) || !(c.noise_coupling >= 0.0)) {
    throw ValidationError("synth: difficulty_spread and noise_coupling must be >= 0");
  }
  if (!(c.target_accuracy < 1.0) || !(c.target_accuracy > 1.0 / static_cast<double>(c.k))) {
    throw ValidationError("synth: target accuracy must lie in (1/K, 1) for K = " + std::to_string(c.k));
  }
}

}  // namespace

double calibrate_margin(const SynthConfig& config) {
  check_config(config);
  // Per pilot example: adjusted true logit minus the best competing logit,
  // before adding the margin. Accuracy(m) = P(gap + m > 0).
  std::vector<double> gap(kPilotSize);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < kPilotSize; ++i) {
    auto eng = keyed_engine({config.seed, streams::synth_pilot, i});
    const double d = config.difficulty_spread * normal(eng);
    const double true_logit = kLogitScale * normal(eng) - kMarginSlope * d;
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < config.k; ++j) best_other = std::max(best_other, kLogitScale * normal(eng));
    gap[i] = true_logit - best_other;
  }
  std::sort(gap.begin(), gap.end());
  // Smallest margin m with #{gap > -m} / P >= target.
  const auto wrong = static_cast<std::size_t>(std::floor((1.0 - config.target_accuracy) * kPilotSize));
  const std::size_t pos = std::min(wrong, kPilotSize - 1);
  return -gap[pos];
}

ScoreDataset generate(const SynthConfig& config) {
  check_config(config);
  const double margin = calibrate_margin(config);

  ScoreDataset ds;
  ds.n = config.n;
  ds.k = config.k;
  ds.probs.resize(config.n * config.k);
  ds.labels.resize(config.n);
  ds.ease.resize(config.n);
  if (config.keep_transformed) {
    ds.l = config.l;
    ds.transformed.resize(config.n * config.l * config.k);
  }

  std::vector<double> logits(config.k), noisy(config.k), moved(config.k);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < config.n; ++i) {
    auto eng = keyed_engine({config.seed, streams::synth_example, i});
    const double d = config.difficulty_spread * normal(eng);
    const auto y = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, config.k - 1)(eng));
    for (auto& z : logits) z = kLogitScale * normal(eng);
    logits[y] += margin - kMarginSlope * d;
    ds.labels[i] = y;

    std::span<double> row(ds.probs.data() + i * config.k, config.k);
    softmax(logits, row);
    round_to_float(row);

    // Transformed copies: logit noise growing with difficulty.
    auto teng = keyed_engine({config.seed, streams::synth_transform, i});
    const double scale = config.noise_coupling * softplus(d);
    double ease = 0.0;
    for (std::size_t t = 0; t < config.l; ++t) {
      for (std::size_t j = 0; j < config.k; ++j) noisy[j] = logits[j] + scale * normal(teng);
      softmax(noisy, moved);
      round_to_float(moved);
      ease += cosine_similarity(row, moved);
      if (config.keep_transformed) {
        std::copy(moved.begin(), moved.end(), ds.transformed.begin() + static_cast<std::ptrdiff_t>((i * config.l + t) * config.k));
      }
    }
    ds.ease[i] = static_cast<double>(static_cast<float>(std::clamp(ease / static_cast<double>(config.l), 0.0, 1.0)));
  }
  return ds;
}

RegressionDataset generate_regression(const SynthRegressionConfig& config) {
  if (config.n == 0 || config.l == 0) throw ValidationError("synth: n and l must be >= 1");
  if (!(config.difficulty_spread >= 0.0) || !(config.noise_coupling >= 0.0)) {
    throw ValidationError("synth: difficulty_spread and noise_coupling must be >= 0");
  }
  RegressionDataset ds;
  ds.n = config.n;
  ds.mu.resize(config.n);
  ds.sigma.resize(config.n);
  ds.targets.resize(config.n);
  ds.ease.resize(config.n);
  if (config.keep_transformed) {
    ds.l = config.l;
    ds.transformed_mu.resize(config.n * config.l);
  }
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < config.n; ++i) {
    auto eng = keyed_engine({config.seed, streams::synth_example, i});
    const double d = config.difficulty_spread * normal(eng);
    const double noise_sd = 0.5 * std::exp(0.5 * d);
    const auto mu = static_cast<float>(2.0 * normal(eng));
    ds.mu[i] = mu;
    ds.targets[i] = static_cast<float>(mu + noise_sd * normal(eng));
    ds.sigma[i] = static_cast<float>(noise_sd * std::exp(0.25 * normal(eng)));

    auto teng = keyed_engine({config.seed, streams::synth_transform, i});
    double ease = 0.0;
    for (std::size_t t = 0; t < config.l; ++t) {
      const auto moved = static_cast<float>(mu + config.noise_coupling * noise_sd * normal(teng));
      ease += exp_abs_similarity(mu, moved);
      if (config.keep_transformed) ds.transformed_mu[i * config.l + t] = moved;
    }
    ds.ease[i] = static_cast<float>(std::clamp(ease / static_cast<double>(config.l), 0.0, 1.0));
  }
  return ds;
}

}  // namespace adaptcp
