#pragma once

// Datasets, prediction outputs and the CPS1 / CSV file formats.
//
// All numeric payloads are held as double in memory. The binary format
// stores them as little-endian float32, so a dataset whose values are
// float-representable round-trips bit-exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace adaptcp {

/// Softmax outputs of a classifier plus ground-truth labels.
struct ScoreDataset {
  std::size_t n = 0;  ///< examples
  std::size_t k = 0;  ///< classes
  std::size_t l = 0;  ///< transformations per example (0 when absent)
  std::vector<double> probs;          ///< n*k, row-major
  std::vector<std::uint32_t> labels;  ///< n
  std::vector<double> transformed;    ///< n*l*k or empty
  std::vector<double> ease;           ///< n or empty

  bool has_transformed() const { return !transformed.empty(); }
  bool has_ease() const { return !ease.empty(); }

  std::span<const double> row(std::size_t i) const { return {probs.data() + i * k, k}; }
  std::span<const double> transformed_row(std::size_t i, std::size_t t) const {
    return {transformed.data() + (i * l + t) * k, k};
  }

  bool operator==(const ScoreDataset&) const = default;
};

/// Gaussian regression outputs (predicted mean and std-dev) plus targets.
struct RegressionDataset {
  std::size_t n = 0;
  std::size_t l = 0;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> targets;
  std::vector<double> transformed_mu;  ///< n*l or empty
  std::vector<double> ease;            ///< n or empty

  bool has_transformed() const { return !transformed_mu.empty(); }
  bool has_ease() const { return !ease.empty(); }

  std::span<const double> transformed_row(std::size_t i) const {
    return {transformed_mu.data() + i * l, l};
  }

  bool operator==(const RegressionDataset&) const = default;
};

using Dataset = std::variant<ScoreDataset, RegressionDataset>;

enum class FileFormat { binary, csv };

/// Row sums must match 1 within this tolerance (extractors emit float32).
inline constexpr double kNormalizationTolerance = 1e-4;
/// Stored ease must match the ease recomputed from transformed rows.
inline constexpr double kEaseConsistencyTolerance = 1e-6;

void validate(const ScoreDataset& ds);
void validate(const RegressionDataset& ds);
void validate(const Dataset& ds);

/// `.csv` selects CSV, anything else CPS1.
FileFormat format_from_path(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, FileFormat format);
Dataset load_dataset(const std::filesystem::path& path);
ScoreDataset load_score_dataset(const std::filesystem::path& path);

void write_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Rows `indices` of `ds`, in the given order.
ScoreDataset subset(const ScoreDataset& ds, std::span<const std::size_t> indices);
RegressionDataset subset(const RegressionDataset& ds, std::span<const std::size_t> indices);

/// Rounds every stored value to float32 precision.
void quantize_to_float(ScoreDataset& ds);
void quantize_to_float(RegressionDataset& ds);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

/// Per-example prediction sets (classification) or intervals (regression).
struct PredictionOutput {
  std::vector<std::vector<std::uint32_t>> sets;  ///< sorted class indices
  std::vector<Interval> intervals;
  std::vector<std::uint8_t> covered;
  std::vector<double> size;       ///< |C(x)| or interval width
  std::vector<std::uint32_t> bin; ///< calibration group used (0 for split CP)

  std::size_t n() const { return covered.size(); }
  bool is_regression() const { return !intervals.empty(); }
  double coverage() const;
  double average_size() const;
};

}  // namespace adaptcp
