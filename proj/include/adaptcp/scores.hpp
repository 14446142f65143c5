#pragma once

// Non-conformity scores and set / interval construction.
//
// Classification scores (r(j) is the 1-based rank of class j in descending
// probability order, ties broken by ascending class index):
//   LAC   1 - p_j
//   APS   sum_{r(k) < r(j)} p_k + u * p_j
//   RAPS  APS + lambda * max(0, r(j) - k_reg)
//   SAPS  u * p_max                        if r(j) = 1
//         p_max + w * (r(j) - 2 + u)       otherwise
// Regression scores: CP |mu - y|, CP-A |mu - y| / sigma.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptcp/dataset.hpp"

namespace adaptcp {

enum class ScoreKind { lac, aps, raps, saps, reg_cp, reg_cpa };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view name);
bool is_regression(ScoreKind kind);

struct ScoreSpec {
  ScoreKind kind = ScoreKind::lac;
  std::optional<double> raps_lambda;
  std::optional<std::uint32_t> raps_kreg;
  std::optional<double> saps_w;
  bool randomized = true;
  std::uint64_t seed = 0;

  /// Throws ValidationError if a hyperparameter required by `kind` is unset
  /// or out of range.
  void check() const;
  /// u is drawn only for randomized APS-family scores.
  bool uses_randomization() const;

  bool operator==(const ScoreSpec&) const = default;
};

ScoreSpec lac_spec();
ScoreSpec aps_spec(bool randomized = true, std::uint64_t seed = 0);
ScoreSpec raps_spec(double lambda, std::uint32_t kreg, bool randomized = true, std::uint64_t seed = 0);
ScoreSpec saps_spec(double w, bool randomized = true, std::uint64_t seed = 0);

/// Per example: classes in descending probability order and the inverse map.
class RankTable {
 public:
  RankTable() = default;
  explicit RankTable(const ScoreDataset& ds);

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  /// Classes of example i, most probable first.
  std::span<const std::uint32_t> order(std::size_t i) const { return {order_.data() + i * k_, k_}; }
  /// 1-based rank of class j for example i.
  std::uint32_t rank(std::size_t i, std::size_t j) const { return rank_[i * k_ + j]; }

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint32_t> rank_;
};

/// Descending-probability order of one row (ties by class index).
std::vector<std::uint32_t> rank_order(std::span<const double> row);

/// 1-based ground-truth rank of every example.
std::vector<std::uint32_t> ground_truth_ranks(const ScoreDataset& ds, const RankTable& table);

/// Randomization draw for (example, class) in the given stream; 1 when the
/// spec is not randomized.
double draw_u(const ScoreSpec& spec, std::uint64_t stream, std::size_t example, std::size_t cls);

/// Score of class j given the row's rank order.
double score(const ScoreSpec& spec, std::span<const double> row, std::span<const std::uint32_t> order,
             std::uint32_t rank_j, std::size_t j, double u);
/// Score of class j; computes the rank order on the fly.
double score(const ScoreSpec& spec, std::span<const double> row, std::size_t j, double u);

/// {j : score(j) <= q}, ascending. `u` holds one draw per class.
std::vector<std::uint32_t> prediction_set(const ScoreSpec& spec, std::span<const double> row,
                                          std::span<const std::uint32_t> order, double q,
                                          std::span<const double> u);
std::vector<std::uint32_t> prediction_set(const ScoreSpec& spec, std::span<const double> row, double q,
                                          std::span<const double> u);

double regression_score(ScoreKind kind, double mu, double sigma, double y);
Interval regression_interval(ScoreKind kind, double mu, double sigma, double q);

}  // namespace adaptcp
