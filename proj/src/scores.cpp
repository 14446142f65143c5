#include "adaptcp/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "adaptcp/error.hpp"
#include "adaptcp/random.hpp"

namespace adaptcp {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::lac: return "lac";
    case ScoreKind::aps: return "aps";
    case ScoreKind::raps: return "raps";
    case ScoreKind::saps: return "saps";
    case ScoreKind::reg_cp: return "cp";
    case ScoreKind::reg_cpa: return "cpa";
  }
  return "?";
}

ScoreKind parse_score_kind(std::string_view name) {
  for (auto k : {ScoreKind::lac, ScoreKind::aps, ScoreKind::raps, ScoreKind::saps, ScoreKind::reg_cp,
                 ScoreKind::reg_cpa}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown score kind '" + std::string(name) + "'");
}

bool is_regression(ScoreKind kind) { return kind == ScoreKind::reg_cp || kind == ScoreKind::reg_cpa; }

void ScoreSpec::check() const {
  if (kind == ScoreKind::raps) {
    if (!raps_lambda || !raps_kreg) throw ValidationError("RAPS requires raps_lambda and raps_kreg");
    if (!(*raps_lambda >= 0.0) || !std::isfinite(*raps_lambda)) throw ValidationError("raps_lambda must be >= 0");
  }
  if (kind == ScoreKind::saps) {
    if (!saps_w) throw ValidationError("SAPS requires saps_w");
    if (!(*saps_w >= 0.0) || !std::isfinite(*saps_w)) throw ValidationError("saps_w must be >= 0");
  }
}

bool ScoreSpec::uses_randomization() const {
  return randomized && (kind == ScoreKind::aps || kind == ScoreKind::raps || kind == ScoreKind::saps);
}

ScoreSpec lac_spec() { return ScoreSpec{.kind = ScoreKind::lac, .randomized = false}; }

ScoreSpec aps_spec(bool randomized, std::uint64_t seed) {
  return ScoreSpec{.kind = ScoreKind::aps, .randomized = randomized, .seed = seed};
}

ScoreSpec raps_spec(double lambda, std::uint32_t kreg, bool randomized, std::uint64_t seed) {
  return ScoreSpec{.kind = ScoreKind::raps,
                   .raps_lambda = lambda,
                   .raps_kreg = kreg,
                   .randomized = randomized,
                   .seed = seed};
}

ScoreSpec saps_spec(double w, bool randomized, std::uint64_t seed) {
  return ScoreSpec{.kind = ScoreKind::saps, .saps_w = w, .randomized = randomized, .seed = seed};
}

std::vector<std::uint32_t> rank_order(std::span<const double> row) {
  std::vector<std::uint32_t> order(row.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return row[a] > row[b]; });
  return order;
}

RankTable::RankTable(const ScoreDataset& ds) : n_(ds.n), k_(ds.k), order_(ds.n * ds.k), rank_(ds.n * ds.k) {
  for (std::size_t i = 0; i < n_; ++i) {
    auto row = ds.row(i);
    auto* ord = order_.data() + i * k_;
    std::iota(ord, ord + k_, 0u);
    std::stable_sort(ord, ord + k_, [&](std::uint32_t a, std::uint32_t b) { return row[a] > row[b]; });
    for (std::size_t r = 0; r < k_; ++r) rank_[i * k_ + ord[r]] = static_cast<std::uint32_t>(r + 1);
  }
}

std::vector<std::uint32_t> ground_truth_ranks(const ScoreDataset& ds, const RankTable& table) {
  std::vector<std::uint32_t> out(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) out[i] = table.rank(i, ds.labels[i]);
  return out;
}

double draw_u(const ScoreSpec& spec, std::uint64_t stream, std::size_t example, std::size_t cls) {
  if (!spec.uses_randomization()) return 1.0;
  return uniform01({spec.seed, stream, example, cls});
}

double score(const ScoreSpec& spec, std::span<const double> row, std::span<const std::uint32_t> order,
             std::uint32_t rank_j, std::size_t j, double u) {
  if (!spec.randomized) u = 1.0;
  switch (spec.kind) {
    case ScoreKind::lac:
      return 1.0 - row[j];
    case ScoreKind::aps:
    case ScoreKind::raps: {
      double cum = 0.0;
      for (std::uint32_t r = 0; r + 1 < rank_j; ++r) cum += row[order[r]];
      double s = cum + u * row[j];
      if (spec.kind == ScoreKind::raps) {
        s += *spec.raps_lambda * std::max(0.0, static_cast<double>(rank_j) - static_cast<double>(*spec.raps_kreg));
      }
      return s;
    }
    case ScoreKind::saps: {
      const double p_max = row[order[0]];
      if (rank_j == 1) return u * p_max;
      return p_max + *spec.saps_w * (static_cast<double>(rank_j) - 2.0 + u);
    }
    case ScoreKind::reg_cp:
    case ScoreKind::reg_cpa:
      break;
  }
  throw ValidationError("regression score kind used on a probability row");
}

double score(const ScoreSpec& spec, std::span<const double> row, std::size_t j, double u) {
  spec.check();
  auto order = rank_order(row);
  std::uint32_t rank_j = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r] == j) rank_j = static_cast<std::uint32_t>(r + 1);
  }
  return score(spec, row, order, rank_j, j, u);
}

std::vector<std::uint32_t> prediction_set(const ScoreSpec& spec, std::span<const double> row,
                                          std::span<const std::uint32_t> order, double q,
                                          std::span<const double> u) {
  std::vector<std::uint32_t> set;
  if (q == std::numeric_limits<double>::infinity()) {
    set.resize(row.size());
    std::iota(set.begin(), set.end(), 0u);
    return set;
  }
  const double p_max = row[order[0]];
  double cum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::uint32_t j = order[r];
    const double uj = spec.randomized ? u[j] : 1.0;
    const auto rank_j = static_cast<double>(r + 1);
    double s = 0.0;
    switch (spec.kind) {
      case ScoreKind::lac:
        s = 1.0 - row[j];
        break;
      case ScoreKind::aps:
        s = cum + uj * row[j];
        break;
      case ScoreKind::raps:
        s = cum + uj * row[j];
        s += *spec.raps_lambda * std::max(0.0, rank_j - static_cast<double>(*spec.raps_kreg));
        break;
      case ScoreKind::saps:
        s = r == 0 ? uj * p_max : p_max + *spec.saps_w * (rank_j - 2.0 + uj);
        break;
      default:
        throw ValidationError("regression score kind used on a probability row");
    }
    cum += row[j];
    if (s <= q) set.push_back(j);
  }
  std::sort(set.begin(), set.end());
  return set;
}

std::vector<std::uint32_t> prediction_set(const ScoreSpec& spec, std::span<const double> row, double q,
                                          std::span<const double> u) {
  spec.check();
  auto order = rank_order(row);
  return prediction_set(spec, row, order, q, u);
}

double regression_score(ScoreKind kind, double mu, double sigma, double y) {
  if (kind == ScoreKind::reg_cp) return std::abs(mu - y);
  if (kind == ScoreKind::reg_cpa) {
    if (!(sigma > 0.0)) throw ValidationError("CP-A score requires sigma > 0");
    return std::abs(mu - y) / sigma;
  }
  throw ValidationError("classification score kind used on a regression example");
}

Interval regression_interval(ScoreKind kind, double mu, double sigma, double q) {
  double half = 0.0;
  if (kind == ScoreKind::reg_cp) {
    half = q;
  } else if (kind == ScoreKind::reg_cpa) {
    if (!(sigma > 0.0)) throw ValidationError("CP-A interval requires sigma > 0");
    half = q == std::numeric_limits<double>::infinity() ? q : q * sigma;
  } else {
    throw ValidationError("classification score kind used on a regression example");
  }
  half = std::max(half, 0.0);
  return {mu - half, mu + half};
}

}  // namespace adaptcp
