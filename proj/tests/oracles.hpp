#pragma once

// Brute-force reference implementations. Kept deliberately naive and
// independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

/// Conformal rank for alpha = a / denom, in exact integer arithmetic:
/// ceil((n+1)(denom-a)/denom), at least 1.
inline std::size_t rational_rank(std::size_t n, std::int64_t a, std::int64_t denom) {
  const std::int64_t num = static_cast<std::int64_t>(n + 1) * (denom - a);
  const std::int64_t r = (num + denom - 1) / denom;
  return static_cast<std::size_t>(std::max<std::int64_t>(1, r));
}

inline double sorted_quantile(std::vector<double> scores, std::size_t rank) {
  if (rank > scores.size()) return std::numeric_limits<double>::infinity();
  std::sort(scores.begin(), scores.end());
  return scores[rank - 1];
}

/// Classes by descending probability, ties by ascending index, via pairwise
/// comparison counting.
inline std::vector<std::size_t> rank_positions(const std::vector<double>& p) {
  const std::size_t k = p.size();
  std::vector<std::size_t> rank(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (p[i] > p[j] || (p[i] == p[j] && i < j)) ++ahead;
    }
    rank[j] = ahead + 1;
  }
  return rank;
}

inline double aps(const std::vector<double>& p, std::size_t j, double u) {
  const auto rank = rank_positions(p);
  std::vector<std::pair<std::size_t, double>> by_rank;
  for (std::size_t i = 0; i < p.size(); ++i) by_rank.push_back({rank[i], p[i]});
  std::sort(by_rank.begin(), by_rank.end());
  double s = 0.0;
  for (const auto& [r, pi] : by_rank) {
    if (r < rank[j]) s += pi;
  }
  return s + u * p[j];
}

inline double raps(const std::vector<double>& p, std::size_t j, double u, double lambda, double kreg) {
  const auto rank = rank_positions(p);
  return aps(p, j, u) + lambda * std::max(0.0, static_cast<double>(rank[j]) - kreg);
}

inline double saps(const std::vector<double>& p, std::size_t j, double u, double w) {
  const auto rank = rank_positions(p);
  const double pmax = *std::max_element(p.begin(), p.end());
  if (rank[j] == 1) return u * pmax;
  return pmax + w * (static_cast<double>(rank[j]) - 2.0 + u);
}

/// Least squares by normal equations, then the signed clipped R^2.
inline double signed_r2(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (x_const || y_const) return 0.0;
  const double a = (n * sxy - sx * sy) / det;
  const double c = (sy - a * sx) / n;
  const double ybar = sy / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += (y[i] - (a * x[i] + c)) * (y[i] - (a * x[i] + c));
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  const double r2 = std::max(0.0, 1.0 - ss_res / ss_tot);
  return (a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0)) * r2;
}

inline double group_coverage_gap(const std::vector<std::vector<std::size_t>>& groups,
                                 const std::vector<std::uint8_t>& covered, double alpha) {
  double worst = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    double c = 0;
    for (auto i : g) c += covered[i];
    worst = std::max(worst, std::abs(c / static_cast<double>(g.size()) - (1.0 - alpha)));
  }
  return worst;
}

inline double t_cv(const std::vector<std::vector<std::size_t>>& bins, const std::vector<std::uint8_t>& covered,
                   double alpha) {
  return group_coverage_gap(bins, covered, alpha);
}

inline double t_ss(const std::vector<std::vector<std::size_t>>& bins, const std::vector<double>& rank,
                   const std::vector<double>& size) {
  std::vector<double> r, s;
  for (const auto& b : bins) {
    double sr = 0, ss = 0;
    for (auto i : b) {
      sr += rank[i];
      ss += size[i];
    }
    r.push_back(sr / static_cast<double>(b.size()));
    s.push_back(ss / static_cast<double>(b.size()));
  }
  return signed_r2(r, s);
}

/// Strata given as inclusive [lo, hi] ranges; size 0 joins the stratum
/// holding 1.
inline double sscv(const std::vector<std::pair<std::size_t, std::size_t>>& strata,
                   const std::vector<double>& size, const std::vector<std::uint8_t>& covered, double alpha) {
  std::vector<std::vector<std::size_t>> groups(strata.size());
  for (std::size_t i = 0; i < size.size(); ++i) {
    const auto s = std::max<std::size_t>(1, static_cast<std::size_t>(size[i]));
    for (std::size_t g = 0; g < strata.size(); ++g) {
      if (strata[g].first <= s && s <= strata[g].second) {
        groups[g].push_back(i);
        break;
      }
    }
  }
  return group_coverage_gap(groups, covered, alpha);
}

inline double escv(const std::vector<double>& size, const std::vector<std::uint8_t>& covered, double alpha,
                   std::size_t min_count) {
  std::map<double, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < size.size(); ++i) by_size[size[i]].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [s, g] : by_size) {
    if (g.size() >= min_count) groups.push_back(g);
  }
  return group_coverage_gap(groups, covered, alpha);
}

inline std::pair<double, double> deficit_excess(const std::vector<std::uint32_t>& rank,
                                                const std::vector<double>& size,
                                                const std::vector<std::uint8_t>& covered) {
  double d = 0, e = 0;
  for (std::size_t i = 0; i < rank.size(); ++i) {
    const double r = rank[i];
    if (covered[i]) {
      e += std::max(0.0, size[i] - r);
    } else {
      d += std::max(0.0, r - size[i]);
    }
  }
  const double n = static_cast<double>(rank.size());
  return {d / n, e / n};
}

/// Average ranks by counting smaller and equal values.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      if (w < v[i]) ++less;
      if (w == v[i]) ++equal;
    }
    out[i] = less + (equal + 1.0) / 2.0;
  }
  return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

/// Kendall tau-b over all pairs.
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++tx;
      } else if (dy == 0) {
        ++ty;
      } else if ((dx > 0) == (dy > 0)) {
        ++conc;
      } else {
        ++disc;
      }
    }
  }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

/// Floor partition sizes: floor((b+1)N/B) - floor(bN/B).
inline std::vector<std::size_t> floor_partition(std::size_t n, std::size_t bins) {
  std::vector<std::size_t> sizes;
  for (std::size_t b = 0; b < bins; ++b) sizes.push_back((b + 1) * n / bins - b * n / bins);
  return sizes;
}

/// Random probability row with occasional exact ties.
inline std::vector<double> random_row(std::mt19937_64& eng, std::size_t k) {
  std::gamma_distribution<double> gamma(0.5, 1.0);
  std::bernoulli_distribution tie(0.2);
  std::vector<double> p(k);
  for (auto& v : p) v = gamma(eng) + 1e-6;
  if (k > 2 && tie(eng)) p[1] = p[0];
  if (k > 3 && tie(eng)) p[3] = p[2] = p[1];
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace oracle
