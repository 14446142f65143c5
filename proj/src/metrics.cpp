#include "adaptcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "adaptcp/binning.hpp"
#include "adaptcp/error.hpp"

namespace adaptcp {

namespace {

bool all_equal(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_same_length(std::span<const double> x, std::span<const double> y, std::size_t min_n) {
  if (x.size() != y.size()) throw ValidationError("paired inputs differ in length");
  if (x.size() < min_n) throw ValidationError("need at least " + std::to_string(min_n) + " points");
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Number of pairs i < j with v[i] > v[j]; sorts v.
std::uint64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, out = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          inversions += mid - i;
          buf[out++] = v[j++];
        } else {
          buf[out++] = v[i++];
        }
      }
      while (i < mid) buf[out++] = v[i++];
      while (j < hi) buf[out++] = v[j++];
    }
    v.swap(buf);
  }
  return inversions;
}

// Sum over runs of equal adjacent values of t(t-1)/2.
template <class Eq>
std::uint64_t tied_pairs(std::size_t n, Eq&& equal_to_prev) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal_to_prev(i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

}  // namespace

double signed_r2(std::span<const double> x, std::span<const double> y) {
  check_same_length(x, y, 2);
  if (all_equal(x) || all_equal(y)) return 0.0;
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (slope * x[i] + intercept);
    ss_res += r * r;
  }
  const double r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  if (slope > 0.0) return r2;
  if (slope < 0.0) return -r2;
  return 0.0;
}

std::vector<BinStats> bin_stats(const PredictionOutput& output, std::span<const double> difficulty,
                                const BinIndexSets& bins) {
  std::vector<BinStats> stats(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    auto& s = stats[b];
    s.count = bins[b].size();
    if (s.count == 0) continue;
    double cov = 0.0, diff = 0.0, size = 0.0;
    for (auto i : bins[b]) {
      cov += output.covered[i];
      if (!difficulty.empty()) diff += difficulty[i];
      size += output.size[i];
    }
    const auto n = static_cast<double>(s.count);
    s.coverage = cov / n;
    s.mean_difficulty = diff / n;
    s.mean_size = size / n;
  }
  return stats;
}

double t_cv(const PredictionOutput& output, const BinIndexSets& bins, double alpha) {
  if (bins.empty()) throw ValidationError("T-CV needs at least one bin");
  double worst = 0.0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].empty()) throw ValidationError("T-CV: bin " + std::to_string(b) + " is empty");
    double cov = 0.0;
    for (auto i : bins[b]) cov += output.covered[i];
    worst = std::max(worst, std::abs(cov / static_cast<double>(bins[b].size()) - (1.0 - alpha)));
  }
  return worst;
}

double t_ss(const std::vector<BinStats>& stats) {
  if (stats.size() < 2) throw ValidationError("T-SS needs at least two bins");
  std::vector<double> difficulty, size;
  for (std::size_t b = 0; b < stats.size(); ++b) {
    if (stats[b].count == 0) throw ValidationError("T-SS: bin " + std::to_string(b) + " is empty");
    difficulty.push_back(stats[b].mean_difficulty);
    size.push_back(stats[b].mean_size);
  }
  return signed_r2(difficulty, size);
}

double t_ss(std::span<const double> difficulty, const PredictionOutput& output, const BinIndexSets& bins) {
  return t_ss(bin_stats(output, difficulty, bins));
}

std::vector<SizeStratum> default_strata(std::size_t k) {
  std::vector<SizeStratum> out;
  for (SizeStratum s : {SizeStratum{1, 1}, SizeStratum{2, 3}, SizeStratum{4, 10}, SizeStratum{11, 100},
                        SizeStratum{101, std::numeric_limits<std::size_t>::max()}}) {
    if (s.lo > k) break;
    s.hi = std::min(s.hi, k);
    out.push_back(s);
  }
  return out;
}

std::vector<SizeStratum> parse_strata(const std::string& text) {
  std::vector<SizeStratum> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      auto dash = item.find('-');
      SizeStratum s;
      if (dash == std::string::npos) {
        s.lo = s.hi = std::stoul(item);
      } else {
        s.lo = std::stoul(item.substr(0, dash));
        s.hi = std::stoul(item.substr(dash + 1));
      }
      if (s.hi < s.lo) throw ValidationError("stratum upper bound below lower bound: " + item);
      out.push_back(s);
    } catch (const std::logic_error&) {
      throw ValidationError("malformed size stratum: " + item);
    }
  }
  if (out.empty()) throw ValidationError("no size strata given");
  return out;
}

double sscv(const PredictionOutput& output, double alpha, std::span<const SizeStratum> strata) {
  std::vector<double> covered(strata.size(), 0.0), count(strata.size(), 0.0);
  for (std::size_t i = 0; i < output.n(); ++i) {
    const auto size = std::max<std::size_t>(1, static_cast<std::size_t>(output.size[i]));
    for (std::size_t s = 0; s < strata.size(); ++s) {
      if (strata[s].lo <= size && size <= strata[s].hi) {
        covered[s] += output.covered[i];
        count[s] += 1.0;
        break;
      }
    }
  }
  double worst = -1.0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    if (count[s] > 0) worst = std::max(worst, std::abs(covered[s] / count[s] - (1.0 - alpha)));
  }
  if (worst < 0.0) throw ValidationError("SSCV: every size stratum is empty");
  return worst;
}

double escv(const PredictionOutput& output, double alpha, std::size_t min_count) {
  std::map<std::size_t, std::pair<double, double>> groups;  // size -> (covered, count)
  for (std::size_t i = 0; i < output.n(); ++i) {
    auto& g = groups[static_cast<std::size_t>(output.size[i])];
    g.first += output.covered[i];
    g.second += 1.0;
  }
  double worst = -1.0;
  for (const auto& [size, g] : groups) {
    if (g.second >= static_cast<double>(std::max<std::size_t>(1, min_count))) {
      worst = std::max(worst, std::abs(g.first / g.second - (1.0 - alpha)));
    }
  }
  if (worst < 0.0) throw ValidationError("ESCV: no set size reaches the minimum group count");
  return worst;
}

DeficitExcess deficit_excess(std::span<const std::uint32_t> gt_ranks, const PredictionOutput& output) {
  if (gt_ranks.size() != output.n()) throw ValidationError("rank count does not match prediction count");
  if (output.n() == 0) return {};
  double deficit = 0.0, excess = 0.0;
  for (std::size_t i = 0; i < output.n(); ++i) {
    const double rank = gt_ranks[i];
    const double size = output.size[i];
    if (output.covered[i]) {
      excess += std::max(0.0, size - rank);
    } else {
      deficit += std::max(0.0, rank - size);
    }
  }
  const auto n = static_cast<double>(output.n());
  return {deficit / n, excess / n};
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t start = 0; start < idx.size();) {
    std::size_t end = start + 1;
    while (end < idx.size() && v[idx[end]] == v[idx[start]]) ++end;
    const double avg = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t t = start; t < end; ++t) ranks[idx[t]] = avg;
    start = end;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_same_length(x, y, 2);
  if (all_equal(x) || all_equal(y)) throw ValidationError("Spearman correlation undefined for constant input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  Correlation c;
  c.rho = pearson(rx, ry);
  const auto n = static_cast<double>(x.size());
  if (x.size() < 3) {
    c.p_value = std::numeric_limits<double>::quiet_NaN();
  } else if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.rho * std::sqrt((n - 2.0) / (1.0 - c.rho * c.rho));
    boost::math::students_t dist(n - 2.0);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_same_length(x, y, 2);
  if (all_equal(x) || all_equal(y)) throw ValidationError("Kendall tau undefined for constant input");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  const std::uint64_t x_ties = tied_pairs(n, [&](std::size_t i) { return x[idx[i]] == x[idx[i - 1]]; });
  const std::uint64_t joint_ties =
      tied_pairs(n, [&](std::size_t i) { return x[idx[i]] == x[idx[i - 1]] && y[idx[i]] == y[idx[i - 1]]; });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const std::uint64_t discordant = count_inversions(ys);
  const std::uint64_t y_ties = tied_pairs(n, [&](std::size_t i) { return ys[i] == ys[i - 1]; });
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  // concordant - discordant = total - x_ties - y_ties + joint_ties - 2 * discordant
  const double numerator = static_cast<double>(total) - static_cast<double>(x_ties) - static_cast<double>(y_ties) +
                           static_cast<double>(joint_ties) - 2.0 * static_cast<double>(discordant);
  const double denom = std::sqrt(static_cast<double>(total - x_ties) * static_cast<double>(total - y_ties));
  return std::clamp(numerator / denom, -1.0, 1.0);
}

double median(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

MetricReport evaluate(const ScoreDataset& ds, std::span<const std::uint32_t> gt_ranks,
                      const PredictionOutput& output, std::span<const double> ease,
                      const EvaluationOptions& options) {
  if (output.n() != ds.n) throw ValidationError("prediction count does not match dataset size");
  MetricReport r;
  r.alpha = options.alpha;
  r.coverage = output.coverage();
  r.avg_size = output.average_size();
  auto de = deficit_excess(gt_ranks, output);
  r.deficit = de.deficit;
  r.excess = de.excess;
  const auto strata = options.strata.empty() ? default_strata(ds.k) : options.strata;
  r.sscv = sscv(output, options.alpha, strata);
  r.escv = escv(output, options.alpha, options.escv_min_count);
  if (!ease.empty()) {
    if (ease.size() != ds.n) throw ValidationError("ease length does not match dataset size");
    const std::size_t bins = std::min(options.eval_bins, ds.n);
    auto model = t_binning(ease, bins);
    std::vector<double> difficulty(gt_ranks.begin(), gt_ranks.end());
    r.eval_bins = bins;
    r.bins = bin_stats(output, difficulty, model.index_sets);
    r.t_cv = t_cv(output, model.index_sets, options.alpha);
    if (bins >= 2) r.t_ss = t_ss(r.bins);
  }
  return r;
}

MetricReport evaluate(const RegressionDataset& ds, const PredictionOutput& output, std::span<const double> ease,
                      const EvaluationOptions& options) {
  if (output.n() != ds.n) throw ValidationError("prediction count does not match dataset size");
  MetricReport r;
  r.alpha = options.alpha;
  r.coverage = output.coverage();
  r.avg_size = output.average_size();
  std::vector<double> abs_error(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) abs_error[i] = std::abs(ds.targets[i] - ds.mu[i]);
  if (ds.n >= 2 && std::all_of(output.size.begin(), output.size.end(), [](double w) { return std::isfinite(w); })) {
    r.width_error_r2 = signed_r2(output.size, abs_error);
    if (!all_equal(output.size) && !all_equal(abs_error)) r.width_error_tau = kendall_tau(output.size, abs_error);
  }
  if (!ease.empty()) {
    if (ease.size() != ds.n) throw ValidationError("ease length does not match dataset size");
    const std::size_t bins = std::min(options.eval_bins, ds.n);
    auto model = t_binning(ease, bins);
    r.eval_bins = bins;
    r.bins = bin_stats(output, abs_error, model.index_sets);
    r.t_cv = t_cv(output, model.index_sets, options.alpha);
    if (bins >= 2) r.t_ss = t_ss(r.bins);
  }
  return r;
}

}  // namespace adaptcp
