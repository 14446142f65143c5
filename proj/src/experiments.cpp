#include "adaptcp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "adaptcp/binning.hpp"
#include "adaptcp/error.hpp"
#include "adaptcp/parallel.hpp"
#include "adaptcp/random.hpp"

namespace adaptcp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// First `count` entries of a seeded uniform permutation of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, std::mt19937_64& eng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t t = 0; t < count; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, n - 1);
    std::swap(idx[t], idx[pick(eng)]);
  }
  idx.resize(count);
  return idx;
}

std::vector<double> to_double(std::span<const std::uint32_t> v) { return {v.begin(), v.end()}; }

BinIndexSets evaluation_bins(std::span<const double> ease, std::size_t eval_bins) {
  if (ease.empty()) throw ValidationError("evaluation binning requires ease");
  return t_binning(ease, std::min(eval_bins, ease.size())).index_sets;
}

}  // namespace

// ---------------------------------------------------------------------------
// Algorithms

std::string_view to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::lac: return "lac";
    case AlgorithmKind::aps: return "aps";
    case AlgorithmKind::raps: return "raps";
    case AlgorithmKind::saps: return "saps";
    case AlgorithmKind::o_lac: return "o-lac";
    case AlgorithmKind::o_saps: return "o-saps";
  }
  return "?";
}

AlgorithmKind parse_algorithm(std::string_view name) {
  for (auto k : all_algorithms()) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

bool is_mondrian(AlgorithmKind kind) { return kind == AlgorithmKind::o_lac || kind == AlgorithmKind::o_saps; }

bool needs_tuning(AlgorithmKind kind) { return kind != AlgorithmKind::lac && kind != AlgorithmKind::aps; }

std::vector<AlgorithmKind> all_algorithms() {
  return {AlgorithmKind::lac, AlgorithmKind::aps, AlgorithmKind::raps,
          AlgorithmKind::saps, AlgorithmKind::o_lac, AlgorithmKind::o_saps};
}

ExperimentData ExperimentData::from_dataset(ScoreDataset ds, std::string name) {
  ExperimentData out;
  if (ds.has_ease() || ds.has_transformed()) out.variants.push_back({std::move(name), resolve_ease(ds)});
  out.data = std::move(ds);
  return out;
}

std::span<const double> ExperimentData::reference_ease() const {
  if (variants.empty()) return {};
  return variants.front().ease;
}

ExperimentData subset(const ExperimentData& data, std::span<const std::size_t> indices) {
  ExperimentData out;
  out.data = subset(data.data, indices);
  for (const auto& v : data.variants) {
    EaseVariant sub{v.name, {}};
    sub.ease.reserve(indices.size());
    for (auto i : indices) sub.ease.push_back(v.ease[i]);
    out.variants.push_back(std::move(sub));
  }
  return out;
}

std::uint32_t rank_quantile(std::span<const std::uint32_t> ranks, double alpha) {
  if (ranks.empty()) throw ValidationError("rank quantile of an empty list");
  std::vector<std::uint32_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  auto pos = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(sorted.size()) - 1e-9));
  pos = std::clamp<std::size_t>(pos, 1, sorted.size());
  return std::max<std::uint32_t>(1, sorted[pos - 1]);
}

FittedAlgorithm fit_algorithm(const AlgorithmConfig& config, const ExperimentData& cal, const RankTable& table,
                              double alpha, std::uint64_t seed) {
  FittedAlgorithm fitted{config, {}};
  ScoreSpec spec;
  switch (config.kind) {
    case AlgorithmKind::lac:
    case AlgorithmKind::o_lac:
      spec = lac_spec();
      break;
    case AlgorithmKind::aps:
      spec = aps_spec(config.randomized, seed);
      break;
    case AlgorithmKind::raps: {
      std::uint32_t kreg = config.raps_kreg;
      if (kreg == 0) kreg = rank_quantile(ground_truth_ranks(cal.data, table), alpha);
      fitted.config.raps_kreg = kreg;
      spec = raps_spec(config.raps_lambda, kreg, config.randomized, seed);
      break;
    }
    case AlgorithmKind::saps:
    case AlgorithmKind::o_saps:
      spec = saps_spec(config.saps_w, config.randomized, seed);
      break;
  }
  if (is_mondrian(config.kind)) {
    if (config.variant >= cal.variants.size()) {
      throw ValidationError("ease variant " + std::to_string(config.variant) + " not available");
    }
    MondrianOptions options{config.bins, config.split_binning, config.min_bin_count};
    fitted.model = fit_mondrian(cal.data, table, cal.variants[config.variant].ease, spec, alpha, options);
  } else {
    fitted.model = fit_global(cal.data, table, spec, alpha);
  }
  return fitted;
}

PredictionOutput predict_algorithm(const FittedAlgorithm& fitted, const ExperimentData& test,
                                   const RankTable& table) {
  if (!is_mondrian(fitted.config.kind)) return predict(fitted.model, test.data, table);
  if (fitted.config.variant >= test.variants.size()) {
    throw ValidationError("ease variant " + std::to_string(fitted.config.variant) + " not available on test data");
  }
  return predict(fitted.model, test.data, table, test.variants[fitted.config.variant].ease);
}

// ---------------------------------------------------------------------------
// Tuning

std::string_view to_string(TuneObjective objective) {
  return objective == TuneObjective::t_ss ? "t_ss" : "sscv";
}

TuneObjective default_objective(AlgorithmKind kind) {
  return is_mondrian(kind) ? TuneObjective::t_ss : TuneObjective::sscv;
}

TuneResult tune(AlgorithmKind family, const ExperimentData& cal, const ExperimentData& tune_set,
                const TuneGrid& grid, TuneObjective objective, const TuneOptions& options) {
  auto sorted = [](auto v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto bins = sorted(grid.bins);
  const auto weights = sorted(grid.saps_w);
  const auto lambdas = sorted(grid.raps_lambda);
  std::vector<std::size_t> variants = grid.variants;
  if (variants.empty()) {
    for (std::size_t v = 0; v < std::max<std::size_t>(1, cal.variants.size()); ++v) variants.push_back(v);
  }

  const RankTable cal_table(cal.data);
  const RankTable tune_table(tune_set.data);
  const auto tune_ranks = ground_truth_ranks(tune_set.data, tune_table);

  AlgorithmConfig base{.kind = family, .randomized = options.randomized, .min_bin_count = options.min_bin_count};
  std::vector<AlgorithmConfig> candidates;
  switch (family) {
    case AlgorithmKind::lac:
    case AlgorithmKind::aps:
      candidates.push_back(base);
      break;
    case AlgorithmKind::raps:
      base.raps_kreg = rank_quantile(tune_ranks, options.alpha);
      for (double lambda : lambdas) {
        auto c = base;
        c.raps_lambda = lambda;
        candidates.push_back(c);
      }
      break;
    case AlgorithmKind::saps:
      for (double w : weights) {
        auto c = base;
        c.saps_w = w;
        candidates.push_back(c);
      }
      break;
    case AlgorithmKind::o_lac:
      for (auto b : bins) {
        for (auto v : variants) {
          auto c = base;
          c.bins = b;
          c.variant = v;
          candidates.push_back(c);
        }
      }
      break;
    case AlgorithmKind::o_saps:
      for (auto b : bins) {
        for (double w : weights) {
          for (auto v : variants) {
            auto c = base;
            c.bins = b;
            c.saps_w = w;
            c.variant = v;
            candidates.push_back(c);
          }
        }
      }
      break;
  }
  if (candidates.empty()) throw ValidationError("tuning grid is empty");

  BinIndexSets tune_bins;
  if (objective == TuneObjective::t_ss) tune_bins = evaluation_bins(tune_set.reference_ease(), options.eval_bins);
  const auto tune_difficulty = to_double(tune_ranks);
  const auto strata = default_strata(tune_set.data.k);

  TuneResult result;
  result.kind = objective;
  bool found = false;
  for (const auto& candidate : candidates) {
    TunePoint point{candidate, kNaN};
    try {
      auto fitted = fit_algorithm(candidate, cal, cal_table, options.alpha, options.seed);
      point.config = fitted.config;
      auto out = predict_algorithm(fitted, tune_set, tune_table);
      point.objective = objective == TuneObjective::t_ss ? t_ss(tune_difficulty, out, tune_bins)
                                                         : sscv(out, options.alpha, strata);
    } catch (const ValidationError&) {
      // Infeasible point (e.g. a bin below the minimum count): skipped.
    }
    if (!std::isnan(point.objective)) {
      const bool better = !found || (objective == TuneObjective::t_ss ? point.objective > result.objective
                                                                      : point.objective < result.objective);
      if (better) {
        result.best = point.config;
        result.objective = point.objective;
        found = true;
      }
    }
    result.points.push_back(point);
  }
  if (!found) throw ValidationError("no tuning grid point could be fitted");
  return result;
}

// ---------------------------------------------------------------------------
// Comparison runs

SplitPlan make_split_plan(std::size_t n_total, std::size_t n_val, std::size_t n_test, std::uint64_t seed,
                          std::size_t repeat) {
  if (n_val < 2 || n_test < 1) throw ValidationError("split needs n_val >= 2 and n_test >= 1");
  if (n_val + n_test > n_total) {
    throw ValidationError("dataset too small: " + std::to_string(n_total) + " examples for n_val = " +
                          std::to_string(n_val) + " plus n_test = " + std::to_string(n_test));
  }
  auto eng = keyed_engine({seed, streams::split, repeat});
  auto perm = sample_without_replacement(n_total, n_val + n_test, eng);
  SplitPlan plan;
  plan.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  plan.calibration.assign(plan.validation.begin(), plan.validation.begin() + static_cast<std::ptrdiff_t>(n_val / 2));
  plan.tuning.assign(plan.validation.begin() + static_cast<std::ptrdiff_t>(n_val / 2), plan.validation.end());
  plan.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  return plan;
}

RunMetrics median_metrics(std::span<const RunMetrics> runs) {
  auto pick = [&](double RunMetrics::*field) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*field);
    return median(std::move(v));
  };
  return RunMetrics{pick(&RunMetrics::coverage), pick(&RunMetrics::avg_size), pick(&RunMetrics::t_cv),
                    pick(&RunMetrics::t_ss),     pick(&RunMetrics::sscv),     pick(&RunMetrics::escv),
                    pick(&RunMetrics::deficit),  pick(&RunMetrics::excess)};
}

CompareReport compare_run(const ExperimentData& data, const CompareConfig& config) {
  if (config.algorithms.empty()) throw ValidationError("no algorithms to compare");
  if (config.alphas.empty()) throw ValidationError("no alpha values given");
  if (config.repeats == 0) throw ValidationError("repeats must be >= 1");
  if (data.variants.empty()) throw ValidationError("comparison runs need ease for evaluation binning");
  // Fail fast on impossible split sizes before spawning work.
  make_split_plan(data.data.n, config.n_val, config.n_test, config.seed, 0);

  const std::size_t n_alg = config.algorithms.size();
  const std::size_t n_alpha = config.alphas.size();
  // results[repeat][alpha * n_alg + algorithm]
  std::vector<std::vector<RunMetrics>> results(config.repeats, std::vector<RunMetrics>(n_alpha * n_alg));
  std::vector<std::vector<AlgorithmConfig>> chosen(config.repeats, std::vector<AlgorithmConfig>(n_alpha * n_alg));

  parallel_for(config.repeats, config.threads, [&](std::size_t r) {
    const auto plan = make_split_plan(data.data.n, config.n_val, config.n_test, config.seed, r);
    const auto val = subset(data, plan.validation);
    const auto cal = subset(data, plan.calibration);
    const auto tune_set = subset(data, plan.tuning);
    const auto test = subset(data, plan.test);
    const RankTable val_table(val.data), cal_table(cal.data), test_table(test.data);
    const auto test_ranks = ground_truth_ranks(test.data, test_table);
    const std::uint64_t run_seed = hash_key({config.seed, r});
    EvaluationOptions eval{.eval_bins = config.eval_bins};

    for (std::size_t a = 0; a < n_alpha; ++a) {
      eval.alpha = config.alphas[a];
      for (std::size_t g = 0; g < n_alg; ++g) {
        const auto kind = config.algorithms[g];
        FittedAlgorithm fitted;
        if (needs_tuning(kind)) {
          TuneOptions options{.alpha = config.alphas[a],
                              .eval_bins = config.eval_bins,
                              .randomized = config.randomized,
                              .min_bin_count = config.min_bin_count,
                              .seed = run_seed};
          auto tuned = tune(kind, cal, tune_set, config.grid, default_objective(kind), options);
          fitted = fit_algorithm(tuned.best, cal, cal_table, config.alphas[a], run_seed);
        } else {
          AlgorithmConfig c{.kind = kind, .randomized = config.randomized, .min_bin_count = config.min_bin_count};
          fitted = fit_algorithm(c, val, val_table, config.alphas[a], run_seed);
        }
        auto out = predict_algorithm(fitted, test, test_table);
        auto report = evaluate(test.data, test_ranks, out, test.reference_ease(), eval);
        results[r][a * n_alg + g] =
            RunMetrics{report.coverage, report.avg_size, report.t_cv.value_or(kNaN), report.t_ss.value_or(kNaN),
                       report.sscv.value_or(kNaN), report.escv.value_or(kNaN), report.deficit.value_or(kNaN),
                       report.excess.value_or(kNaN)};
        chosen[r][a * n_alg + g] = fitted.config;
      }
    }
  });

  CompareReport report;
  for (std::size_t a = 0; a < n_alpha; ++a) {
    for (std::size_t g = 0; g < n_alg; ++g) {
      CompareRow row{.algorithm = config.algorithms[g], .alpha = config.alphas[a]};
      for (std::size_t r = 0; r < config.repeats; ++r) {
        row.repeats.push_back(results[r][a * n_alg + g]);
        row.chosen.push_back(chosen[r][a * n_alg + g]);
      }
      row.median = median_metrics(row.repeats);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Property experiment

PropertyConfig PropertyConfig::full_scale() {
  PropertyConfig c;
  c.trials = 1000;
  c.trial_size = 2000;
  c.subset_size = 100;
  c.draws = 10000;
  return c;
}

double property_satisfaction_rate(std::span<const double> difficulty, std::span<const double> sizes,
                                  std::size_t m, std::size_t draws, std::uint64_t seed, bool overlap) {
  const std::size_t n = difficulty.size();
  if (sizes.size() != n) throw ValidationError("difficulty and size vectors differ in length");
  if (m == 0) throw ValidationError("subset size m must be >= 1");
  if (draws == 0) throw ValidationError("number of draws T must be >= 1");
  if (overlap ? n < m : n < 2 * m) {
    throw ValidationError("need at least " + std::to_string(overlap ? m : 2 * m) + " examples, got " +
                          std::to_string(n));
  }
  auto eng = keyed_engine({seed, streams::subset});
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates over a persistent permutation: each prefix is a
  // uniform sample regardless of the starting order.
  auto draw_prefix = [&](std::size_t count) {
    for (std::size_t t = 0; t < count; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, n - 1);
      std::swap(idx[t], idx[pick(eng)]);
    }
  };

  std::size_t satisfied = 0;
  for (std::size_t draw = 0; draw < draws; ++draw) {
    double d1 = 0.0, d2 = 0.0, s1 = 0.0, s2 = 0.0;
    if (overlap) {
      draw_prefix(m);
      for (std::size_t t = 0; t < m; ++t) d1 += difficulty[idx[t]], s1 += sizes[idx[t]];
      draw_prefix(m);
      for (std::size_t t = 0; t < m; ++t) d2 += difficulty[idx[t]], s2 += sizes[idx[t]];
    } else {
      draw_prefix(2 * m);
      for (std::size_t t = 0; t < m; ++t) d1 += difficulty[idx[t]], s1 += sizes[idx[t]];
      for (std::size_t t = m; t < 2 * m; ++t) d2 += difficulty[idx[t]], s2 += sizes[idx[t]];
    }
    // Equal m, so comparing sums is comparing means.
    const int dir_d = (d1 > d2) - (d1 < d2);
    const int dir_s = (s1 > s2) - (s1 < s2);
    if (dir_d * dir_s >= 0) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(draws);
}

int expected_sign(std::string_view metric) { return metric == "t_ss" ? 1 : -1; }

Correlation correlate_with_rates(std::span<const double> rates, std::span<const double> values) {
  try {
    return spearman(values, rates);
  } catch (const ValidationError&) {
    return {kNaN, kNaN};
  }
}

ValidationReport metric_validation(const ExperimentData& data, const std::vector<AlgorithmConfig>& algorithms,
                                   const PropertyConfig& config) {
  if (algorithms.empty()) throw ValidationError("no algorithms to validate");
  if (data.variants.empty()) throw ValidationError("metric validation needs ease for T-SS binning");
  if (config.trials < 2) throw ValidationError("need at least two trials");
  const std::size_t n = data.data.n;
  const std::size_t n_cal = n / 2;
  const std::size_t pool_n = n - n_cal;
  if (pool_n < config.trial_size) {
    throw ValidationError("dataset too small: the evaluation half has " + std::to_string(pool_n) +
                          " examples, trials need M = " + std::to_string(config.trial_size));
  }
  if (config.trial_size < 2 * config.subset_size) throw ValidationError("trial size M must be at least 2m");

  auto eng = keyed_engine({config.seed, streams::split, 0});
  auto perm = sample_without_replacement(n, n, eng);
  const std::vector<std::size_t> cal_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_cal));
  const std::vector<std::size_t> pool_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_cal), perm.end());
  const auto cal = subset(data, cal_idx);
  const auto pool = subset(data, pool_idx);
  const RankTable cal_table(cal.data), pool_table(pool.data);
  const auto pool_ranks = ground_truth_ranks(pool.data, pool_table);
  const auto pool_ease = pool.reference_ease();

  std::vector<PredictionOutput> outputs;
  for (const auto& alg : algorithms) {
    auto fitted = fit_algorithm(alg, cal, cal_table, config.alpha, config.seed);
    outputs.push_back(predict_algorithm(fitted, pool, pool_table));
  }

  constexpr std::size_t n_metrics = std::size(kValidatedMetrics);
  const auto strata = default_strata(data.data.k);
  ValidationReport report;
  report.algorithms.resize(algorithms.size());
  for (std::size_t a = 0; a < algorithms.size(); ++a) {
    report.algorithms[a].algorithm = algorithms[a].kind;
    report.algorithms[a].rates.resize(config.trials);
    report.algorithms[a].metrics.assign(n_metrics, std::vector<double>(config.trials));
  }

  parallel_for(config.trials, config.threads, [&](std::size_t r) {
    auto trial_eng = keyed_engine({config.seed, streams::trial, r});
    const auto members = sample_without_replacement(pool_n, config.trial_size, trial_eng);
    std::vector<double> ease(config.trial_size), difficulty(config.trial_size);
    std::vector<std::uint32_t> ranks(config.trial_size);
    for (std::size_t t = 0; t < members.size(); ++t) {
      ease[t] = pool_ease[members[t]];
      ranks[t] = pool_ranks[members[t]];
      difficulty[t] = ranks[t];
    }
    const auto bins = evaluation_bins(ease, config.eval_bins);
    const std::uint64_t draw_seed = hash_key({config.seed, streams::trial, r});
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      PredictionOutput sub;
      sub.covered.resize(members.size());
      sub.size.resize(members.size());
      for (std::size_t t = 0; t < members.size(); ++t) {
        sub.covered[t] = outputs[a].covered[members[t]];
        sub.size[t] = outputs[a].size[members[t]];
      }
      auto& av = report.algorithms[a];
      av.rates[r] = property_satisfaction_rate(difficulty, sub.size, config.subset_size, config.draws, draw_seed,
                                               config.overlap);
      const auto de = deficit_excess(ranks, sub);
      av.metrics[0][r] = de.deficit;
      av.metrics[1][r] = de.excess;
      av.metrics[2][r] = sscv(sub, config.alpha, strata);
      av.metrics[3][r] = escv(sub, config.alpha, 1);
      av.metrics[4][r] = t_ss(difficulty, sub, bins);
    }
  });

  report.rank_counts.assign(n_metrics, std::vector<std::size_t>(n_metrics, 0));
  report.average_rank.assign(n_metrics, 0.0);
  for (auto& av : report.algorithms) {
    std::vector<double> strength(n_metrics);
    for (std::size_t m = 0; m < n_metrics; ++m) {
      auto c = correlate_with_rates(av.rates, av.metrics[m]);
      av.correlations.push_back({std::string(kValidatedMetrics[m]), c.rho, c.p_value, 0});
      strength[m] = std::isnan(c.rho) ? -std::numeric_limits<double>::infinity()
                                      : c.rho * expected_sign(kValidatedMetrics[m]);
    }
    std::vector<std::size_t> order(n_metrics);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return strength[x] > strength[y]; });
    for (std::size_t place = 0; place < n_metrics; ++place) {
      av.correlations[order[place]].rank = place + 1;
      report.rank_counts[order[place]][place] += 1;
      report.average_rank[order[place]] += static_cast<double>(place + 1);
    }
  }
  for (auto& r : report.average_rank) r /= static_cast<double>(report.algorithms.size());
  return report;
}

}  // namespace adaptcp
