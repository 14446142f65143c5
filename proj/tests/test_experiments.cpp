#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "adaptcp/error.hpp"
#include "adaptcp/experiments.hpp"
#include "adaptcp/synth.hpp"

using namespace adaptcp;

namespace {

ExperimentData synth_data(std::size_t n, std::uint64_t seed, std::size_t k = 50) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.k = k;
  cfg.seed = seed;
  return ExperimentData::from_dataset(generate(cfg));
}

}  // namespace

TEST_CASE("algorithm names") {
  for (auto k : all_algorithms()) CHECK(parse_algorithm(to_string(k)) == k);
  CHECK(parse_algorithm("o-saps") == AlgorithmKind::o_saps);
  CHECK(is_mondrian(AlgorithmKind::o_lac));
  CHECK_FALSE(is_mondrian(AlgorithmKind::saps));
  CHECK_FALSE(needs_tuning(AlgorithmKind::aps));
  CHECK_THROWS_AS(parse_algorithm("xyz"), ValidationError);
}

TEST_CASE("rank quantile") {
  const std::vector<std::uint32_t> r{1, 1, 2, 3, 5, 8, 1, 1, 2, 4};
  CHECK(rank_quantile(r, 0.1) == 5);
  CHECK(rank_quantile(r, 0.5) == 2);
  CHECK(rank_quantile(r, 0.6) == 1);
  CHECK(rank_quantile(r, 0.99) == 1);
}

TEST_CASE("property rate: equal sizes and monotone sizes give 1") {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  std::vector<double> d(400);
  for (auto& v : d) v = unif(eng);
  const std::vector<double> flat(400, 3.0);
  CHECK(property_satisfaction_rate(d, flat, 20, 500, 7) == 1.0);
  std::vector<double> mono;
  for (double v : d) mono.push_back(2.0 * v + 1.0);
  CHECK(property_satisfaction_rate(d, mono, 20, 500, 7) == 1.0);
  CHECK(property_satisfaction_rate(d, mono, 20, 500, 7, true) == 1.0);
}

TEST_CASE("property rate: unrelated sizes give about one half") {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> d(2000), s(2000);
  for (auto& v : d) v = unif(eng);
  for (auto& v : s) v = unif(eng);
  CHECK(std::abs(property_satisfaction_rate(d, s, 50, 4000, 3) - 0.5) <= 0.05);
}

TEST_CASE("property rate invariances") {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> d(300), s(300);
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = unif(eng);
    s[i] = d[i] + unif(eng);
  }
  std::vector<double> affine, cubic;
  for (double v : d) {
    affine.push_back(3.0 * v - 2.0);
    cubic.push_back(v * v * v + std::exp(v));
  }
  CHECK(property_satisfaction_rate(d, s, 10, 300, 5) == property_satisfaction_rate(affine, s, 10, 300, 5));
  CHECK(property_satisfaction_rate(d, s, 1, 300, 5) == property_satisfaction_rate(cubic, s, 1, 300, 5));
  CHECK(property_satisfaction_rate(d, s, 10, 300, 5) == property_satisfaction_rate(d, s, 10, 300, 5));
  CHECK_THROWS_AS(property_satisfaction_rate(d, s, 151, 10, 5), ValidationError);
  CHECK_NOTHROW(property_satisfaction_rate(d, s, 151, 10, 5, true));
}

TEST_CASE("self correlation is exactly one") {
  const std::vector<double> rates{0.5, 0.7, 0.6, 0.9, 0.8};
  CHECK(correlate_with_rates(rates, rates).rho == 1.0);
  CHECK(std::isnan(correlate_with_rates(rates, std::vector<double>(5, 1.0)).rho));
  CHECK(expected_sign("t_ss") == 1);
  CHECK(expected_sign("deficit") == -1);
}

TEST_CASE("split plan is disjoint and reproducible") {
  const auto a = make_split_plan(1000, 400, 300, 9, 2);
  const auto b = make_split_plan(1000, 400, 300, 9, 2);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  CHECK(a.calibration.size() == 200);
  CHECK(a.tuning.size() == 200);
  std::set<std::size_t> all(a.validation.begin(), a.validation.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 700);
  CHECK_FALSE(make_split_plan(1000, 400, 300, 9, 3).test == a.test);
  CHECK_THROWS_AS(make_split_plan(100, 80, 30, 0, 0), ValidationError);
}

TEST_CASE("tuning: single point, ties, and exhaustive optimality") {
  const auto data = synth_data(6000, 4);
  std::vector<std::size_t> first(3000), second(3000);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), 3000);
  const auto cal = subset(data, first), tune_set = subset(data, second);
  TuneOptions opts;

  TuneGrid one;
  one.bins = {20};
  const auto single = tune(AlgorithmKind::o_lac, cal, tune_set, one, TuneObjective::t_ss, opts);
  CHECK(single.best.bins == 20);
  CHECK(single.points.size() == 1);

  TuneGrid dup;
  dup.bins = {10, 10};
  CHECK(tune(AlgorithmKind::o_lac, cal, tune_set, dup, TuneObjective::t_ss, opts).best.bins == 10);

  TuneGrid grid;
  grid.bins = {5, 10, 20};
  grid.saps_w = {0.0, 0.1, 0.3};
  const auto r = tune(AlgorithmKind::o_saps, cal, tune_set, grid, TuneObjective::t_ss, opts);
  CHECK(r.points.size() == 9);
  for (const auto& p : r.points) CHECK(r.objective >= p.objective);
  const auto again = tune(AlgorithmKind::o_saps, cal, tune_set, grid, TuneObjective::t_ss, opts);
  CHECK(again.best.bins == r.best.bins);
  CHECK(again.best.saps_w == r.best.saps_w);

  const auto s = tune(AlgorithmKind::saps, cal, tune_set, grid, TuneObjective::sscv, opts);
  for (const auto& p : s.points) CHECK(s.objective <= p.objective);

  TuneGrid empty;
  empty.bins.clear();
  CHECK_THROWS_AS(tune(AlgorithmKind::o_lac, cal, tune_set, empty, TuneObjective::t_ss, opts), ValidationError);
}

TEST_CASE("tuning picks among ease variants") {
  SynthConfig cfg;
  cfg.n = 6000;
  cfg.k = 50;
  auto data = ExperimentData::from_dataset(generate(cfg), "c1");
  cfg.noise_coupling = 0.0;
  data.variants.push_back({"flat", generate(cfg).ease});
  std::vector<std::size_t> first(3000), second(3000);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), 3000);
  TuneGrid grid;
  grid.bins = {10};
  const auto r = tune(AlgorithmKind::o_lac, subset(data, first), subset(data, second), grid,
                      TuneObjective::t_ss, TuneOptions{});
  CHECK(r.points.size() == 2);
  CHECK(r.best.variant == 0);
}

TEST_CASE("comparison run: coverage, determinism and ordering") {
  const auto data = synth_data(20000, 6, 100);
  CompareConfig cfg;
  cfg.repeats = 3;
  cfg.n_val = 8000;
  cfg.n_test = 8000;
  cfg.grid.bins = {10, 20};
  cfg.grid.saps_w = {0.05, 0.1};
  cfg.grid.raps_lambda = {0.01, 0.1};
  cfg.threads = 2;
  const auto a = compare_run(data, cfg);
  REQUIRE(a.rows.size() == 6);
  for (const auto& row : a.rows) {
    CHECK(row.repeats.size() == 3);
    CHECK(std::abs(row.median.coverage - 0.9) <= 0.015);
  }
  cfg.threads = 1;
  const auto b = compare_run(data, cfg);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].median.t_ss == b.rows[i].median.t_ss);
    CHECK(a.rows[i].median.coverage == b.rows[i].median.coverage);
  }
  auto get = [&](AlgorithmKind k) {
    return *std::find_if(a.rows.begin(), a.rows.end(), [&](const CompareRow& r) { return r.algorithm == k; });
  };
  CHECK(get(AlgorithmKind::o_lac).median.t_ss > get(AlgorithmKind::lac).median.t_ss);
  CHECK(get(AlgorithmKind::o_lac).median.t_cv < get(AlgorithmKind::lac).median.t_cv);
}

TEST_CASE("medians ignore repeat order") {
  std::vector<RunMetrics> runs(5);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].coverage = 0.8 + 0.01 * static_cast<double>(i);
    runs[i].t_ss = std::sin(static_cast<double>(i));
  }
  const auto m1 = median_metrics(runs);
  std::reverse(runs.begin(), runs.end());
  std::swap(runs[0], runs[3]);
  const auto m2 = median_metrics(runs);
  CHECK(m1.coverage == m2.coverage);
  CHECK(m1.t_ss == m2.t_ss);
  CHECK(m1.coverage == doctest::Approx(0.82));
}

TEST_CASE("metric validation at small scale") {
  const auto data = synth_data(8000, 7);
  PropertyConfig cfg;
  cfg.trials = 12;
  cfg.trial_size = 400;
  cfg.subset_size = 20;
  cfg.draws = 200;
  cfg.threads = 2;
  std::vector<AlgorithmConfig> algs(2);
  algs[0].kind = AlgorithmKind::lac;
  algs[1].kind = AlgorithmKind::aps;
  const auto r = metric_validation(data, algs, cfg);
  REQUIRE(r.algorithms.size() == 2);
  for (const auto& a : r.algorithms) {
    CHECK(a.rates.size() == 12);
    CHECK(a.correlations.size() == 5);
    for (double rate : a.rates) {
      CHECK(rate >= 0.0);
      CHECK(rate <= 1.0);
    }
  }
  CHECK(r.rank_counts.size() == 5);
  cfg.threads = 1;
  const auto again = metric_validation(data, algs, cfg);
  CHECK(again.algorithms[1].rates == r.algorithms[1].rates);
  cfg.trial_size = 30;
  CHECK_THROWS_AS(metric_validation(data, algs, cfg), ValidationError);
}
