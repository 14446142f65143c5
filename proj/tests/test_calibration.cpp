#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "adaptcp/calibration.hpp"
#include "adaptcp/error.hpp"
#include "adaptcp/random.hpp"
#include "adaptcp/synth.hpp"
#include "oracles.hpp"

using namespace adaptcp;

namespace {

std::vector<double> one_to_nine() {
  std::vector<double> v(9);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

ScoreDataset synth(std::size_t n, std::uint64_t seed, std::size_t k = 20) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.k = k;
  cfg.seed = seed;
  return generate(cfg);
}

}  // namespace

TEST_CASE("quantile examples") {
  const auto v = one_to_nine();
  CHECK(conformal_quantile(v, 0.1) == 9.0);
  CHECK(std::isinf(conformal_quantile(v, 0.05)));
  CHECK(conformal_rank(9, 0.1) == 9);
  CHECK(conformal_rank(10, 0.999) == 1);
  CHECK(conformal_quantile(v, 0.999) == 1.0);
  CHECK_THROWS_AS(conformal_quantile(std::vector<double>{}, 0.1), ValidationError);
  CHECK_THROWS_AS(conformal_quantile(v, 0.0), ValidationError);
  CHECK_THROWS_AS(conformal_quantile(v, 1.0), ValidationError);
}

TEST_CASE("quantile matches the rational order statistic") {
  std::mt19937_64 eng(12);
  std::uniform_int_distribution<int> len(1, 300), a_dist(1, 999), val(0, 40);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = len(eng);
    const int a = a_dist(eng);
    std::vector<double> s(n);
    for (auto& x : s) x = val(eng) / 7.0;
    const double alpha = a / 1000.0;
    REQUIRE(conformal_rank(n, alpha) == oracle::rational_rank(n, a, 1000));
    REQUIRE(conformal_quantile(s, alpha) == oracle::sorted_quantile(s, oracle::rational_rank(n, a, 1000)));
  }
}

TEST_CASE("uniform scores give a threshold near 1 - alpha") {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> s(1000);
  for (auto& x : s) x = unif(eng);
  CHECK(std::abs(conformal_quantile(s, 0.1) - 0.9) < 0.03);
}

TEST_CASE("threshold is permutation invariant and monotone in alpha") {
  std::mt19937_64 eng(6);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> s(257);
  for (auto& x : s) x = unif(eng);
  auto t = s;
  std::shuffle(t.begin(), t.end(), eng);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha = 0.01; alpha < 1.0; alpha += 0.01) {
    CHECK(conformal_quantile(s, alpha) == conformal_quantile(t, alpha));
    CHECK(conformal_quantile(s, alpha) <= prev);
    prev = conformal_quantile(s, alpha);
  }
}

TEST_CASE("degenerate global LAC gives zero threshold and singleton sets") {
  ScoreDataset ds;
  ds.n = 10;
  ds.k = 2;
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.probs.insert(ds.probs.end(), {1.0, 0.0});
    ds.labels.push_back(0);
  }
  const auto model = fit_global(ds, lac_spec(), 0.1);
  REQUIRE(model.thresholds.size() == 1);
  CHECK(model.thresholds[0] == 0.0);
  const auto out = predict(model, ds);
  for (const auto& c : out.sets) CHECK(c == std::vector<std::uint32_t>{0});
  CHECK(out.coverage() == 1.0);
}

TEST_CASE("global threshold is the quantile of true-label scores") {
  const auto ds = synth(500, 3);
  const RankTable table(ds);
  for (const auto& spec : {lac_spec(), aps_spec(true, 4), raps_spec(0.05, 2, true, 4), saps_spec(0.1, true, 4)}) {
    const auto model = fit_global(ds, table, spec, 0.2);
    std::vector<double> s;
    for (std::size_t i = 0; i < ds.n; ++i) {
      const double u = draw_u(spec, streams::calibration_u, i, ds.labels[i]);
      s.push_back(score(spec, ds.row(i), ds.labels[i], u));
    }
    CHECK(model.thresholds[0] == oracle::sorted_quantile(s, oracle::rational_rank(ds.n, 200, 1000)));
  }
}

TEST_CASE("global coverage on synthetic data") {
  const auto all = synth(30000, 8);
  std::vector<std::size_t> cal_idx(10000), test_idx(20000);
  std::iota(cal_idx.begin(), cal_idx.end(), 0);
  std::iota(test_idx.begin(), test_idx.end(), 10000);
  const auto cal = subset(all, cal_idx), test = subset(all, test_idx);
  const double se = std::sqrt(0.09 / 20000.0);
  for (const auto& spec : {lac_spec(), aps_spec(), raps_spec(0.01, 2), saps_spec(0.1)}) {
    const auto out = predict(fit_global(cal, spec, 0.1), test);
    CHECK(out.coverage() >= 0.9 - 3 * se);
    CHECK(out.coverage() <= 0.9 + 0.01);
    for (std::size_t i = 0; i < out.n(); ++i) {
      const bool in = std::binary_search(out.sets[i].begin(), out.sets[i].end(), test.labels[i]);
      REQUIRE(in == bool(out.covered[i]));
      REQUIRE(out.size[i] == static_cast<double>(out.sets[i].size()));
    }
  }
}

TEST_CASE("Mondrian with one bin equals global") {
  const auto ds = synth(2000, 5);
  const auto ease = resolve_ease(ds);
  for (const auto& spec : {lac_spec(), aps_spec(), saps_spec(0.1)}) {
    const auto g = fit_global(ds, spec, 0.1);
    const auto m = fit_mondrian(ds, ease, spec, 0.1, {1, false, 20});
    CHECK(m.thresholds == g.thresholds);
    const auto pg = predict(g, ds), pm = predict(m, ds, ease);
    CHECK(pg.sets == pm.sets);
  }
  // Split binning: the thresholds come from the second half only.
  std::vector<std::size_t> second(1000);
  std::iota(second.begin(), second.end(), 1000);
  const auto m = fit_mondrian(ds, ease, lac_spec(), 0.1, {1, true, 20});
  CHECK(m.thresholds == fit_global(subset(ds, second), lac_spec(), 0.1).thresholds);
}

TEST_CASE("Mondrian thresholds are per-bin quantiles") {
  const auto ds = synth(3000, 9);
  const auto ease = resolve_ease(ds);
  const auto spec = lac_spec();
  const auto model = fit_mondrian(ds, ease, spec, 0.1, {5, false, 20});
  REQUIRE(model.bins);
  REQUIRE(model.thresholds.size() == 5);
  for (std::size_t b = 0; b < 5; ++b) {
    std::vector<double> s;
    for (auto i : model.bins->index_sets[b]) s.push_back(1.0 - ds.row(i)[ds.labels[i]]);
    CHECK(model.thresholds[b] == oracle::sorted_quantile(s, oracle::rational_rank(s.size(), 100, 1000)));
  }
  const auto out = predict(model, ds, ease);
  for (std::size_t i = 0; i < ds.n; ++i) REQUIRE(out.bin[i] == assign_bin(*model.bins, ease[i]));
}

TEST_CASE("small bins are reported") {
  const auto ds = synth(100, 1);
  const auto ease = resolve_ease(ds);
  try {
    fit_mondrian(ds, ease, lac_spec(), 0.1, {10, false, 20});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bin 0") != std::string::npos);
  }
  CHECK_NOTHROW(fit_mondrian(ds, ease, lac_spec(), 0.1, {10, false, 1}));
  CHECK_THROWS_AS(predict(fit_mondrian(ds, ease, lac_spec(), 0.1, {2, false, 20}), ds), ValidationError);
}

TEST_CASE("Mondrian per-bin coverage on synthetic data") {
  const auto all = synth(60000, 13, 100);
  std::vector<std::size_t> cal_idx(40000), test_idx(20000);
  std::iota(cal_idx.begin(), cal_idx.end(), 0);
  std::iota(test_idx.begin(), test_idx.end(), 40000);
  const auto cal = subset(all, cal_idx), test = subset(all, test_idx);
  const auto model = fit_mondrian(cal, resolve_ease(cal), lac_spec(), 0.1, {10, true, 20});
  const auto out = predict(model, test, resolve_ease(test));
  CHECK(std::abs(out.coverage() - 0.9) <= 0.01);
  std::vector<double> hits(10), count(10);
  for (std::size_t i = 0; i < out.n(); ++i) {
    hits[out.bin[i]] += out.covered[i];
    count[out.bin[i]] += 1;
  }
  for (std::size_t b = 0; b < 10; ++b) {
    REQUIRE(count[b] > 0);
    CHECK(hits[b] / count[b] >= 0.9 - 0.03);
  }
}

TEST_CASE("regression calibration") {
  SynthRegressionConfig cfg;
  cfg.n = 20000;
  cfg.seed = 4;
  const auto all = generate_regression(cfg);
  std::vector<std::size_t> a(10000), b(10000);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 10000);
  const auto cal = subset(all, a), test = subset(all, b);
  ScoreSpec cp;
  cp.kind = ScoreKind::reg_cp;
  ScoreSpec cpa;
  cpa.kind = ScoreKind::reg_cpa;
  for (const auto& spec : {cp, cpa}) {
    const auto out = predict(fit_global(cal, spec, 0.1), test);
    CHECK(out.is_regression());
    CHECK(std::abs(out.coverage() - 0.9) < 0.015);
    for (std::size_t i = 0; i < out.n(); ++i) {
      REQUIRE(bool(out.covered[i]) == out.intervals[i].contains(test.targets[i]));
    }
    const auto m = fit_mondrian(cal, resolve_ease(cal), spec, 0.1, {5, false, 20});
    CHECK(std::abs(predict(m, test, resolve_ease(test)).coverage() - 0.9) < 0.015);
  }
  CHECK_THROWS_AS(fit_global(cal, lac_spec(), 0.1), ValidationError);
}
