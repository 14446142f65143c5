#include "doctest.h"

#include <cmath>
#include <random>

#include "adaptcp/calibration.hpp"
#include "adaptcp/error.hpp"
#include "adaptcp/metrics.hpp"
#include "adaptcp/synth.hpp"
#include "oracles.hpp"

using namespace adaptcp;

namespace {

PredictionOutput from_sizes(const std::vector<double>& size, const std::vector<std::uint8_t>& covered) {
  PredictionOutput out;
  out.size = size;
  out.covered = covered;
  out.bin.assign(size.size(), 0);
  for (double s : size) {
    std::vector<std::uint32_t> set(static_cast<std::size_t>(s));
    for (std::size_t j = 0; j < set.size(); ++j) set[j] = static_cast<std::uint32_t>(j);
    out.sets.push_back(set);
  }
  return out;
}

}  // namespace

TEST_CASE("signed R2 examples") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(signed_r2(x, std::vector<double>{3, 5, 7, 9}) == doctest::Approx(1.0));
  CHECK(signed_r2(x, std::vector<double>{-1, -2, -3, -4}) == doctest::Approx(-1.0));
  CHECK(signed_r2(x, std::vector<double>{2, 2, 2, 2}) == 0.0);
  CHECK(signed_r2(std::vector<double>{1, 1, 1, 1}, x) == 0.0);
  const std::vector<double> y{1, 3, 2, 4};
  CHECK(std::abs(signed_r2(x, y) - 0.64) < 1e-12);
  CHECK(std::abs(signed_r2(x, y) - oracle::signed_r2(x, y)) < 1e-12);
  CHECK_THROWS_AS(signed_r2(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST_CASE("signed R2 of an exact line is the slope sign") {
  std::mt19937_64 eng(31);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(3 + rep % 10), y;
    for (auto& v : x) v = unif(eng);
    double a = unif(eng);
    if (std::abs(a) < 0.05) a = 0.5;
    const double c = unif(eng);
    for (double v : x) y.push_back(a * v + c);
    CHECK(signed_r2(x, y) == doctest::Approx(a > 0 ? 1.0 : -1.0).epsilon(1e-9));
    std::vector<double> noise(x.size());
    for (auto& v : noise) v = unif(eng);
    const double r = signed_r2(x, noise);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("T-CV examples") {
  const auto out = from_sizes({1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1},
                              {1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0});
  BinIndexSets bins{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {10, 11, 12, 13, 14, 15, 16, 17, 18, 19}};
  CHECK(t_cv(out, bins, 0.1) == doctest::Approx(0.1));
  BinIndexSets first{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  CHECK(t_cv(out, first, 0.1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(t_cv(out, BinIndexSets{{0}, {}}, 0.1), ValidationError);
}

TEST_CASE("T-SS examples") {
  const auto out = from_sizes({1, 2, 3}, {1, 1, 1});
  const std::vector<double> rank{1, 2, 3};
  CHECK(t_ss(rank, out, BinIndexSets{{0}, {1}, {2}}) == doctest::Approx(1.0));
  const auto flat = from_sizes({2, 2, 2}, {1, 1, 1});
  CHECK(t_ss(rank, flat, BinIndexSets{{0}, {1}, {2}}) == 0.0);
  CHECK_THROWS_AS(t_ss(rank, out, BinIndexSets{{0, 1, 2}}), ValidationError);
  // Relabeling bins does not change the value.
  const std::vector<double> r6{1, 4, 2, 9, 3, 3};
  const auto o6 = from_sizes({1, 2, 5, 7, 2, 3}, {1, 1, 1, 1, 1, 1});
  CHECK(t_ss(r6, o6, BinIndexSets{{0, 1}, {2, 3}, {4, 5}}) ==
        doctest::Approx(t_ss(r6, o6, BinIndexSets{{4, 5}, {0, 1}, {2, 3}})).epsilon(1e-14));
}

TEST_CASE("SSCV and ESCV examples") {
  const auto out = from_sizes({1, 2, 3, 4, 5, 1, 1, 2}, {1, 0, 1, 1, 0, 1, 1, 1});
  const std::vector<SizeStratum> everything{{1, 100}};
  CHECK(sscv(out, 0.1, everything) == doctest::Approx(std::abs(6.0 / 8.0 - 0.9)));
  const auto ones = from_sizes({1, 1, 1, 1}, {1, 1, 1, 0});
  CHECK(escv(ones, 0.1, 1) == doctest::Approx(0.15));
  CHECK(default_strata(1000).size() == 5);
  CHECK(default_strata(1000).back().lo == 101);
  CHECK(default_strata(1000).back().hi == 1000);
  const auto parsed = parse_strata("1,2-3,4-10");
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[1].lo == 2);
  CHECK(parsed[1].hi == 3);
  CHECK_THROWS_AS(parse_strata("3-2"), ValidationError);
  CHECK_THROWS_AS(sscv(out, 0.1, std::vector<SizeStratum>{{50, 60}}), ValidationError);
  CHECK_THROWS_AS(escv(out, 0.1, 100), ValidationError);
}

TEST_CASE("empty sets count toward the size-one stratum") {
  const auto out = from_sizes({0, 1, 2}, {0, 1, 1});
  const std::vector<SizeStratum> strata{{1, 1}, {2, 3}};
  CHECK(sscv(out, 0.1, strata) == doctest::Approx(0.4));
}

TEST_CASE("ESCV refines SSCV") {
  std::mt19937_64 eng(44);
  std::uniform_int_distribution<int> size(1, 12);
  std::bernoulli_distribution cov(0.85);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> s(60);
    std::vector<std::uint8_t> c(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = size(eng);
      c[i] = cov(eng);
    }
    const auto out = from_sizes(s, c);
    const auto strata = parse_strata("1-3,4-7,8-12");
    CHECK(escv(out, 0.1, 1) >= sscv(out, 0.1, strata) - 1e-15);
  }
}

TEST_CASE("deficit and excess examples") {
  {
    auto out = from_sizes({5}, {1});
    CHECK(deficit_excess(std::vector<std::uint32_t>{3}, out).deficit == 0.0);
  }
  {
    auto out = from_sizes({3}, {1});
    CHECK(deficit_excess(std::vector<std::uint32_t>{1}, out).excess == 2.0);
  }
  {
    auto out = from_sizes({2}, {0});
    const auto de = deficit_excess(std::vector<std::uint32_t>{5}, out);
    CHECK(de.deficit == 3.0);
    CHECK(de.excess == 0.0);
  }
  {
    // Covered by a non-prefix set: deficit stays 0.
    auto out = from_sizes({1}, {1});
    CHECK(deficit_excess(std::vector<std::uint32_t>{4}, out).deficit == 0.0);
  }
}

TEST_CASE("Spearman and Kendall examples") {
  const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
  CHECK(spearman(a, a).rho == doctest::Approx(1.0));
  CHECK(kendall_tau(a, b) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman(a, std::vector<double>{2, 2, 2}), ValidationError);
  CHECK_THROWS_AS(kendall_tau(std::vector<double>{2, 2, 2}, a), ValidationError);
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, y{2, 1, 4, 3, 6, 5, 8, 7, 10, 9};
  const auto c = spearman(x, y);
  CHECK(c.rho == doctest::Approx(1.0 - 6.0 * 10 / (10.0 * 99)));
  CHECK(c.p_value > 0.0);
  CHECK(c.p_value < 1e-4);
  CHECK(average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
  CHECK(median({3.0, std::nan(""), 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("Kendall matches pair enumeration on tied data") {
  std::mt19937_64 eng(77);
  std::uniform_int_distribution<int> val(0, 6);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(5 + rep % 40), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = val(eng);
      y[i] = val(eng) + 0.5 * x[i];
    }
    x[0] = 0;
    x[1] = 6;
    y[0] = 0;
    y[1] = 9;
    CHECK(std::abs(kendall_tau(x, y) - oracle::kendall_tau(x, y)) < 1e-12);
    CHECK(std::abs(spearman(x, y).rho - oracle::spearman(x, y)) < 1e-12);
  }
}

TEST_CASE("evaluate on a synthetic run") {
  SynthConfig cfg;
  cfg.n = 4000;
  cfg.k = 30;
  cfg.seed = 2;
  const auto ds = generate(cfg);
  const auto ease = resolve_ease(ds);
  const RankTable table(ds);
  const auto ranks = ground_truth_ranks(ds, table);
  const auto out = predict(fit_global(ds, table, aps_spec(), 0.1), ds, table);
  EvaluationOptions opts;
  const auto r = evaluate(ds, ranks, out, ease, opts);
  CHECK(r.coverage == out.coverage());
  CHECK(r.avg_size == out.average_size());
  REQUIRE(r.t_cv);
  REQUIRE(r.t_ss);
  CHECK(*r.t_cv >= 0.0);
  CHECK(*r.t_cv <= 0.9);
  CHECK(std::abs(*r.t_ss) <= 1.0);
  CHECK(r.bins.size() == 50);
  std::size_t total = 0;
  for (const auto& b : r.bins) {
    total += b.count;
    CHECK(b.mean_difficulty >= 1.0);
    CHECK(b.mean_difficulty <= 30.0);
  }
  CHECK(total == ds.n);
  const auto no_ease = evaluate(ds, ranks, out, {}, opts);
  CHECK_FALSE(no_ease.t_cv);
  CHECK(no_ease.sscv);
}

TEST_CASE("evaluate with every label covered") {
  ScoreDataset ds;
  ds.n = 100;
  ds.k = 3;
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.probs.insert(ds.probs.end(), {0.5, 0.3, 0.2});
    ds.labels.push_back(static_cast<std::uint32_t>(i % 3));
    ds.ease.push_back(static_cast<double>(i) / 100.0);
  }
  const auto out = predict(fit_global(ds, lac_spec(), 0.1), ds);
  ConformalModel everything;
  everything.spec = lac_spec();
  everything.thresholds = {std::numeric_limits<double>::infinity()};
  const auto all = predict(everything, ds);
  const RankTable table(ds);
  EvaluationOptions opts;
  opts.eval_bins = 10;
  const auto r = evaluate(ds, ground_truth_ranks(ds, table), all, ds.ease, opts);
  CHECK(r.coverage == 1.0);
  CHECK(*r.t_cv == doctest::Approx(0.1));
  CHECK(*r.deficit == 0.0);
  (void)out;
}

TEST_CASE("regression evaluation reports width-error agreement") {
  SynthRegressionConfig cfg;
  cfg.n = 3000;
  const auto ds = generate_regression(cfg);
  ScoreSpec cpa;
  cpa.kind = ScoreKind::reg_cpa;
  const auto out = predict(fit_global(ds, cpa, 0.1), ds);
  EvaluationOptions opts;
  opts.eval_bins = 20;
  const auto r = evaluate(ds, out, resolve_ease(ds), opts);
  REQUIRE(r.width_error_r2);
  REQUIRE(r.width_error_tau);
  CHECK(*r.width_error_tau > 0.0);
  CHECK(r.t_ss);
  CHECK_FALSE(r.deficit);
}
