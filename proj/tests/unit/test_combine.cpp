#include "doctest.h"

#include <cmath>
#include <cstring>

#include "ltcal/combine.hpp"
#include "ltcal/rng.hpp"

using namespace ltcal;

namespace {

ClassStats stats_with_counts(std::vector<std::int64_t> counts) {
  ClassStats s;
  s.image_counts.assign(counts.size(), 1);
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] == 0) s.image_counts[i] = 0;
  s.instance_counts = std::move(counts);
  return s;
}

PredictionVector softmax_like(Rng& rng, int len) {
  PredictionVector p;
  p.scores.resize(static_cast<std::size_t>(len));
  double sum = 0.0;
  for (double& s : p.scores) {
    s = rng.uniform01() + 1e-6;
    sum += s;
  }
  for (double& s : p.scores) s /= sum;
  return p;
}

bool bitwise_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("sel with a huge boundary returns the calibrated foreground entries") {
  Rng rng(1);
  const ClassStats stats = stats_with_counts({50, 300, 900});
  const PredictionVector cal = softmax_like(rng, 4);
  const PredictionVector orig = softmax_like(rng, 4);
  CombineConfig cfg;
  cfg.boundary_t = 1000000;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  for (int z = 1; z <= 3; ++z) CHECK(bitwise_equal(out[z], cal[z]));
  CHECK(bitwise_equal(out[0], orig[0]));  // background from the original head
}

TEST_CASE("sel with T=0 returns the original head everywhere") {
  Rng rng(2);
  const ClassStats stats = stats_with_counts({50, 300, 900});
  const PredictionVector cal = softmax_like(rng, 4);
  const PredictionVector orig = softmax_like(rng, 4);
  CombineConfig cfg;
  cfg.boundary_t = 0;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  for (int z = 0; z <= 3; ++z) CHECK(bitwise_equal(out[z], orig[z]));
}

TEST_CASE("boundary is inclusive: counts [50,300,900] at T=300 route 1,2 to cal") {
  Rng rng(3);
  const ClassStats stats = stats_with_counts({50, 300, 900});
  const PredictionVector cal = softmax_like(rng, 4);
  const PredictionVector orig = softmax_like(rng, 4);
  CombineConfig cfg;
  cfg.boundary_t = 300;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  CHECK(bitwise_equal(out[1], cal[1]));
  CHECK(bitwise_equal(out[2], cal[2]));  // N_z <= T inclusive
  CHECK(bitwise_equal(out[3], orig[3]));
}

TEST_CASE("avg of identical inputs is the input") {
  Rng rng(4);
  const ClassStats stats = stats_with_counts({10, 10});
  const PredictionVector p = softmax_like(rng, 3);
  CombineConfig cfg;
  cfg.scheme = CombineScheme::kAvg;
  const PredictionVector out = combine(p, p, stats, cfg);
  for (int z = 0; z <= 2; ++z) CHECK(out[z] == doctest::Approx(p[z]).epsilon(1e-15));
}

TEST_CASE("cal_only and orig_only are identity maps") {
  Rng rng(5);
  const ClassStats stats = stats_with_counts({10, 10});
  const PredictionVector cal = softmax_like(rng, 3);
  const PredictionVector orig = softmax_like(rng, 3);
  CombineConfig cfg;
  cfg.scheme = CombineScheme::kCalOnly;
  CHECK(combine(cal, orig, stats, cfg).scores == cal.scores);
  cfg.scheme = CombineScheme::kOrigOnly;
  CHECK(combine(cal, orig, stats, cfg).scores == orig.scores);
}

TEST_CASE("sel routing is exact and monotone in T over a full sweep") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(8));
    std::vector<std::int64_t> counts;
    for (int j = 0; j < C; ++j) counts.push_back(static_cast<std::int64_t>(rng.below(1500)));
    const ClassStats stats = stats_with_counts(counts);
    const PredictionVector cal = softmax_like(rng, C + 1);
    const PredictionVector orig = softmax_like(rng, C + 1);

    std::vector<char> was_cal(static_cast<std::size_t>(C) + 1, 0);
    for (std::int64_t t = 0; t <= 1500; t += 25) {
      CombineConfig cfg;
      cfg.boundary_t = t;
      const PredictionVector out = combine(cal, orig, stats, cfg);
      for (int z = 1; z <= C; ++z) {
        const bool from_cal = counts[static_cast<std::size_t>(z - 1)] <= t;
        CHECK(bitwise_equal(out[z], from_cal ? cal[z] : orig[z]));
        if (was_cal[static_cast<std::size_t>(z)]) CHECK(from_cal);  // never switches back
        was_cal[static_cast<std::size_t>(z)] = from_cal;
      }
    }
  }
}

TEST_CASE("sel output is generally unnormalized") {
  const ClassStats stats = stats_with_counts({1, 1000});
  PredictionVector cal;
  cal.scores = {0.1, 0.8, 0.1};
  PredictionVector orig;
  orig.scores = {0.2, 0.1, 0.7};
  CombineConfig cfg;
  cfg.boundary_t = 10;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  double sum = 0.0;
  for (const double s : out.scores) sum += s;
  CHECK(sum != doctest::Approx(1.0));  // 0.2 + 0.8 + 0.7
}

TEST_CASE("sel_thr zeroes small calibrated entries before routing") {
  const ClassStats stats = stats_with_counts({1, 1});
  PredictionVector cal;
  cal.scores = {0.9, 0.04, 0.06};
  PredictionVector orig;
  orig.scores = {0.5, 0.2, 0.3};
  CombineConfig cfg;
  cfg.scheme = CombineScheme::kSelThr;
  cfg.boundary_t = 10;
  cfg.thr = 0.05;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.06);
}

TEST_CASE("sel_norm normalizes and rejects a zero sum") {
  const ClassStats stats = stats_with_counts({1, 1});
  PredictionVector cal;
  cal.scores = {0.0, 0.2, 0.2};
  PredictionVector orig;
  orig.scores = {0.6, 0.1, 0.1};
  CombineConfig cfg;
  cfg.scheme = CombineScheme::kSelNorm;
  cfg.boundary_t = 10;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  double sum = 0.0;
  for (const double s : out.scores) sum += s;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  PredictionVector zero_cal;
  zero_cal.scores = {0.0, 0.0, 0.0};
  PredictionVector zero_orig;
  zero_orig.scores = {0.0, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(combine(zero_cal, zero_orig, stats, cfg),
                       "combine: degenerate prediction", std::invalid_argument);
}

TEST_CASE("det takes the per-class maximum") {
  const ClassStats stats = stats_with_counts({1, 1});
  PredictionVector cal;
  cal.scores = {0.3, 0.6, 0.1};
  PredictionVector orig;
  orig.scores = {0.5, 0.2, 0.3};
  CombineConfig cfg;
  cfg.scheme = CombineScheme::kDet;
  const PredictionVector out = combine(cal, orig, stats, cfg);
  CHECK(out[1] == 0.6);
  CHECK(out[2] == 0.3);
  CHECK(out[0] == 0.5);
}

TEST_CASE("length mismatches are rejected") {
  const ClassStats stats = stats_with_counts({1, 1});
  PredictionVector a;
  a.scores = {0.5, 0.25, 0.25};
  PredictionVector b;
  b.scores = {0.5, 0.5};
  CombineConfig cfg;
  CHECK_THROWS_AS(combine(a, b, stats, cfg), std::invalid_argument);
  CHECK_THROWS_AS(batch_combine({a}, {}, stats, cfg), std::invalid_argument);
}

TEST_CASE("batch_combine is pointwise for sel and empty-safe") {
  Rng rng(7);
  const ClassStats stats = stats_with_counts({5, 500});
  CombineConfig cfg;
  CHECK(batch_combine({}, {}, stats, cfg).empty());

  std::vector<PredictionVector> cal;
  std::vector<PredictionVector> orig;
  for (int i = 0; i < 10; ++i) {
    cal.push_back(softmax_like(rng, 3));
    orig.push_back(softmax_like(rng, 3));
  }
  const std::vector<PredictionVector> out = batch_combine(cal, orig, stats, cfg);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i].scores == combine(cal[i], orig[i], stats, cfg).scores);
}

TEST_CASE("sel_scale uses the set-level background ratio") {
  const ClassStats stats = stats_with_counts({1, 1});
  PredictionVector cal;
  cal.scores = {0.2, 0.5, 0.3};
  PredictionVector orig;
  orig.scores = {0.4, 0.3, 0.3};
  CombineConfig cfg;
  cfg.scheme = CombineScheme::kSelScale;
  cfg.boundary_t = 10;
  const std::vector<PredictionVector> out = batch_combine({cal}, {orig}, stats, cfg);
  // ratio = mean orig bg / mean cal bg = 2; calibrated entries double
  CHECK(out[0][1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out[0][2] == doctest::Approx(0.6).epsilon(1e-12));
}
