#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "ltcal/rng.hpp"

using ltcal::Rng;

TEST_CASE("same seed reproduces the stream") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named sub-streams are stable and distinct") {
  CHECK(Rng::derive(7, "dataset") == Rng::derive(7, "dataset"));
  CHECK(Rng::derive(7, "dataset") != Rng::derive(7, "train"));
  CHECK(Rng::derive(7, "dataset") != Rng::derive(8, "dataset"));
}

TEST_CASE("below stays in range and covers small supports") {
  Rng rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t x = rng.below(5);
    CHECK(x < 5);
    seen.insert(x);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("uniform01 lies in [0,1) and has a sane mean") {
  Rng rng(3);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform_open avoids the endpoints") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform_open(2.0, 3.0);
    CHECK(x > 2.0);
    CHECK(x < 3.0);
  }
}

TEST_CASE("normal moments") {
  Rng rng(5);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(1.0, 2.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 1.0) < 0.05);
  CHECK(std::abs(var - 4.0) < 0.15);
}

TEST_CASE("beta stays in [0,1] and matches the Beta(5,2) mean") {
  Rng rng(11);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.beta(5.0, 2.0);
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
    sum += x;
  }
  CHECK(std::abs(sum / n - 5.0 / 7.0) < 0.01);
}

TEST_CASE("shuffle permutes") {
  Rng rng(13);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> orig = v;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == orig);
}

TEST_CASE("sample_without_replacement yields distinct indices") {
  Rng rng(17);
  const std::vector<std::size_t> pick = rng.sample_without_replacement(10, 10);
  std::set<std::size_t> s(pick.begin(), pick.end());
  CHECK(s.size() == 10);
  CHECK_THROWS(rng.sample_without_replacement(3, 4));
}
