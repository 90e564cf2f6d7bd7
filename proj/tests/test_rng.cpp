#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fedrec/rng.hpp"

using namespace fedrec;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0ULL, 1ULL, 42ULL}) {
    for (std::uint64_t stream : {1ULL, 2ULL, 3ULL}) {
      for (std::uint64_t sub : {0ULL, 1ULL, 7ULL}) {
        seen.insert(derive_seed(base, stream, sub));
      }
    }
  }
  CHECK(seen.size() == 27);
  CHECK(derive_seed(5, 9, 1) == derive_seed(5, 9, 1));
}

TEST_CASE("uniform01 lies in the unit interval") {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.uniform01();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("below is bounded and hits every residue") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = rng.below(7);
    CHECK(x < 7);
    seen.insert(x);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("gaussian moments are near standard") {
  Rng rng(13);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle permutes") {
  Rng rng(17);
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i;
  auto shuffled = v;
  rng.shuffle(shuffled);
  CHECK(shuffled != v);
  std::sort(shuffled.begin(), shuffled.end());
  CHECK(shuffled == v);
}

TEST_CASE("sample_indices draws distinct in-range values") {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = rng.sample_indices(30, 12);
    CHECK(s.size() == 12);
    std::set<int> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 12);
    CHECK(*uniq.begin() >= 0);
    CHECK(*uniq.rbegin() < 30);
  }
  CHECK(rng.sample_indices(5, 0).empty());
  CHECK(rng.sample_indices(5, 5).size() == 5);
  CHECK_THROWS_AS(rng.sample_indices(5, 6), std::invalid_argument);
}

TEST_CASE("sample_indices is roughly uniform") {
  Rng rng(23);
  std::vector<int> hits(10, 0);
  const int trials = 20000;
  for (int trial = 0; trial < trials; ++trial) {
    for (int i : rng.sample_indices(10, 3)) ++hits[static_cast<std::size_t>(i)];
  }
  for (int h : hits) {
    CHECK(std::abs(h / static_cast<double>(trials) - 0.3) < 0.02);
  }
}

TEST_CASE("sample_from returns pool members") {
  Rng rng(29);
  const std::vector<int> pool = {4, 9, 16, 25, 36, 49};
  auto s = rng.sample_from(pool, 4);
  CHECK(s.size() == 4);
  for (int x : s) CHECK(std::find(pool.begin(), pool.end(), x) != pool.end());
  std::set<int> uniq(s.begin(), s.end());
  CHECK(uniq.size() == 4);
}
