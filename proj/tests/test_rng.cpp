#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "boltzlens/rng.hpp"

using bl::CounterRng;
using bl::derive_seed;

TEST_CASE("counter rng is deterministic and stateless across replay") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CounterRng c(43);
  CHECK(CounterRng(42).next_u64() != c.next_u64());
}

TEST_CASE("uniform lies in [0,1) and has plausible mean") {
  CounterRng rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // mean of U[0,1) has std 1/sqrt(12n); allow 5 sigma
  CHECK(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal draws match N(0,1024) moments within Monte Carlo bounds") {
  CounterRng rng(123);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal(0.0, 32.0);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 5.0 * 32.0 / std::sqrt(static_cast<double>(n)));
  // var estimator std is sigma^2 * sqrt(2/n)
  CHECK(std::abs(var - 1024.0) < 5.0 * 1024.0 * std::sqrt(2.0 / n));
}

TEST_CASE("derive_seed separates sub-streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(99, i));
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  CounterRng r1(5), r2(5);
  bl::shuffle(v, r1);
  bl::shuffle(w, r2);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
}
