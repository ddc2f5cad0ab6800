#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <utility>

namespace bl {

// Counter-based generator: the i-th value of a stream is a pure function of
// (seed, i). Independent streams never share state, so sample generation can
// hand out one stream per (seed, index) pair and stay deterministic under
// any evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * ++counter_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased index in [0, n).
  std::size_t index(std::size_t n) {
    // n is tiny compared to 2^64 everywhere we use this; modulo bias is
    // below 1e-15 and irrelevant for shuffles and label draws.
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Box-Muller; the second variate of each pair is cached.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mean + stddev * r * std::cos(a);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives the seed of sub-stream `index` from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master ^ (0x9e3779b97f4a7c15ULL + index * 0xbf58476d1ce4e5b9ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <class Vec>
void shuffle(Vec& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace bl
