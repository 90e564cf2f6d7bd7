#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedrec {

// splitmix64 finalizer. Used to turn structured ids (seed, stream, sub) into
// well-mixed engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed plus up to two
// structured ids (e.g. a purpose tag and a client index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t sub = 0) {
  return mix64(mix64(base ^ mix64(stream)) ^ mix64(sub));
}

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is pinned by the standard; every distribution on top of it is
// implemented here because the standard library's distributions are
// implementation-defined and would break run-to-run reproducibility across
// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, bound), unbiased via rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

  int index(int bound) {
    if (bound <= 0) throw std::invalid_argument("Rng::index: bound must be positive");
    return static_cast<int>(below(static_cast<std::uint64_t>(bound)));
  }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // First `count` entries of a partial Fisher-Yates pass over 0..n-1: a
  // uniform sample without replacement, in draw order.
  std::vector<int> sample_indices(int n, int count) {
    if (count < 0 || count > n) {
      throw std::invalid_argument("Rng::sample_indices: count out of range");
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
  }

  // Uniform sample of `count` values from `pool` without replacement.
  std::vector<int> sample_from(const std::vector<int>& pool, int count) {
    auto picks = sample_indices(static_cast<int>(pool.size()), count);
    std::vector<int> out;
    out.reserve(picks.size());
    for (int p : picks) out.push_back(pool[static_cast<std::size_t>(p)]);
    return out;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fixed stream tags so that independent consumers of one base seed never
// collide.
namespace seed_tag {
inline constexpr std::uint64_t holdout = 0x686f6c64ULL;
inline constexpr std::uint64_t public_view = 0x7075626cULL;
inline constexpr std::uint64_t item_init = 0x7669746dULL;
inline constexpr std::uint64_t user_init = 0x75696e69ULL;
inline constexpr std::uint64_t negatives = 0x6e656773ULL;
inline constexpr std::uint64_t shuffle = 0x73687566ULL;
inline constexpr std::uint64_t client_step = 0x73746570ULL;
inline constexpr std::uint64_t targets = 0x74617267ULL;
inline constexpr std::uint64_t profiles = 0x70726f66ULL;
inline constexpr std::uint64_t attack = 0x6174746bULL;
inline constexpr std::uint64_t synth = 0x73796e74ULL;
}  // namespace seed_tag

}  // namespace fedrec
