#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace pfgt {

// Counter-based generator (splitmix64). Value semantics: copying an Rng
// forks the stream at its current position, which makes replay in tests
// trivial. All project randomness flows through named substreams of one
// top-level seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derives an independent stream from this seed and a stream name.
  Rng substream(std::string_view name) const {
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a 64
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return Rng(mix(state_ ^ h));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n), exactly unbiased (rejection sampling).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return static_cast<int>(x % un);
  }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int_range(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("Rng::uniform_int_range: empty range");
    return lo + uniform_int(hi - lo + 1);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mean + stddev * (r * std::cos(a));
  }

  // Normal clipped by rejection to mean +/- cut*stddev.
  double truncated_normal(double mean, double stddev, double cut = 2.0) {
    for (;;) {
      const double z = normal(0.0, 1.0);
      if (std::fabs(z) <= cut) return mean + stddev * z;
    }
  }

  // Fisher-Yates; uniform over all permutations.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  // Uniform m-subset of [0, n) without replacement (partial Fisher-Yates).
  std::vector<int> sample_subset(int n, int m) {
    if (m < 0 || m > n) throw std::invalid_argument("Rng::sample_subset: m out of range");
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));
    return idx;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pfgt
