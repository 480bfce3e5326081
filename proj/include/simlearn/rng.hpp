#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace simlearn {

/// Seeded random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard. The
/// distributions are implemented here rather than taken from <random> because
/// the standard distributions are implementation-defined, and runs must be
/// bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0} - n + 1) % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x < limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  /// Bernoulli(p).
  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle, front to back, so a partial shuffle of the first
  /// `count` slots is exactly the prefix of a full shuffle.
  template <typename T>
  void shuffle_prefix(std::span<T> items, std::size_t count) {
    const std::size_t n = items.size();
    if (count > n) count = n;
    for (std::size_t i = 0; i < count && i + 1 < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      using std::swap;
      swap(items[i], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    shuffle_prefix(items, items.size());
  }

  /// Derives an independent child stream (splitmix64 of the next output mixed with `salt`).
  Rng fork(std::uint64_t salt);

  /// Engine state as text (std::mt19937_64 stream format) for checkpoints.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive decorrelated seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace simlearn
