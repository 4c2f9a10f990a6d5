#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace ftbert {

/// Deterministic pseudo-random generator: xoshiro256** (Blackman & Vigna),
/// with its 256-bit state filled by four successive splitmix64 outputs of the
/// seed. The stream depends only on the seed, never on the platform's
/// standard library, so every experiment is reproducible bit-for-bit.
///
/// Real-valued draws use only IEEE arithmetic plus std::log/std::cos/std::sqrt
/// (Box-Muller); these are correctly rounded on all mainstream libms for the
/// ranges used here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for a sub-task (document, example, worker).
  /// Seed of the child = seed ^ splitmix64(index + 1).
  static Rng derive(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller. Pairs are cached.
  double normal();
  /// Normal(0, stddev) resampled until it lies within two standard deviations.
  double truncated_normal(double stddev);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      auto j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(items[i], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ftbert
