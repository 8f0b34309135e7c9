#pragma once

#include <cstdint>
#include <vector>

namespace splitshield {

// Deterministic xoshiro256++ stream, seeded through splitmix64 so that any
// 64-bit seed (including 0) yields a well-mixed state. Identical seeds give
// bit-identical streams on every platform; there is no global RNG state
// anywhere in the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform();

  // Uniform integer in [0, n), n > 0. Rejection-sampled, no modulo bias.
  std::uint64_t uniform_below(std::uint64_t n);

  // Standard normal via Box-Muller (pairs are cached, consumption is fixed).
  double normal();

  // Fisher-Yates shuffle of indices/values.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derive an independent child stream (seed mixing, not stream splitting).
  Rng fork(std::uint64_t salt);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace splitshield
