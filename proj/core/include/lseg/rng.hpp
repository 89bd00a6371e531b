#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace lseg {

/// SplitMix64 stream. Output depends only on the seed, so draws are identical
/// across platforms and standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box-Muller (one draw per call, no cached spare).
  double normal() noexcept;

  /// Independent child stream; advances this generator by one draw.
  Rng split() noexcept;

  template <class Index>
  void shuffle(std::span<Index> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace lseg
