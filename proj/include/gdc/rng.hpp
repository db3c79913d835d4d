#pragma once

// Counter-based random streams.
//
// A stream is identified by a 64-bit key derived from (seed, ids...) through
// the SplitMix64 finalizer. The i-th draw of a stream is mix(key + (i+1)*gamma),
// so any stream can be reproduced from its key alone, independent of the order
// in which streams are consumed by worker threads.
//
// Standard normals use the Box-Muller transform on two uniforms in (0, 1),
// emitting the cosine branch first and caching the sine branch. Uniforms take
// the top 53 bits of a draw. None of this goes through <random> distributions,
// whose algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <utility>

namespace gdc {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combines a seed and a list of ids into a stream key. Order matters.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = splitmix_finalize(seed + kGoldenGamma);
  for (std::uint64_t id : ids) {
    h = splitmix_finalize(h ^ splitmix_finalize(id + 0x632be59bd9b4e019ULL));
  }
  return h;
}

class Rng {
 public:
  explicit constexpr Rng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return splitmix_finalize(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform in the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound), unbiased by rejection. bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Fisher-Yates over the whole range.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Moves a uniformly chosen subset of size `count` to the front, in draw order.
  template <typename T>
  void partial_shuffle(std::span<T> items, std::size_t count) noexcept {
    for (std::size_t i = 0; i < count && i < items.size(); ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(items.size() - i));
      std::swap(items[i], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gdc
