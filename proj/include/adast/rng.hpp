#pragma once

#include <cstdint>
#include <limits>

namespace adast {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Small URBG (SplitMix64 sequence) usable with <random> distributions.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Which gradient sample a stream feeds.
enum class Axis : std::uint64_t { X = 0, Y = 1, Instance = 2 };

/// Counter-based stream family: every (node, iteration, axis) triple gets an
/// independent generator, so draws never depend on evaluation order.
class StreamFamily {
 public:
  explicit constexpr StreamFamily(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  constexpr SplitMix64 stream(std::uint64_t node, std::uint64_t iteration,
                              Axis axis) const noexcept {
    std::uint64_t h = mix64(seed_);
    h = mix64(h ^ node);
    h = mix64(h ^ iteration);
    h = mix64(h ^ static_cast<std::uint64_t>(axis));
    return SplitMix64(h);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace adast
