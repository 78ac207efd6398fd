#pragma once

#include <cstdint>
#include <string_view>

namespace specdraft {

/// splitmix64 finalizer; the mixing primitive behind every seeded stream.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a named sub-seed ("corpus", "verify", ...) from a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name) noexcept;

/// Maps 64 random bits onto [0, 1) with 53 bits of precision.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Sequential generator (xoshiro256**), seeded through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept { return to_unit(next_u64()); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t s_[4];
};

/// Counter-based uniform stream keyed by (seed, iteration). Each draw advances
/// the step counter, so draw k of iteration i is a pure function of (seed, i, k).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t iteration) noexcept
      : seed_(seed), iteration_(iteration) {}

  double uniform() noexcept {
    return to_unit(mix64(mix64(seed_ ^ mix64(iteration_)) + step_++));
  }
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t seed_;
  std::uint64_t iteration_;
  std::uint64_t step_ = 0;
};

}  // namespace specdraft
