#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace riskdp {

/// splitmix64 step; advances `state` and returns the next value.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Seedable, splittable random generator.
///
/// Draws come from std::mt19937_64 (algorithm pinned by the standard), seeded
/// through splitmix64 expansion. Child streams are derived from the parent
/// seed and a stream index only, so consumers of different streams never
/// affect each other's draws. The algorithm identifier is recorded in result
/// files so runs can be tied to the generator that produced them.
class SplitRng {
 public:
  static constexpr std::string_view kAlgorithmId = "splitmix64/mt19937_64-v1";

  explicit SplitRng(std::uint64_t seed);

  /// Child stream, deterministic in (seed, stream). Independent of how many
  /// draws were taken from this generator.
  SplitRng split(std::uint64_t stream) const;

  std::uint64_t next_u64();

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform01();

  /// Exponential(1) draw.
  double exponential();

  /// Standard normal draw (Box-Muller).
  double gaussian();

  /// Index draw from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace riskdp
