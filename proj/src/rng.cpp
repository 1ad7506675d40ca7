#include "riskdp/rng.hpp"

#include <cassert>
#include <cmath>

namespace riskdp {

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SplitRng::SplitRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t s = seed;
  engine_.seed(splitmix64_next(s));
}

SplitRng SplitRng::split(std::uint64_t stream) const {
  std::uint64_t s = seed_ ^ (0xA0761D6478BD642FULL * (stream + 1));
  return SplitRng(splitmix64_next(s));
}

std::uint64_t SplitRng::next_u64() { return engine_(); }

double SplitRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitRng::exponential() {
  double u = uniform01();
  return -std::log1p(-u);
}

double SplitRng::gaussian() {
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

std::size_t SplitRng::categorical(std::span<const double> weights) {
  assert(!weights.empty());
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding can push u past the accumulated total; fall back to the last
  // index with positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace riskdp
