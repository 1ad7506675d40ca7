#pragma once

#include <string>
#include <utility>
#include <vector>

namespace riskdp {

/// Finite-support probability distribution over the reals.
///
/// Invariants: atoms strictly increasing, probs nonnegative and of equal
/// length, probs summing to one within 1e-12.
struct DiscreteDistribution {
  std::vector<double> atoms;
  std::vector<double> probs;

  double mean() const;
  double moment(int order) const;  // E[Z^order]
  double variance() const;
  double min_atom() const { return atoms.front(); }
  double max_atom() const { return atoms.back(); }

  static DiscreteDistribution point_mass(double value);

  /// Builds a distribution from (atom, mass) pairs: sorts, merges atoms
  /// closer than `merge_eps`, drops zero-mass atoms and normalizes.
  static DiscreteDistribution from_weighted_atoms(
      std::vector<std::pair<double, double>> weighted, double merge_eps = 1e-12);
};

/// Empty if all invariants hold; otherwise one message per violation.
std::vector<std::string> validate_distribution(const DiscreteDistribution& d);

}  // namespace riskdp
