#pragma once

#include <span>
#include <string>
#include <vector>

#include "riskdp/distribution.hpp"
#include "riskdp/matrix.hpp"
#include "riskdp/mdp.hpp"

namespace riskdp {

/// Equispaced atom grid z_i = v_min + i * (v_max - v_min) / (n_atoms - 1).
struct GridSpec {
  double v_min = -1.0;
  double v_max = 1.0;
  int n_atoms = 2;

  double spacing() const { return (v_max - v_min) / (n_atoms - 1); }
  double atom(int i) const { return v_min + i * spacing(); }

  /// Symmetric grid covering the return range of `mdp`.
  static GridSpec return_range(const TabularMDP& mdp, int n_atoms = 401);

  /// True when the grid can represent every return of `mdp`:
  /// v_min <= -r_max/(1-gamma) and v_max >= r_max/(1-gamma).
  bool covers_return_range(const TabularMDP& mdp) const;

  bool operator==(const GridSpec&) const = default;
};

/// Probability vector over a fixed equispaced grid.
struct CategoricalReturn {
  GridSpec grid;
  std::vector<double> probs;

  double mean() const;
  double moment(int order) const;
  double total_mass() const;
  DiscreteDistribution to_discrete() const;

  /// Point mass at `value`, projected onto the grid.
  static CategoricalReturn point_mass(const GridSpec& grid, double value);
};

/// Per-state return distributions on a shared grid (one row per state).
struct ReturnFunction {
  GridSpec grid;
  Matrix probs;  // n_states x n_atoms

  CategoricalReturn state(int x) const {
    auto row = probs.row(x);
    return {grid, std::vector<double>(row.begin(), row.end())};
  }

  static ReturnFunction point_mass(const GridSpec& grid, int n_states,
                                   double value);
};

/// Sup over states of the L1 distance between probability rows.
double max_l1_distance(const ReturnFunction& a, const ReturnFunction& b);

enum class ClipRule {
  boundary,  // mass outside [v_min, v_max] goes to the boundary atom
  drop,      // mass outside the range is discarded (diagnostic only)
};

/// Adds `weight` times the projection of (atoms, probs) into `out`, an
/// accumulator over the grid. Each atom's mass is split linearly between the
/// two nearest grid points; atoms outside the range are clipped per `rule`.
void project_into(std::span<const double> atoms, std::span<const double> probs,
                  const GridSpec& grid, std::span<double> out, double weight,
                  ClipRule rule = ClipRule::boundary);

/// Two-nearest-atom linear projection onto the grid. Preserves total mass to
/// 1e-12 and preserves the mean exactly for atoms inside [v_min, v_max].
CategoricalReturn categorical_project(std::span<const double> atoms,
                                      std::span<const double> probs,
                                      const GridSpec& grid,
                                      ClipRule rule = ClipRule::boundary);

/// Law of r + gamma * Z under the input law: atoms mapped affinely,
/// probabilities unchanged. Atoms colliding after the map (gamma == 0) are
/// merged.
DiscreteDistribution pushforward(const DiscreteDistribution& dist, double r,
                                 double gamma);

/// Affine image of a grid-supported law; requires gamma > 0 so the image grid
/// stays equispaced and increasing.
CategoricalReturn pushforward(const CategoricalReturn& dist, double r,
                              double gamma);

}  // namespace riskdp
