#pragma once

#include <span>
#include <vector>

#include "riskdp/categorical.hpp"
#include "riskdp/mdp.hpp"

namespace riskdp {

/// One application of the policy Bellman operator: for each state,
/// E over a ~ pi, reward atoms and next states of [R + gamma * v(X')],
/// computed by exact finite sums.
std::vector<double> value_backup(const TabularMDP& mdp, const Policy& policy,
                                 std::span<const double> v);

/// Iterates value_backup from zero until the sup-norm change drops below
/// `tol`. The result V satisfies ||V - T V||_inf < tol.
std::vector<double> value_fixed_point(const TabularMDP& mdp,
                                      const Policy& policy, double tol);

/// One projected distributional backup: for each state, the mixture over
/// (action, reward atom, next state) of the shifted-and-scaled next-state
/// law, projected back onto the grid. The grid must cover the return range
/// of the MDP so no mass is clipped.
ReturnFunction distributional_backup(const TabularMDP& mdp,
                                     const Policy& policy,
                                     const ReturnFunction& eta);

/// Fixed point of the projected distributional backup, iterated from a point
/// mass at zero until the sup-over-states L1 change drops below `tol`.
ReturnFunction return_distribution(const TabularMDP& mdp, const Policy& policy,
                                   const GridSpec& grid, double tol);

/// Same fixed point, iterated from `start` (the fixed point is unique, so
/// this is purely a warm start).
ReturnFunction return_distribution_from(const TabularMDP& mdp,
                                        const Policy& policy,
                                        const ReturnFunction& start,
                                        double tol);

/// Projected backup distribution of a single (state, action) pair against
/// the given return function.
CategoricalReturn action_backup_distribution(const TabularMDP& mdp, int x,
                                             int a, const ReturnFunction& eta);

}  // namespace riskdp
