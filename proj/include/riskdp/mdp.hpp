#pragma once

#include <span>
#include <string>
#include <vector>

#include "riskdp/distribution.hpp"
#include "riskdp/matrix.hpp"

namespace riskdp {

/// Finite MDP with discrete reward distributions per (state, action).
///
/// `transition` has one row per (state, action) pair, indexed
/// `state * n_actions + action`, holding a probability vector over states.
/// `reward` is indexed the same way. All fields are immutable by convention
/// after construction; the type is safe to share across threads.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;  // strictly below 1
  double r_max = 0.0;  // bound on |reward atoms|
  Matrix transition;
  std::vector<DiscreteDistribution> reward;

  int row_index(int x, int a) const { return x * n_actions + a; }
  std::span<const double> next_state_probs(int x, int a) const {
    return transition.row(row_index(x, a));
  }
  const DiscreteDistribution& reward_at(int x, int a) const {
    return reward[static_cast<std::size_t>(row_index(x, a))];
  }
  double mean_reward(int x, int a) const { return reward_at(x, a).mean(); }
  double second_moment_reward(int x, int a) const {
    return reward_at(x, a).moment(2);
  }

  /// Value range bound for returns: r_max / (1 - gamma).
  double return_bound() const { return r_max / (1.0 - gamma); }
};

/// Empty if all invariants hold; otherwise one message per violation, naming
/// the (state, action) pair and the failed constraint.
std::vector<std::string> validate_mdp(const TabularMDP& mdp);

/// Stationary Markov policy: one probability vector over actions per state.
struct Policy {
  Matrix action_probs;

  int n_states() const { return action_probs.rows; }
  int n_actions() const { return action_probs.cols; }
  std::span<const double> at(int x) const { return action_probs.row(x); }

  /// For one-hot rows, the chosen action per state.
  std::vector<int> greedy_actions() const;
};

std::vector<std::string> validate_policy(const Policy& policy,
                                         const TabularMDP& mdp);

Policy uniform_policy(int n_states, int n_actions);
Policy deterministic_policy(const std::vector<int>& actions, int n_actions);

}  // namespace riskdp
