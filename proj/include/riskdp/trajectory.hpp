#pragma once

#include <cstdint>
#include <vector>

#include "riskdp/mdp.hpp"

namespace riskdp {

struct TrajectoryStep {
  int state;
  int action;
  double reward;
  int next_state;
};

/// A sampled trajectory together with its discounted return
/// (sum of gamma^t * r_t over its own steps).
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double discounted_return = 0.0;
};

/// Samples a trajectory of `horizon` steps following the generative law
/// A_t ~ pi(.|X_t), R_t ~ R(X_t, A_t), X_{t+1} ~ P(X_t, A_t).
///
/// Deterministic in all arguments: two calls with identical arguments produce
/// bitwise-identical trajectories. Per-step draws happen in a fixed order
/// (action, reward, next state), so extending the horizon with the same seed
/// keeps the shorter trajectory as a prefix.
///
/// Throws std::out_of_range for an invalid start state and
/// std::invalid_argument for horizon < 1.
Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy,
                             int start_state, int horizon, std::uint64_t seed);

/// Sum of raw rewards, no discounting. Used for episodic evaluation.
double undiscounted_return(const Trajectory& t);

/// Horizon making the truncation error gamma^h * r_max / (1 - gamma) at most
/// `target_error`.
int default_mc_horizon(const TabularMDP& mdp, double target_error = 1e-6);

}  // namespace riskdp
