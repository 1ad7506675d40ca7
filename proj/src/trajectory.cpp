#include "riskdp/trajectory.hpp"

#include <cmath>
#include <stdexcept>

#include "riskdp/rng.hpp"

namespace riskdp {

Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy,
                             int start_state, int horizon,
                             std::uint64_t seed) {
  if (start_state < 0 || start_state >= mdp.n_states)
    throw std::out_of_range("start_state out of range");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");

  SplitRng rng(seed);
  Trajectory traj;
  traj.steps.reserve(horizon);
  int x = start_state;
  double discount = 1.0;
  for (int t = 0; t < horizon; ++t) {
    int a = static_cast<int>(rng.categorical(policy.at(x)));
    const auto& rdist = mdp.reward_at(x, a);
    double r = rdist.atoms[rng.categorical(rdist.probs)];
    int next = static_cast<int>(rng.categorical(mdp.next_state_probs(x, a)));
    traj.steps.push_back({x, a, r, next});
    traj.discounted_return += discount * r;
    discount *= mdp.gamma;
    x = next;
  }
  return traj;
}

double undiscounted_return(const Trajectory& t) {
  double sum = 0.0;
  for (const auto& s : t.steps) sum += s.reward;
  return sum;
}

int default_mc_horizon(const TabularMDP& mdp, double target_error) {
  if (mdp.r_max <= 0.0) return 1;
  double bound = mdp.r_max / (1.0 - mdp.gamma);
  if (bound <= target_error) return 1;
  if (mdp.gamma <= 0.0) return 1;
  double h = std::log(target_error / bound) / std::log(mdp.gamma);
  return static_cast<int>(std::ceil(h));
}

}  // namespace riskdp
