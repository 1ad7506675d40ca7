#pragma once

#include <functional>
#include <vector>

#include "riskdp/categorical.hpp"
#include "riskdp/matrix.hpp"
#include "riskdp/mdp.hpp"
#include "riskdp/risk.hpp"
#include "riskdp/sketch.hpp"

namespace riskdp {

/// Output of a planner: a deterministic stationary policy, its per-state
/// objective values, and the final per-(state, action) objective table
/// (used for tie detection downstream).
struct PlanResult {
  Policy policy;
  std::vector<double> values;
  Matrix action_values;
  int iterations = 0;
  bool converged = false;
};

/// Standard risk-neutral optimal value iteration (Jacobi sweeps, ties to the
/// lowest action index).
PlanResult risk_neutral_vi(const TabularMDP& mdp, double tol);

/// Greedy value iteration on (mean, second moment) per action, maximizing
/// mean - lambda * variance. Terminates when the largest change across the
/// mean and variance tables drops below `theta`; hard cap of 1e5 sweeps.
PlanResult mean_variance_vi(const TabularMDP& mdp, double lambda, double theta,
                            CrossTerm cross = CrossTerm::reward_weighted);

/// Static-CVaR planning on a budget-augmented space.
///
/// Maintains the minimal expected budget shortfall U(x, b) over a discretized
/// budget grid spanning the return range, with analytic continuation outside
/// the grid, and linear interpolation between budget levels:
///   U(x, b) = min_a gamma * E[ U(X', (b - R) / gamma) ].
/// The CVaR objective at the start state is b - U(x0, b) / tau; a stationary
/// Markov policy is extracted greedily at the maximizing budget. Reported
/// per-state values re-evaluate the extracted policy with the distributional
/// fixed point and the exact CVaR functional.
PlanResult cvar_budget_vi(const TabularMDP& mdp, double tau,
                          const GridSpec& eval_grid, int n_budget, int iters,
                          int start_state, double eval_tol = 1e-8);

/// Distributional value iteration where each sweep selects, per state, the
/// action whose one-step projected backup has the best CVaR, then installs
/// that backup. Greedy risk iteration can cycle, so the sweep budget is
/// capped and the best policy encountered (by evaluated CVaR at the start
/// state) is returned.
PlanResult cvar_greedy_vi(const TabularMDP& mdp, double tau,
                          const GridSpec& grid, int iters, int start_state,
                          double tol = 1e-9, double eval_tol = 1e-8);

/// Exhaustive search over deterministic policies. `evaluate` returns the
/// per-state objective values of a policy. The search looks for a policy
/// whose value vector weakly dominates every other policy's, state by state.
struct BruteForceResult {
  bool has_dominant = false;
  bool unique = false;   // no other policy ties it at every state
  double margin = 0.0;   // min over rivals of their worst-state gap
  Policy policy;
  std::vector<double> values;
};

BruteForceResult brute_force_search(
    const TabularMDP& mdp,
    const std::function<std::vector<double>(const Policy&)>& evaluate);

/// Enumeration with the mean - lambda * variance objective evaluated through
/// the sketch fixed point.
BruteForceResult brute_force_mean_variance(const TabularMDP& mdp,
                                           double lambda, double tol = 1e-12);

/// Enumeration with a risk measure evaluated on the distributional fixed
/// point over `grid`.
BruteForceResult brute_force_risk(const TabularMDP& mdp, const RiskSpec& risk,
                                  const GridSpec& grid, double tol = 1e-9);

}  // namespace riskdp
