#include "riskdp/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskdp/dist_dp.hpp"

namespace riskdp {

namespace {

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace

PlanResult risk_neutral_vi(const TabularMDP& mdp, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  std::vector<double> v(mdp.n_states, 0.0);
  Matrix q(mdp.n_states, mdp.n_actions, 0.0);
  int iters = 0;
  bool converged = false;
  const int cap = 100000;
  while (iters < cap) {
    ++iters;
    double change = 0.0;
    std::vector<double> next(mdp.n_states, 0.0);
    for (int x = 0; x < mdp.n_states; ++x) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        double ev = 0.0;
        auto p = mdp.next_state_probs(x, a);
        for (int y = 0; y < mdp.n_states; ++y) ev += p[y] * v[y];
        q(x, a) = mdp.mean_reward(x, a) + mdp.gamma * ev;
      }
      next[x] = *std::max_element(q.row(x).begin(), q.row(x).end());
      change = std::max(change, std::abs(next[x] - v[x]));
    }
    v = std::move(next);
    if (change < tol) {
      converged = true;
      break;
    }
  }
  std::vector<int> actions(mdp.n_states, 0);
  for (int x = 0; x < mdp.n_states; ++x) actions[x] = argmax_lowest(q.row(x));
  PlanResult result;
  result.policy = deterministic_policy(actions, mdp.n_actions);
  result.values = std::move(v);
  result.action_values = std::move(q);
  result.iterations = iters;
  result.converged = converged;
  return result;
}

PlanResult mean_variance_vi(const TabularMDP& mdp, double lambda, double theta,
                            CrossTerm cross) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");

  const double g = mdp.gamma;
  std::vector<double> mean(mdp.n_states, 0.0);
  std::vector<double> m2(mdp.n_states, 0.0);
  Matrix obj(mdp.n_states, mdp.n_actions, 0.0);
  std::vector<int> actions(mdp.n_states, 0);

  int iters = 0;
  bool converged = false;
  const int cap = 100000;
  while (iters < cap) {
    ++iters;
    std::vector<double> next_mean(mdp.n_states, 0.0);
    std::vector<double> next_m2(mdp.n_states, 0.0);
    double change = 0.0;
    for (int x = 0; x < mdp.n_states; ++x) {
      double best_obj = 0.0;
      double best_mean = 0.0, best_m2 = 0.0;
      int best_a = 0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double e1 = 0.0, e2 = 0.0;
        auto p = mdp.next_state_probs(x, a);
        for (int y = 0; y < mdp.n_states; ++y) {
          e1 += p[y] * mean[y];
          e2 += p[y] * m2[y];
        }
        double rbar = mdp.mean_reward(x, a);
        double v_tmp = rbar + g * e1;
        double cross_coeff =
            cross == CrossTerm::reward_weighted ? 2.0 * g * rbar : 2.0 * g;
        double m2_tmp = mdp.second_moment_reward(x, a) + cross_coeff * e1 +
                        g * g * e2;
        double o = v_tmp - lambda * (m2_tmp - v_tmp * v_tmp);
        obj(x, a) = o;
        if (a == 0 || o > best_obj) {
          best_obj = o;
          best_mean = v_tmp;
          best_m2 = m2_tmp;
          best_a = a;
        }
      }
      actions[x] = best_a;
      next_mean[x] = best_mean;
      next_m2[x] = best_m2;
      double old_var = m2[x] - mean[x] * mean[x];
      double new_var = best_m2 - best_mean * best_mean;
      change = std::max(change, std::abs(best_mean - mean[x]));
      change = std::max(change, std::abs(new_var - old_var));
    }
    mean = std::move(next_mean);
    m2 = std::move(next_m2);
    if (change < theta) {
      converged = true;
      break;
    }
  }

  PlanResult result;
  result.policy = deterministic_policy(actions, mdp.n_actions);
  result.values.resize(mdp.n_states);
  for (int x = 0; x < mdp.n_states; ++x) result.values[x] = obj(x, actions[x]);
  result.action_values = std::move(obj);
  result.iterations = iters;
  result.converged = converged;
  return result;
}

namespace {

// Budget-shortfall table with analytic continuation outside the grid:
// below the return range the shortfall is zero, above it the best
// attainable shortfall is b minus the risk-neutral optimal value.
struct ShortfallTable {
  const std::vector<double>* levels;  // budget grid, increasing
  const Matrix* table;                // n_states x n_budget
  const std::vector<double>* vstar;   // risk-neutral optimal values
  double lo, hi;

  double at(int x, double b) const {
    if (b <= lo) return 0.0;
    if (b >= hi) return b - (*vstar)[x];
    const auto& ls = *levels;
    double pos = (b - lo) / (ls[1] - ls[0]);
    int i = static_cast<int>(pos);
    int last = static_cast<int>(ls.size()) - 1;
    if (i >= last) i = last - 1;
    double frac = pos - i;
    return (*table)(x, i) * (1.0 - frac) + (*table)(x, i + 1) * frac;
  }
};

}  // namespace

PlanResult cvar_budget_vi(const TabularMDP& mdp, double tau,
                          const GridSpec& eval_grid, int n_budget, int iters,
                          int start_state, double eval_tol) {
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("cvar level must lie in (0, 1]");
  if (n_budget < 2) throw std::invalid_argument("need at least two budgets");
  if (iters < 1) throw std::invalid_argument("need at least one sweep");
  if (start_state < 0 || start_state >= mdp.n_states)
    throw std::out_of_range("start_state out of range");

  const double bound = mdp.return_bound();
  std::vector<double> levels(n_budget);
  for (int i = 0; i < n_budget; ++i)
    levels[i] = -bound + 2.0 * bound * i / (n_budget - 1);

  PlanResult neutral = risk_neutral_vi(mdp, 1e-12);
  const std::vector<double>& vstar = neutral.values;

  Matrix table(mdp.n_states, n_budget, 0.0);
  ShortfallTable lookup{&levels, &table, &vstar, levels.front(), levels.back()};

  const double g = mdp.gamma;
  auto action_shortfall = [&](int x, int a, double b) {
    const auto& rdist = mdp.reward_at(x, a);
    auto next = mdp.next_state_probs(x, a);
    double total = 0.0;
    for (std::size_t ri = 0; ri < rdist.atoms.size(); ++ri) {
      double pr = rdist.probs[ri];
      if (pr == 0.0) continue;
      double r = rdist.atoms[ri];
      if (g == 0.0) {
        total += pr * std::max(b - r, 0.0);
        continue;
      }
      double child = (b - r) / g;
      double ev = 0.0;
      for (int y = 0; y < mdp.n_states; ++y) {
        if (next[y] == 0.0) continue;
        ev += next[y] * lookup.at(y, child);
      }
      total += pr * g * ev;
    }
    return total;
  };

  int sweeps = 0;
  bool converged = false;
  for (; sweeps < iters; ++sweeps) {
    Matrix next_table(mdp.n_states, n_budget, 0.0);
    double change = 0.0;
    for (int x = 0; x < mdp.n_states; ++x) {
      for (int i = 0; i < n_budget; ++i) {
        double best = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
          double u = action_shortfall(x, a, levels[i]);
          if (a == 0 || u < best) best = u;
        }
        next_table(x, i) = best;
        change = std::max(change, std::abs(best - table(x, i)));
      }
    }
    table = std::move(next_table);
    if (change < 1e-12) {
      converged = true;
      ++sweeps;
      break;
    }
  }

  // Budget maximizing the CVaR objective at the start state.
  int best_budget = 0;
  double best_objective = 0.0;
  for (int i = 0; i < n_budget; ++i) {
    double objective = levels[i] - table(start_state, i) / tau;
    if (i == 0 || objective > best_objective) {
      best_objective = objective;
      best_budget = i;
    }
  }
  const double bstar = levels[best_budget];

  // Stationary collapse: greedy action at (x, b*) for every state, with the
  // per-action CVaR objective at b* kept for tie inspection.
  std::vector<int> actions(mdp.n_states, 0);
  Matrix action_objective(mdp.n_states, mdp.n_actions, 0.0);
  for (int x = 0; x < mdp.n_states; ++x) {
    double best = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double u = action_shortfall(x, a, bstar);
      action_objective(x, a) = bstar - u / tau;
      if (a == 0 || u < best) {
        best = u;
        actions[x] = a;
      }
    }
  }

  PlanResult result;
  result.policy = deterministic_policy(actions, mdp.n_actions);
  ReturnFunction eta =
      return_distribution(mdp, result.policy, eval_grid, eval_tol);
  RiskSpec risk = RiskSpec::cvar(tau);
  result.values.resize(mdp.n_states);
  for (int x = 0; x < mdp.n_states; ++x)
    result.values[x] = risk_value(risk, eta.state(x));
  result.action_values = std::move(action_objective);
  result.iterations = sweeps;
  result.converged = converged;
  return result;
}

PlanResult cvar_greedy_vi(const TabularMDP& mdp, double tau,
                          const GridSpec& grid, int iters, int start_state,
                          double tol, double eval_tol) {
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("cvar level must lie in (0, 1]");
  if (iters < 1) throw std::invalid_argument("need at least one sweep");
  if (start_state < 0 || start_state >= mdp.n_states)
    throw std::out_of_range("start_state out of range");
  if (!grid.covers_return_range(mdp))
    throw std::invalid_argument("grid does not cover the MDP return range");

  const RiskSpec risk = RiskSpec::cvar(tau);
  const int n_atoms = grid.n_atoms;
  ReturnFunction eta = ReturnFunction::point_mass(grid, mdp.n_states, 0.0);

  // Per-action scratch backup distribution.
  CategoricalReturn backup{grid, std::vector<double>(n_atoms, 0.0)};

  auto backup_into = [&](const ReturnFunction& source, int x, int a,
                         std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const auto& rdist = mdp.reward_at(x, a);
    auto next = mdp.next_state_probs(x, a);
    const int last = n_atoms - 1;
    const double inv_spacing = 1.0 / grid.spacing();
    for (std::size_t ri = 0; ri < rdist.atoms.size(); ++ri) {
      double pr = rdist.probs[ri];
      if (pr == 0.0) continue;
      double r = rdist.atoms[ri];
      double base = (r + mdp.gamma * grid.v_min - grid.v_min) * inv_spacing;
      for (int y = 0; y < mdp.n_states; ++y) {
        double w = pr * next[y];
        if (w == 0.0) continue;
        auto src = source.probs.row(y);
        for (int j = 0; j < n_atoms; ++j) {
          double mass = w * src[j];
          if (mass == 0.0) continue;
          double pos = base + mdp.gamma * j;
          if (pos <= 0.0) {
            out[0] += mass;
          } else if (pos >= last) {
            out[last] += mass;
          } else {
            int lo = static_cast<int>(pos);
            if (lo >= last) lo = last - 1;
            double frac = pos - lo;
            out[lo] += mass * (1.0 - frac);
            out[lo + 1] += mass * frac;
          }
        }
      }
    }
  };

  std::vector<std::vector<int>> seen_policies;
  std::vector<int> actions(mdp.n_states, 0);
  std::vector<int> prev_actions;
  int sweeps = 0;
  bool converged = false;
  for (; sweeps < iters; ++sweeps) {
    ReturnFunction next{grid, Matrix(mdp.n_states, n_atoms, 0.0)};
    for (int x = 0; x < mdp.n_states; ++x) {
      double best = 0.0;
      int best_a = 0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        backup_into(eta, x, a, backup.probs);
        double value = risk_value(risk, backup);
        if (a == 0 || value > best) {
          best = value;
          best_a = a;
          auto row = next.probs.row(x);
          std::copy(backup.probs.begin(), backup.probs.end(), row.begin());
        }
      }
      actions[x] = best_a;
    }
    bool known = false;
    for (const auto& p : seen_policies)
      if (p == actions) {
        known = true;
        break;
      }
    if (!known) {
      seen_policies.push_back(actions);
      // Greedy risk iteration can churn through many policies early on;
      // only the recent ones are fixed-point candidates worth evaluating.
      if (seen_policies.size() > 6) seen_policies.erase(seen_policies.begin());
    }

    double change = max_l1_distance(next, eta);
    eta = std::move(next);
    if (change < tol && actions == prev_actions) {
      converged = true;
      ++sweeps;
      break;
    }
    prev_actions = actions;
  }

  // Evaluate the recent distinct greedy policies in the planning model,
  // warm-starting from the planner's table; keep the best by CVaR at the
  // start state.
  PlanResult result;
  double best_start = 0.0;
  for (std::size_t i = 0; i < seen_policies.size(); ++i) {
    Policy candidate = deterministic_policy(seen_policies[i], mdp.n_actions);
    ReturnFunction fixed =
        return_distribution_from(mdp, candidate, eta, eval_tol);
    double at_start = risk_value(risk, fixed.state(start_state));
    if (i == 0 || at_start > best_start) {
      best_start = at_start;
      result.policy = std::move(candidate);
      result.values.assign(mdp.n_states, 0.0);
      for (int x = 0; x < mdp.n_states; ++x)
        result.values[x] = risk_value(risk, fixed.state(x));
      // Per-action one-step objectives against the evaluated fixed point.
      result.action_values = Matrix(mdp.n_states, mdp.n_actions, 0.0);
      for (int x = 0; x < mdp.n_states; ++x)
        for (int a = 0; a < mdp.n_actions; ++a) {
          backup_into(fixed, x, a, backup.probs);
          result.action_values(x, a) = risk_value(risk, backup);
        }
    }
  }
  result.iterations = sweeps;
  result.converged = converged;
  return result;
}

BruteForceResult brute_force_search(
    const TabularMDP& mdp,
    const std::function<std::vector<double>(const Policy&)>& evaluate) {
  double count = std::pow(static_cast<double>(mdp.n_actions),
                          static_cast<double>(mdp.n_states));
  if (count > (1 << 20))
    throw std::invalid_argument("instance too large for exhaustive search");

  std::vector<std::vector<double>> all_values;
  std::vector<std::vector<int>> all_actions;
  std::vector<int> actions(mdp.n_states, 0);
  while (true) {
    Policy policy = deterministic_policy(actions, mdp.n_actions);
    all_values.push_back(evaluate(policy));
    all_actions.push_back(actions);
    int pos = 0;
    while (pos < mdp.n_states) {
      if (++actions[pos] < mdp.n_actions) break;
      actions[pos] = 0;
      ++pos;
    }
    if (pos == mdp.n_states) break;
  }

  BruteForceResult result;
  const std::size_t n = all_values.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool dominant = true;
    for (std::size_t j = 0; j < n && dominant; ++j) {
      if (i == j) continue;
      for (int x = 0; x < mdp.n_states; ++x) {
        if (all_values[i][x] < all_values[j][x] - 1e-12) {
          dominant = false;
          break;
        }
      }
    }
    if (dominant) {
      result.has_dominant = true;
      result.policy = deterministic_policy(all_actions[i], mdp.n_actions);
      result.values = all_values[i];
      double margin = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double gap = 0.0;
        for (int x = 0; x < mdp.n_states; ++x)
          gap = std::max(gap, all_values[i][x] - all_values[j][x]);
        margin = std::min(margin, gap);
      }
      result.margin = margin;
      result.unique = margin > 1e-9;
      break;
    }
  }
  return result;
}

BruteForceResult brute_force_mean_variance(const TabularMDP& mdp,
                                           double lambda, double tol) {
  return brute_force_search(mdp, [&](const Policy& policy) {
    StatisticVector s = sketch_fixed_point(
        mdp, policy, SketchSpec::moments(2),
        ImputationSpec{ImputationSpec::Kind::two_point},
        SketchDpMode::closed_form, tol);
    std::vector<double> values(mdp.n_states);
    for (int x = 0; x < mdp.n_states; ++x)
      values[x] = s(x, 0) - lambda * (s(x, 1) - s(x, 0) * s(x, 0));
    return values;
  });
}

BruteForceResult brute_force_risk(const TabularMDP& mdp, const RiskSpec& risk,
                                  const GridSpec& grid, double tol) {
  return brute_force_search(mdp, [&](const Policy& policy) {
    ReturnFunction eta = return_distribution(mdp, policy, grid, tol);
    std::vector<double> values(mdp.n_states);
    for (int x = 0; x < mdp.n_states; ++x)
      values[x] = risk_value(risk, eta.state(x));
    return values;
  });
}

}  // namespace riskdp
