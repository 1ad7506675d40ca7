#pragma once

// Test-side oracles, independent of the library's solution paths:
// a dense linear solve for policy evaluation, an exact 1-Wasserstein
// distance against a uniform law, and instance generators.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "riskdp/categorical.hpp"
#include "riskdp/mdp.hpp"
#include "riskdp/rng.hpp"

namespace riskdp::testing {

// Solves (I - gamma * P_pi) v = r_pi by Gaussian elimination with partial
// pivoting.
inline std::vector<double> policy_value_linear_solve(const TabularMDP& mdp,
                                                     const Policy& policy) {
  const int n = mdp.n_states;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (int x = 0; x < n; ++x) {
    a[x][x] = 1.0;
    auto pi = policy.at(x);
    for (int act = 0; act < mdp.n_actions; ++act) {
      if (pi[act] == 0.0) continue;
      auto next = mdp.next_state_probs(x, act);
      for (int y = 0; y < n; ++y) a[x][y] -= mdp.gamma * pi[act] * next[y];
      a[x][n] += pi[act] * mdp.mean_reward(x, act);
    }
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    std::swap(a[col], a[pivot]);
    if (std::abs(a[col][col]) < 1e-14)
      throw std::runtime_error("singular system in linear-solve oracle");
    for (int row = 0; row < n; ++row) {
      if (row == col) continue;
      double f = a[row][col] / a[col][col];
      for (int k = col; k <= n; ++k) a[row][k] -= f * a[col][k];
    }
  }
  std::vector<double> v(n);
  for (int x = 0; x < n; ++x) v[x] = a[x][n] / a[x][x];
  return v;
}

// Exact 1-Wasserstein distance between a grid-supported law and the uniform
// law on [a, b], via the integral of |F_grid - F_uniform|.
inline double w1_to_uniform(const CategoricalReturn& dist, double a, double b) {
  std::vector<double> breaks;
  breaks.push_back(a);
  breaks.push_back(b);
  for (int i = 0; i < dist.grid.n_atoms; ++i) breaks.push_back(dist.grid.atom(i));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // Right-continuous CDF of the grid law.
  auto grid_cdf = [&](double z) {
    double acc = 0.0;
    for (int i = 0; i < dist.grid.n_atoms; ++i) {
      if (dist.grid.atom(i) <= z + 1e-15) acc += dist.probs[i];
      else break;
    }
    return acc;
  };
  auto uniform_cdf = [&](double z) {
    if (z <= a) return 0.0;
    if (z >= b) return 1.0;
    return (z - a) / (b - a);
  };

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double z1 = breaks[i], z2 = breaks[i + 1];
    double len = z2 - z1;
    if (len <= 0.0) continue;
    double c = grid_cdf(z1);  // constant on [z1, z2)
    double d1 = c - uniform_cdf(z1);
    double d2 = c - uniform_cdf(z2);
    if (d1 * d2 >= 0.0) {
      total += 0.5 * (std::abs(d1) + std::abs(d2)) * len;
    } else {
      double t = d1 / (d1 - d2) * len;  // crossing point
      total += 0.5 * std::abs(d1) * t + 0.5 * std::abs(d2) * (len - t);
    }
  }
  return total;
}

// Midpoint discretization of the uniform law on [a, b]. Its CVaR at levels
// k/n is exact, which makes it an exact stand-in for quantile integrals of
// the continuous law at those levels.
inline DiscreteDistribution uniform_midpoint(double a, double b, int n) {
  DiscreteDistribution d;
  d.atoms.reserve(n);
  d.probs.assign(n, 1.0 / n);
  for (int i = 0; i < n; ++i)
    d.atoms.push_back(a + (b - a) * (i + 0.5) / n);
  return d;
}

inline TabularMDP random_mdp(int n_states, int n_actions, double gamma,
                             double r_max, std::uint64_t seed) {
  SplitRng rng(seed);
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_max = r_max;
  mdp.transition = Matrix(n_states * n_actions, n_states, 0.0);
  mdp.reward.reserve(static_cast<std::size_t>(n_states) * n_actions);
  for (int r = 0; r < n_states * n_actions; ++r) {
    auto row = mdp.transition.row(r);
    double total = 0.0;
    for (int y = 0; y < n_states; ++y) {
      row[y] = rng.exponential();
      total += row[y];
    }
    for (int y = 0; y < n_states; ++y) row[y] /= total;
    double lo = r_max * (2.0 * rng.uniform01() - 1.0);
    double hi = r_max * (2.0 * rng.uniform01() - 1.0);
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1e-9) hi = std::min(r_max, lo + 0.1 * r_max + 1e-6);
    double p = 0.2 + 0.6 * rng.uniform01();
    mdp.reward.push_back(DiscreteDistribution{{lo, hi}, {p, 1.0 - p}});
  }
  return mdp;
}

inline Policy random_policy(int n_states, int n_actions, std::uint64_t seed) {
  SplitRng rng(seed);
  Policy policy{Matrix(n_states, n_actions, 0.0)};
  for (int x = 0; x < n_states; ++x) {
    auto row = policy.action_probs.row(x);
    double total = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      row[a] = rng.exponential();
      total += row[a];
    }
    for (int a = 0; a < n_actions; ++a) row[a] /= total;
  }
  return policy;
}

}  // namespace riskdp::testing
