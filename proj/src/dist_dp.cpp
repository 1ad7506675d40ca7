#include "riskdp/dist_dp.hpp"

#include <cmath>
#include <stdexcept>

namespace riskdp {

std::vector<double> value_backup(const TabularMDP& mdp, const Policy& policy,
                                 std::span<const double> v) {
  if (static_cast<int>(v.size()) != mdp.n_states)
    throw std::invalid_argument("value vector has wrong length");
  std::vector<double> out(mdp.n_states, 0.0);
  for (int x = 0; x < mdp.n_states; ++x) {
    double vx = 0.0;
    auto pi = policy.at(x);
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (pi[a] == 0.0) continue;
      double ev = 0.0;
      auto next = mdp.next_state_probs(x, a);
      for (int y = 0; y < mdp.n_states; ++y) ev += next[y] * v[y];
      vx += pi[a] * (mdp.mean_reward(x, a) + mdp.gamma * ev);
    }
    out[x] = vx;
  }
  return out;
}

std::vector<double> value_fixed_point(const TabularMDP& mdp,
                                      const Policy& policy, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  std::vector<double> v(mdp.n_states, 0.0);
  while (true) {
    std::vector<double> next = value_backup(mdp, policy, v);
    double change = 0.0;
    for (int x = 0; x < mdp.n_states; ++x)
      change = std::max(change, std::abs(next[x] - v[x]));
    v = std::move(next);
    if (change < tol) break;
  }
  return v;
}

ReturnFunction distributional_backup(const TabularMDP& mdp,
                                     const Policy& policy,
                                     const ReturnFunction& eta) {
  if (eta.probs.rows != mdp.n_states || eta.probs.cols != eta.grid.n_atoms)
    throw std::invalid_argument("return function has wrong shape");
  if (!eta.grid.covers_return_range(mdp))
    throw std::invalid_argument("grid does not cover the MDP return range");

  const GridSpec& grid = eta.grid;
  const int n_atoms = grid.n_atoms;
  const int last = n_atoms - 1;
  const double inv_spacing = 1.0 / grid.spacing();
  ReturnFunction out{grid, Matrix(mdp.n_states, n_atoms, 0.0)};

  // For a fixed reward atom r, source grid atom j maps to fractional grid
  // position base + gamma * j * (spacing ratio); precompute the split per j.
  std::vector<int> lo(n_atoms);
  std::vector<double> whi(n_atoms);

  for (int x = 0; x < mdp.n_states; ++x) {
    auto pi = policy.at(x);
    auto out_row = out.probs.row(x);
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (pi[a] == 0.0) continue;
      const auto& rdist = mdp.reward_at(x, a);
      auto next = mdp.next_state_probs(x, a);
      for (std::size_t ri = 0; ri < rdist.atoms.size(); ++ri) {
        double w0 = pi[a] * rdist.probs[ri];
        if (w0 == 0.0) continue;
        double r = rdist.atoms[ri];
        // Target position of source atom j, as a fractional grid index.
        double base = (r + mdp.gamma * grid.v_min - grid.v_min) * inv_spacing;
        double stride = mdp.gamma;
        for (int j = 0; j < n_atoms; ++j) {
          double pos = base + stride * j;
          if (pos <= 0.0) {
            lo[j] = 0;
            whi[j] = 0.0;
          } else if (pos >= last) {
            lo[j] = last - 1;
            whi[j] = 1.0;
          } else {
            int l = static_cast<int>(pos);
            if (l >= last) l = last - 1;
            lo[j] = l;
            whi[j] = pos - l;
          }
        }
        for (int y = 0; y < mdp.n_states; ++y) {
          double w = w0 * next[y];
          if (w == 0.0) continue;
          auto src = eta.probs.row(y);
          for (int j = 0; j < n_atoms; ++j) {
            double mass = w * src[j];
            if (mass == 0.0) continue;
            out_row[lo[j]] += mass * (1.0 - whi[j]);
            out_row[lo[j] + 1] += mass * whi[j];
          }
        }
      }
    }
  }
  return out;
}

CategoricalReturn action_backup_distribution(const TabularMDP& mdp, int x,
                                             int a, const ReturnFunction& eta) {
  const GridSpec& grid = eta.grid;
  CategoricalReturn out{grid, std::vector<double>(grid.n_atoms, 0.0)};
  const int last = grid.n_atoms - 1;
  const double inv_spacing = 1.0 / grid.spacing();
  const auto& rdist = mdp.reward_at(x, a);
  auto next = mdp.next_state_probs(x, a);
  for (std::size_t ri = 0; ri < rdist.atoms.size(); ++ri) {
    double pr = rdist.probs[ri];
    if (pr == 0.0) continue;
    double base =
        (rdist.atoms[ri] + mdp.gamma * grid.v_min - grid.v_min) * inv_spacing;
    for (int y = 0; y < mdp.n_states; ++y) {
      double w = pr * next[y];
      if (w == 0.0) continue;
      auto src = eta.probs.row(y);
      for (int j = 0; j < grid.n_atoms; ++j) {
        double mass = w * src[j];
        if (mass == 0.0) continue;
        double pos = base + mdp.gamma * j;
        if (pos <= 0.0) {
          out.probs[0] += mass;
        } else if (pos >= last) {
          out.probs[last] += mass;
        } else {
          int lo = static_cast<int>(pos);
          if (lo >= last) lo = last - 1;
          double frac = pos - lo;
          out.probs[lo] += mass * (1.0 - frac);
          out.probs[lo + 1] += mass * frac;
        }
      }
    }
  }
  return out;
}

ReturnFunction return_distribution(const TabularMDP& mdp, const Policy& policy,
                                   const GridSpec& grid, double tol) {
  return return_distribution_from(
      mdp, policy, ReturnFunction::point_mass(grid, mdp.n_states, 0.0), tol);
}

ReturnFunction return_distribution_from(const TabularMDP& mdp,
                                        const Policy& policy,
                                        const ReturnFunction& start,
                                        double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  ReturnFunction eta = start;
  // The unprojected operator contracts supports at rate gamma; cap sweeps
  // well past the horizon needed for tol.
  int cap = 1000;
  if (mdp.gamma > 0.0) {
    double needed = std::log(tol * 0.01) / std::log(mdp.gamma);
    cap = std::max(cap, static_cast<int>(needed) * 4);
  }
  for (int it = 0; it < cap; ++it) {
    ReturnFunction next = distributional_backup(mdp, policy, eta);
    double change = max_l1_distance(next, eta);
    eta = std::move(next);
    if (change < tol) break;
  }
  return eta;
}

}  // namespace riskdp
