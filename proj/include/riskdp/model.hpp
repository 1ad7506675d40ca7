#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskdp/distribution.hpp"
#include "riskdp/matrix.hpp"
#include "riskdp/mdp.hpp"

namespace riskdp {

/// How a learned model came to be; serialized alongside it.
struct ModelProvenance {
  std::string loss;    // "equivalence", "mle", "constructed"
  std::string sketch;  // sketch descriptor for equivalence losses
  int k = 1;
  double p = 2.0;
  int rank = 0;  // 0 means full parameterization
  std::uint64_t seed = 0;
  double final_loss = 0.0;
};

/// Learnable transition model with a fixed reward kernel.
///
/// Transition rows live on the simplex through a row-wise softmax of logits.
/// The full parameterization keeps one logit vector per (state, action); the
/// low-rank parameterization factors the logit matrix of every action through
/// a shared state embedding: logits(x, a, y) = sum_d left(x, d) right_a(d, y).
struct ApproxModel {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  double r_max = 0.0;

  int rank = 0;               // 0 = full
  Matrix logits;              // full: (n_states * n_actions) x n_states
  Matrix left;                // low-rank: n_states x rank
  std::vector<Matrix> right;  // low-rank: per action, rank x n_states

  std::vector<DiscreteDistribution> reward;  // indexed like TabularMDP
  ModelProvenance provenance;

  /// Row-stochastic realization of the transition parameters.
  Matrix realized_transition() const;

  /// The induced MDP (realized transitions plus the fixed rewards).
  TabularMDP realize() const;

  /// Wraps an MDP as a full-rank model whose realization reproduces its
  /// transition table (up to clamping of exact zeros at 1e-300).
  static ApproxModel from_mdp(const TabularMDP& mdp);
};

/// Softmax of a logit row written into `out`.
void softmax_row(std::span<const double> logits, std::span<double> out);

/// Empty if realized rows are valid probability vectors to 1e-10.
std::vector<std::string> validate_model(const ApproxModel& model);

}  // namespace riskdp
