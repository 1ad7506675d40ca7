#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "riskdp/categorical.hpp"
#include "riskdp/matrix.hpp"
#include "riskdp/mdp.hpp"
#include "riskdp/model.hpp"
#include "riskdp/sketch.hpp"

namespace riskdp {

/// Set of policies plus the seed that generated them.
struct PolicySet {
  std::vector<Policy> policies;
  std::uint64_t seed = 0;
};

/// Each policy row drawn from the flat Dirichlet distribution on the action
/// simplex. Deterministic in (mdp shape, count, seed).
PolicySet sample_policies(const TabularMDP& mdp, int count, std::uint64_t seed);

struct Transition {
  int state;
  int action;
  double reward;
  int next_state;
};

struct TransitionDataset {
  std::vector<Transition> rows;
};

/// Dataset sampled from the generative law of `mdp`: `per_pair` draws for
/// every (state, action) pair. Deterministic in the seed.
TransitionDataset sample_dataset(const TabularMDP& mdp, int per_pair,
                                 std::uint64_t seed);

/// Shape of an MDP without its dynamics; what MLE estimation is allowed to
/// know a priori.
struct MdpShape {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  double r_max = 0.0;
  static MdpShape of(const TabularMDP& mdp) {
    return {mdp.n_states, mdp.n_actions, mdp.gamma, mdp.r_max};
  }
};

/// Maximum-likelihood model with additive smoothing:
/// row = (count + smoothing) / (total + smoothing * n_states).
/// Unvisited (state, action) pairs get uniform rows; reward distributions are
/// empirical atom frequencies, falling back to a point mass at zero.
ApproxModel mle_model(const MdpShape& shape, const TransitionDataset& data,
                      double smoothing);

/// Per-policy sketch fixed points on the true MDP, in sketch coordinates.
std::vector<StatisticVector> true_statistics(const TabularMDP& mdp,
                                             const PolicySet& policies,
                                             const SketchSpec& sketch,
                                             double tol = 1e-10);

/// Deviation of the model from matching the per-policy return statistics:
/// sum over policies and states of |s - (model backup)^k s|^p, where s is the
/// true fixed point and the backup runs through the closed-form moment
/// operator in the model.
double equivalence_loss(const std::vector<StatisticVector>& true_stats,
                        const ApproxModel& model, const PolicySet& policies,
                        const SketchSpec& sketch, int k, double p);

/// Loss (p = 2) and its gradient with respect to the full-rank transition
/// logits. Diagnostic surface; the optimizer uses the same computation.
std::pair<double, Matrix> equivalence_loss_gradient(
    const std::vector<StatisticVector>& true_stats, const ApproxModel& model,
    const PolicySet& policies, const SketchSpec& sketch, int k);

struct OptConfig {
  double step = 0.05;  // Adam learning rate
  int iters = 5000;
  std::uint64_t seed = 0;
  double init_scale = 1.0;  // stddev of initial logits
};

/// Minimizes the equivalence loss (p = 2) over transition logits, full or
/// low-rank (`rank` 0 means full), with deterministic Adam updates (betas
/// 0.9/0.999). The second-moment scale of the loss varies across directions
/// by orders of magnitude, so plain fixed-step descent stalls; the diagonal
/// rescaling is what reaches the tight optima the membership checks expect.
/// Rewards stay fixed: taken from `data` (empirical estimates) when provided,
/// otherwise copied from the true MDP. Returns the iterate with the lowest
/// loss; the achieved loss is recorded in the provenance. Throws
/// std::runtime_error if the loss becomes non-finite.
ApproxModel learn_model(const TabularMDP& mdp, const PolicySet& policies,
                        const SketchSpec& sketch, int k, int rank,
                        const OptConfig& opt,
                        const TransitionDataset* data = nullptr);

/// Monte Carlo estimate of E[(s(x') - s(x_model'))^2] over dataset rows, with
/// `n_draws` model samples per row. `stat_table` holds one statistic vector
/// per state.
double sample_based_loss(const ApproxModel& model, const TransitionDataset& data,
                         const Matrix& stat_table, int n_draws,
                         std::uint64_t seed);

enum class MembershipCriterion { dist_k, dist_proper, psi_k, psi_proper };

struct MembershipQuery {
  MembershipCriterion criterion = MembershipCriterion::psi_proper;
  int k = 1;                                    // for the _k criteria
  SketchSpec sketch = SketchSpec::moments(2);   // for the psi criteria
};

struct PolicyMembership {
  double deviation = 0.0;
  bool pass = false;
};

struct MembershipReport {
  std::vector<PolicyMembership> per_policy;
  double max_deviation = 0.0;
  bool all_pass = true;
};

/// Compares the model against the true MDP policy by policy.
///
/// dist criteria compare k projected distributional backups (or fixed
/// points) on the categorical grid, measured by per-state L1; psi criteria
/// compare k moment backups (or sketch fixed points), measured in sup norm.
/// Iterated criteria start from the true fixed point of the quantity they
/// track.
MembershipReport membership_check(const ApproxModel& model,
                                  const TabularMDP& mdp,
                                  const PolicySet& policies,
                                  const MembershipQuery& query,
                                  const GridSpec& grid, double tol);

}  // namespace riskdp
