#pragma once

#include <span>
#include <string>
#include <vector>

#include "riskdp/categorical.hpp"
#include "riskdp/distribution.hpp"
#include "riskdp/matrix.hpp"
#include "riskdp/mdp.hpp"

namespace riskdp {

/// A sketch maps a distribution to a fixed-length statistic vector: either
/// the first m raw moments, or (mean, variance).
struct SketchSpec {
  enum class Kind { moments, mean_variance };

  Kind kind = Kind::moments;
  int m = 1;  // output dimension

  static SketchSpec moments(int m) { return {Kind::moments, m}; }
  static SketchSpec mean_variance() { return {Kind::mean_variance, 2}; }

  std::string describe() const;
};

/// Maps a statistic vector back to a distribution with those statistics.
///
/// two_point: atoms mu +- sigma with equal mass (exact for two moments,
/// collapses to a point mass when sigma is zero).
/// normal_clipped: a 33-atom discretization of N(mu, sigma^2), affinely
/// corrected after construction so the first two moments match to 1e-10.
struct ImputationSpec {
  enum class Kind { two_point, normal_clipped };
  Kind kind = Kind::two_point;
};

/// Per-state statistic vectors: n_states rows by m columns.
using StatisticVector = Matrix;

/// Exact finite-sum statistics of a distribution.
std::vector<double> apply_sketch(const SketchSpec& spec,
                                 const DiscreteDistribution& dist);
std::vector<double> apply_sketch(const SketchSpec& spec,
                                 const CategoricalReturn& dist);

StatisticVector apply_sketch(const SketchSpec& spec, const ReturnFunction& eta);

/// Inverts a statistic vector into a distribution. Throws
/// std::invalid_argument when s lies outside the sketch image
/// (second moment below squared mean beyond 1e-12 slack).
DiscreteDistribution impute(const ImputationSpec& imp, const SketchSpec& spec,
                            std::span<const double> s);

/// Second-moment backup cross term. `reward_weighted` is the recursion under
/// which the two-moment sketch commutes with the distributional backup;
/// `unweighted` drops the mean-reward factor and is kept only for comparison
/// runs (it breaks the commutation).
enum class CrossTerm { reward_weighted, unweighted };

/// One application of the moment Bellman operator for the first m moments
/// (m in {1, 2}), computed by exact sums:
///   mu1'(x) = E[R] + gamma * E[mu1(X')]
///   mu2'(x) = E[R^2] + 2 gamma E[R * mu1(X')] + gamma^2 E[mu2(X')]
/// with expectations over a ~ pi(.|x), reward atoms, and X' ~ P(x, a).
StatisticVector moment_backup(const TabularMDP& mdp, const Policy& policy,
                              const StatisticVector& s, int m,
                              CrossTerm cross = CrossTerm::reward_weighted);

/// How the sketch fixed point is iterated: via the closed-form moment
/// operator, or by imputing a distribution, applying one exact unprojected
/// distributional backup, and re-sketching.
enum class SketchDpMode { closed_form, impute_backup };

/// Fixed point of the sketch Bellman iteration, from zero statistics, until
/// the sup-norm change drops below `tol`. The two modes agree whenever the
/// imputation is exact.
StatisticVector sketch_fixed_point(const TabularMDP& mdp, const Policy& policy,
                                   const SketchSpec& sketch,
                                   const ImputationSpec& imputation,
                                   SketchDpMode mode, double tol);

/// Image-membership diagnostics for two-moment statistics: checks
/// mu2 >= mu1^2 (with 1e-12 slack) and mu1 within the return bound.
std::vector<std::string> validate_statistics(const StatisticVector& s,
                                             const SketchSpec& spec,
                                             const TabularMDP& mdp);

/// Converts between (mean, variance) and raw-moment coordinates.
std::vector<double> to_raw_moments(const SketchSpec& spec,
                                   std::span<const double> s);
std::vector<double> from_raw_moments(const SketchSpec& spec,
                                     std::span<const double> raw);

}  // namespace riskdp
