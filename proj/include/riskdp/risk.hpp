#pragma once

#include <span>
#include <string>
#include <vector>

#include "riskdp/categorical.hpp"
#include "riskdp/distribution.hpp"

namespace riskdp {

/// Tagged descriptor of a risk measure over return distributions.
///
/// Spectral measures are restricted to step-function densities on [0, 1]:
/// breakpoints 0 = u_0 < ... < u_K = 1 with nonincreasing nonnegative levels
/// integrating to one. This keeps every integral exact on finite-support
/// distributions and covers both expectation and CVaR as special cases.
struct RiskSpec {
  enum class Kind { neutral, cvar, mean_variance, spectral };

  Kind kind = Kind::neutral;
  double tau = 1.0;     // cvar level in (0, 1]
  double lambda = 1.0;  // mean-variance weight, positive
  std::vector<double> breakpoints;  // spectral: size K+1
  std::vector<double> levels;       // spectral: size K

  static RiskSpec neutral() { return {}; }
  static RiskSpec cvar(double tau);
  static RiskSpec mean_variance(double lambda);
  static RiskSpec spectral(std::vector<double> breakpoints,
                           std::vector<double> levels);

  /// Step density with value 1/tau on [0, tau]; equals cvar(tau).
  static RiskSpec cvar_as_spectral(double tau);

  std::string describe() const;
};

std::vector<std::string> validate_risk(const RiskSpec& spec);

/// Generalized inverse CDF, inf{z : F(z) >= u}, by atom scan. u in (0, 1].
double quantile(const DiscreteDistribution& dist, double u);
double quantile(const CategoricalReturn& dist, double u);

/// Exact integral of the quantile function over [a, b] within [0, 1].
double quantile_integral(const DiscreteDistribution& dist, double a, double b);
double quantile_integral(const CategoricalReturn& dist, double a, double b);

/// Evaluates the risk measure exactly (piecewise on atoms, no sampling).
double risk_value(const RiskSpec& spec, const DiscreteDistribution& dist);
double risk_value(const RiskSpec& spec, const CategoricalReturn& dist);

/// Mean of the ceil(tau * n) smallest samples; ties by sort order.
/// Throws std::invalid_argument on empty input or tau outside (0, 1].
double empirical_cvar(std::span<const double> samples, double tau);

struct DominanceReport {
  bool holds = false;        // risk_a(x) >= risk_b(x) - tol for every state
  double min_margin = 0.0;   // min over states of risk_a(x) - risk_b(x)
  std::vector<int> strict_states;  // states with margin beyond tol
};

/// Per-state comparison of risk values of two return functions.
DominanceReport dominance_report(const RiskSpec& risk, const ReturnFunction& a,
                                 const ReturnFunction& b, double tol = 1e-10);

/// True iff `a` dominates `b`: risk of a is at least risk of b minus `tol`
/// at every state.
bool dominates(const RiskSpec& risk, const ReturnFunction& a,
               const ReturnFunction& b, double tol = 1e-10);

}  // namespace riskdp
