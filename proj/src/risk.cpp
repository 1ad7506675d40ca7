#include "riskdp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace riskdp {

namespace {

// Shared cores over an indexed atom/prob view, so the discrete and
// grid-supported representations use identical arithmetic.

template <typename AtomFn, typename ProbFn>
double quantile_impl(int n, AtomFn z, ProbFn p, double u) {
  if (!(u > 0.0 && u <= 1.0))
    throw std::invalid_argument("quantile level must lie in (0, 1]");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += p(i);
    if (acc >= u) return z(i);
  }
  // Rounding left acc slightly below one; the top atom carries the rest.
  for (int i = n; i-- > 0;)
    if (p(i) > 0.0) return z(i);
  return z(n - 1);
}

template <typename AtomFn, typename ProbFn>
double quantile_integral_impl(int n, AtomFn z, ProbFn p, double a, double b) {
  if (!(a >= 0.0 && b <= 1.0 + 1e-15 && a <= b))
    throw std::invalid_argument("integral bounds must satisfy 0 <= a <= b <= 1");
  double acc = 0.0;   // cumulative probability before atom i
  double total = 0.0;
  for (int i = 0; i < n && acc < b; ++i) {
    double next = acc + p(i);
    double lo = std::max(acc, a);
    double hi = std::min(next, b);
    if (hi > lo) total += z(i) * (hi - lo);
    acc = next;
  }
  // Cover b beyond the accumulated mass (rounding): extend the top atom.
  if (b > acc) {
    for (int i = n; i-- > 0;)
      if (p(i) > 0.0) {
        total += z(i) * (b - acc);
        break;
      }
  }
  return total;
}

template <typename AtomFn, typename ProbFn>
double mean_impl(int n, AtomFn z, ProbFn p) {
  double m = 0.0;
  for (int i = 0; i < n; ++i) m += z(i) * p(i);
  return m;
}

template <typename AtomFn, typename ProbFn>
double risk_value_impl(const RiskSpec& spec, int n, AtomFn z, ProbFn p) {
  switch (spec.kind) {
    case RiskSpec::Kind::neutral:
      return mean_impl(n, z, p);
    case RiskSpec::Kind::cvar:
      return quantile_integral_impl(n, z, p, 0.0, spec.tau) / spec.tau;
    case RiskSpec::Kind::mean_variance: {
      double mu = mean_impl(n, z, p);
      double m2 = 0.0;
      for (int i = 0; i < n; ++i) m2 += z(i) * z(i) * p(i);
      return mu - spec.lambda * (m2 - mu * mu);
    }
    case RiskSpec::Kind::spectral: {
      double total = 0.0;
      for (std::size_t k = 0; k < spec.levels.size(); ++k) {
        if (spec.levels[k] == 0.0) continue;
        total += spec.levels[k] * quantile_integral_impl(n, z, p,
                                                         spec.breakpoints[k],
                                                         spec.breakpoints[k + 1]);
      }
      return total;
    }
  }
  return 0.0;
}

}  // namespace

RiskSpec RiskSpec::cvar(double tau) {
  RiskSpec s;
  s.kind = Kind::cvar;
  s.tau = tau;
  return s;
}

RiskSpec RiskSpec::mean_variance(double lambda) {
  RiskSpec s;
  s.kind = Kind::mean_variance;
  s.lambda = lambda;
  return s;
}

RiskSpec RiskSpec::spectral(std::vector<double> breakpoints,
                            std::vector<double> levels) {
  RiskSpec s;
  s.kind = Kind::spectral;
  s.breakpoints = std::move(breakpoints);
  s.levels = std::move(levels);
  return s;
}

RiskSpec RiskSpec::cvar_as_spectral(double tau) {
  if (tau >= 1.0) return spectral({0.0, 1.0}, {1.0});
  return spectral({0.0, tau, 1.0}, {1.0 / tau, 0.0});
}

std::string RiskSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::neutral:
      os << "neutral";
      break;
    case Kind::cvar:
      os << "cvar(" << tau << ")";
      break;
    case Kind::mean_variance:
      os << "mean_variance(" << lambda << ")";
      break;
    case Kind::spectral:
      os << "spectral(" << levels.size() << " steps)";
      break;
  }
  return os.str();
}

std::vector<std::string> validate_risk(const RiskSpec& spec) {
  std::vector<std::string> errs;
  switch (spec.kind) {
    case RiskSpec::Kind::neutral:
      break;
    case RiskSpec::Kind::cvar:
      if (!(spec.tau > 0.0 && spec.tau <= 1.0))
        errs.push_back("cvar level must lie in (0, 1]");
      break;
    case RiskSpec::Kind::mean_variance:
      if (!(spec.lambda > 0.0))
        errs.push_back("mean-variance weight must be positive");
      break;
    case RiskSpec::Kind::spectral: {
      if (spec.breakpoints.size() != spec.levels.size() + 1 ||
          spec.levels.empty()) {
        errs.push_back("spectral breakpoints/levels have inconsistent sizes");
        break;
      }
      if (spec.breakpoints.front() != 0.0 ||
          std::abs(spec.breakpoints.back() - 1.0) > 1e-15)
        errs.push_back("spectral breakpoints must start at 0 and end at 1");
      double integral = 0.0;
      for (std::size_t k = 0; k < spec.levels.size(); ++k) {
        if (spec.breakpoints[k] >= spec.breakpoints[k + 1])
          errs.push_back("spectral breakpoints must be strictly increasing");
        if (spec.levels[k] < 0.0)
          errs.push_back("spectral levels must be nonnegative");
        if (k > 0 && spec.levels[k] > spec.levels[k - 1] + 1e-15)
          errs.push_back("spectral levels must be nonincreasing");
        integral +=
            spec.levels[k] * (spec.breakpoints[k + 1] - spec.breakpoints[k]);
      }
      if (std::abs(integral - 1.0) > 1e-10)
        errs.push_back("spectral density must integrate to one");
      break;
    }
  }
  return errs;
}

double quantile(const DiscreteDistribution& dist, double u) {
  return quantile_impl(
      static_cast<int>(dist.atoms.size()),
      [&](int i) { return dist.atoms[i]; }, [&](int i) { return dist.probs[i]; },
      u);
}

double quantile(const CategoricalReturn& dist, double u) {
  return quantile_impl(
      dist.grid.n_atoms, [&](int i) { return dist.grid.atom(i); },
      [&](int i) { return dist.probs[i]; }, u);
}

double quantile_integral(const DiscreteDistribution& dist, double a, double b) {
  return quantile_integral_impl(
      static_cast<int>(dist.atoms.size()),
      [&](int i) { return dist.atoms[i]; }, [&](int i) { return dist.probs[i]; },
      a, b);
}

double quantile_integral(const CategoricalReturn& dist, double a, double b) {
  return quantile_integral_impl(
      dist.grid.n_atoms, [&](int i) { return dist.grid.atom(i); },
      [&](int i) { return dist.probs[i]; }, a, b);
}

double risk_value(const RiskSpec& spec, const DiscreteDistribution& dist) {
  return risk_value_impl(
      spec, static_cast<int>(dist.atoms.size()),
      [&](int i) { return dist.atoms[i]; },
      [&](int i) { return dist.probs[i]; });
}

double risk_value(const RiskSpec& spec, const CategoricalReturn& dist) {
  return risk_value_impl(
      spec, dist.grid.n_atoms, [&](int i) { return dist.grid.atom(i); },
      [&](int i) { return dist.probs[i]; });
}

double empirical_cvar(std::span<const double> samples, double tau) {
  if (samples.empty())
    throw std::invalid_argument("empirical_cvar needs at least one sample");
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("cvar level must lie in (0, 1]");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t k = static_cast<std::size_t>(
      std::ceil(tau * static_cast<double>(sorted.size())));
  if (k == 0) k = 1;
  if (k > sorted.size()) k = sorted.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += sorted[i];
  return sum / static_cast<double>(k);
}

DominanceReport dominance_report(const RiskSpec& risk, const ReturnFunction& a,
                                 const ReturnFunction& b, double tol) {
  if (a.probs.rows != b.probs.rows)
    throw std::invalid_argument("return functions have different state counts");
  DominanceReport report;
  report.holds = true;
  report.min_margin = std::numeric_limits<double>::infinity();
  for (int x = 0; x < a.probs.rows; ++x) {
    double margin = risk_value(risk, a.state(x)) - risk_value(risk, b.state(x));
    report.min_margin = std::min(report.min_margin, margin);
    if (margin < -tol) report.holds = false;
    if (margin > tol) report.strict_states.push_back(x);
  }
  return report;
}

bool dominates(const RiskSpec& risk, const ReturnFunction& a,
               const ReturnFunction& b, double tol) {
  return dominance_report(risk, a, b, tol).holds;
}

}  // namespace riskdp
