#include "riskdp/sketch.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace riskdp {

namespace {

constexpr double kImageSlack = 1e-12;
constexpr int kNormalAtoms = 33;

void check_sketch(const SketchSpec& spec) {
  if (spec.m < 1) throw std::invalid_argument("sketch dimension must be >= 1");
  if (spec.kind == SketchSpec::Kind::mean_variance && spec.m != 2)
    throw std::invalid_argument("mean_variance sketch has dimension 2");
}

}  // namespace

std::string SketchSpec::describe() const {
  if (kind == Kind::mean_variance) return "mean_variance";
  std::ostringstream os;
  os << "moments(" << m << ")";
  return os.str();
}

std::vector<double> apply_sketch(const SketchSpec& spec,
                                 const DiscreteDistribution& dist) {
  check_sketch(spec);
  if (spec.kind == SketchSpec::Kind::mean_variance)
    return {dist.mean(), dist.variance()};
  std::vector<double> out(spec.m, 0.0);
  for (std::size_t i = 0; i < dist.atoms.size(); ++i) {
    double zk = 1.0;
    for (int k = 0; k < spec.m; ++k) {
      zk *= dist.atoms[i];
      out[k] += zk * dist.probs[i];
    }
  }
  return out;
}

std::vector<double> apply_sketch(const SketchSpec& spec,
                                 const CategoricalReturn& dist) {
  check_sketch(spec);
  if (spec.kind == SketchSpec::Kind::mean_variance) {
    double mu = dist.mean();
    return {mu, dist.moment(2) - mu * mu};
  }
  std::vector<double> out(spec.m, 0.0);
  for (int i = 0; i < dist.grid.n_atoms; ++i) {
    double zk = 1.0;
    for (int k = 0; k < spec.m; ++k) {
      zk *= dist.grid.atom(i);
      out[k] += zk * dist.probs[i];
    }
  }
  return out;
}

StatisticVector apply_sketch(const SketchSpec& spec, const ReturnFunction& eta) {
  StatisticVector s(eta.probs.rows, spec.m, 0.0);
  for (int x = 0; x < eta.probs.rows; ++x) {
    auto v = apply_sketch(spec, eta.state(x));
    for (int k = 0; k < spec.m; ++k) s(x, k) = v[k];
  }
  return s;
}

std::vector<double> to_raw_moments(const SketchSpec& spec,
                                   std::span<const double> s) {
  if (spec.kind == SketchSpec::Kind::mean_variance)
    return {s[0], s[1] + s[0] * s[0]};
  return std::vector<double>(s.begin(), s.end());
}

std::vector<double> from_raw_moments(const SketchSpec& spec,
                                     std::span<const double> raw) {
  if (spec.kind == SketchSpec::Kind::mean_variance)
    return {raw[0], raw[1] - raw[0] * raw[0]};
  return std::vector<double>(raw.begin(), raw.end());
}

DiscreteDistribution impute(const ImputationSpec& imp, const SketchSpec& spec,
                            std::span<const double> s) {
  check_sketch(spec);
  if (static_cast<int>(s.size()) != spec.m)
    throw std::invalid_argument("statistic vector has wrong length");

  if (spec.m == 1 && spec.kind == SketchSpec::Kind::moments)
    return DiscreteDistribution::point_mass(s[0]);
  if (spec.m != 2)
    throw std::invalid_argument(
        "imputation is only defined for two-dimensional sketches");

  auto raw = to_raw_moments(spec, s);
  double mu = raw[0];
  double var = raw[1] - mu * mu;
  if (var < -kImageSlack)
    throw std::invalid_argument(
        "statistics lie outside the sketch image (negative variance)");
  if (var < 0.0) var = 0.0;
  double sigma = std::sqrt(var);
  if (sigma == 0.0) return DiscreteDistribution::point_mass(mu);

  switch (imp.kind) {
    case ImputationSpec::Kind::two_point:
      return DiscreteDistribution{{mu - sigma, mu + sigma}, {0.5, 0.5}};
    case ImputationSpec::Kind::normal_clipped: {
      // Equispaced grid over mu +- 4 sigma weighted by the normal density,
      // then affinely corrected so the first two moments match exactly.
      std::vector<double> atoms(kNormalAtoms);
      std::vector<double> probs(kNormalAtoms);
      double total = 0.0;
      for (int i = 0; i < kNormalAtoms; ++i) {
        double t = -4.0 + 8.0 * i / (kNormalAtoms - 1);
        atoms[i] = mu + sigma * t;
        probs[i] = std::exp(-0.5 * t * t);
        total += probs[i];
      }
      double got_mean = 0.0;
      for (int i = 0; i < kNormalAtoms; ++i) {
        probs[i] /= total;
        got_mean += atoms[i] * probs[i];
      }
      double got_var = 0.0;
      for (int i = 0; i < kNormalAtoms; ++i) {
        double d = atoms[i] - got_mean;
        got_var += d * d * probs[i];
      }
      double scale = sigma / std::sqrt(got_var);
      for (int i = 0; i < kNormalAtoms; ++i)
        atoms[i] = mu + scale * (atoms[i] - got_mean);
      return DiscreteDistribution{std::move(atoms), std::move(probs)};
    }
  }
  throw std::logic_error("unreachable");
}

StatisticVector moment_backup(const TabularMDP& mdp, const Policy& policy,
                              const StatisticVector& s, int m,
                              CrossTerm cross) {
  if (m < 1 || m > 2)
    throw std::invalid_argument("moment backup implements orders 1 and 2 only");
  if (s.rows != mdp.n_states || s.cols < m)
    throw std::invalid_argument("statistic table has wrong shape");

  StatisticVector out(mdp.n_states, s.cols, 0.0);
  const double g = mdp.gamma;
  for (int x = 0; x < mdp.n_states; ++x) {
    auto pi = policy.at(x);
    double mu1 = 0.0, mu2 = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (pi[a] == 0.0) continue;
      auto next = mdp.next_state_probs(x, a);
      double e1 = 0.0, e2 = 0.0;
      for (int y = 0; y < mdp.n_states; ++y) {
        if (next[y] == 0.0) continue;
        e1 += next[y] * s(y, 0);
        if (m == 2) e2 += next[y] * s(y, 1);
      }
      double rbar = mdp.mean_reward(x, a);
      mu1 += pi[a] * (rbar + g * e1);
      if (m == 2) {
        double r2 = mdp.second_moment_reward(x, a);
        double cross_coeff =
            cross == CrossTerm::reward_weighted ? 2.0 * g * rbar : 2.0 * g;
        mu2 += pi[a] * (r2 + cross_coeff * e1 + g * g * e2);
      }
    }
    out(x, 0) = mu1;
    if (m == 2) out(x, 1) = mu2;
  }
  return out;
}

namespace {

// One exact sweep of impute -> unprojected distributional backup -> sketch.
StatisticVector impute_backup_sweep(const TabularMDP& mdp, const Policy& policy,
                                    const SketchSpec& sketch,
                                    const ImputationSpec& imputation,
                                    const StatisticVector& s) {
  std::vector<DiscreteDistribution> imputed;
  imputed.reserve(mdp.n_states);
  for (int x = 0; x < mdp.n_states; ++x)
    imputed.push_back(impute(imputation, sketch, s.row(x)));

  StatisticVector out(s.rows, s.cols, 0.0);
  const double g = mdp.gamma;
  for (int x = 0; x < mdp.n_states; ++x) {
    auto pi = policy.at(x);
    // Raw moments of the backup mixture, accumulated atom by atom.
    std::vector<double> raw(sketch.m, 0.0);
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (pi[a] == 0.0) continue;
      const auto& rdist = mdp.reward_at(x, a);
      auto next = mdp.next_state_probs(x, a);
      for (std::size_t ri = 0; ri < rdist.atoms.size(); ++ri) {
        double w0 = pi[a] * rdist.probs[ri];
        if (w0 == 0.0) continue;
        double r = rdist.atoms[ri];
        for (int y = 0; y < mdp.n_states; ++y) {
          double w1 = w0 * next[y];
          if (w1 == 0.0) continue;
          const auto& source = imputed[y];
          for (std::size_t j = 0; j < source.atoms.size(); ++j) {
            double w = w1 * source.probs[j];
            if (w == 0.0) continue;
            double z = r + g * source.atoms[j];
            double zk = 1.0;
            for (int k = 0; k < sketch.m; ++k) {
              zk *= z;
              raw[k] += w * zk;
            }
          }
        }
      }
    }
    auto stats = from_raw_moments(sketch, raw);
    for (int k = 0; k < sketch.m; ++k) out(x, k) = stats[k];
  }
  return out;
}

}  // namespace

StatisticVector sketch_fixed_point(const TabularMDP& mdp, const Policy& policy,
                                   const SketchSpec& sketch,
                                   const ImputationSpec& imputation,
                                   SketchDpMode mode, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  check_sketch(sketch);
  StatisticVector s(mdp.n_states, sketch.m, 0.0);
  int cap = 1000;
  if (mdp.gamma > 0.0) {
    double needed = std::log(tol * 1e-3) / std::log(mdp.gamma);
    cap = std::max(cap, static_cast<int>(needed) * 4);
  }
  for (int it = 0; it < cap; ++it) {
    StatisticVector next;
    if (mode == SketchDpMode::closed_form) {
      StatisticVector raw_in(s.rows, s.cols, 0.0);
      for (int x = 0; x < s.rows; ++x) {
        auto raw = to_raw_moments(sketch, s.row(x));
        for (int k = 0; k < sketch.m; ++k) raw_in(x, k) = raw[k];
      }
      StatisticVector raw_out = moment_backup(mdp, policy, raw_in, sketch.m);
      next = StatisticVector(s.rows, s.cols, 0.0);
      for (int x = 0; x < s.rows; ++x) {
        auto st = from_raw_moments(sketch, raw_out.row(x));
        for (int k = 0; k < sketch.m; ++k) next(x, k) = st[k];
      }
    } else {
      next = impute_backup_sweep(mdp, policy, sketch, imputation, s);
    }
    double change = max_abs_diff(next, s);
    s = std::move(next);
    if (change < tol) break;
  }
  return s;
}

std::vector<std::string> validate_statistics(const StatisticVector& s,
                                             const SketchSpec& spec,
                                             const TabularMDP& mdp) {
  std::vector<std::string> errs;
  double bound = mdp.return_bound();
  for (int x = 0; x < s.rows; ++x) {
    auto raw = to_raw_moments(spec, s.row(x));
    if (std::abs(raw[0]) > bound + 1e-9) {
      std::ostringstream os;
      os << "state " << x << ": mean " << raw[0]
         << " exceeds the return bound " << bound;
      errs.push_back(os.str());
    }
    if (spec.m >= 2 && raw[1] < raw[0] * raw[0] - kImageSlack) {
      std::ostringstream os;
      os << "state " << x << ": second moment below squared mean";
      errs.push_back(os.str());
    }
  }
  return errs;
}

}  // namespace riskdp
