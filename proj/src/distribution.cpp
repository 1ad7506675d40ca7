#include "riskdp/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riskdp {

double DiscreteDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) m += atoms[i] * probs[i];
  return m;
}

double DiscreteDistribution::moment(int order) const {
  double m = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i)
    m += std::pow(atoms[i], order) * probs[i];
  return m;
}

double DiscreteDistribution::variance() const {
  double mu = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    double d = atoms[i] - mu;
    v += d * d * probs[i];
  }
  return v;
}

DiscreteDistribution DiscreteDistribution::point_mass(double value) {
  return DiscreteDistribution{{value}, {1.0}};
}

DiscreteDistribution DiscreteDistribution::from_weighted_atoms(
    std::vector<std::pair<double, double>> weighted, double merge_eps) {
  std::sort(weighted.begin(), weighted.end());
  DiscreteDistribution out;
  double total = 0.0;
  for (const auto& [z, w] : weighted) {
    if (w <= 0.0) continue;
    total += w;
    if (!out.atoms.empty() && z - out.atoms.back() <= merge_eps) {
      out.probs.back() += w;
    } else {
      out.atoms.push_back(z);
      out.probs.push_back(w);
    }
  }
  if (out.atoms.empty()) return point_mass(0.0);
  for (double& p : out.probs) p /= total;
  return out;
}

std::vector<std::string> validate_distribution(const DiscreteDistribution& d) {
  std::vector<std::string> errs;
  if (d.atoms.size() != d.probs.size())
    errs.push_back("atoms and probs have different lengths");
  if (d.atoms.empty()) errs.push_back("distribution has no atoms");
  double sum = 0.0;
  for (std::size_t i = 0; i < d.probs.size(); ++i) {
    if (d.probs[i] < 0.0) {
      std::ostringstream os;
      os << "negative probability at atom index " << i;
      errs.push_back(os.str());
    }
    sum += d.probs[i];
  }
  if (!d.probs.empty() && std::abs(sum - 1.0) > 1e-12)
    errs.push_back("probabilities sum to " + std::to_string(sum));
  for (std::size_t i = 0; i + 1 < d.atoms.size(); ++i) {
    if (!(d.atoms[i] < d.atoms[i + 1])) {
      std::ostringstream os;
      os << "atoms not strictly increasing at index " << i;
      errs.push_back(os.str());
    }
  }
  return errs;
}

}  // namespace riskdp
