#include "riskdp/categorical.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace riskdp {

GridSpec GridSpec::return_range(const TabularMDP& mdp, int n_atoms) {
  double bound = mdp.return_bound();
  if (bound <= 0.0) bound = 1.0;
  return GridSpec{-bound, bound, n_atoms};
}

bool GridSpec::covers_return_range(const TabularMDP& mdp) const {
  double bound = mdp.return_bound();
  return v_min <= -bound + 1e-12 && v_max >= bound - 1e-12;
}

double CategoricalReturn::mean() const {
  double m = 0.0;
  for (int i = 0; i < grid.n_atoms; ++i) m += grid.atom(i) * probs[i];
  return m;
}

double CategoricalReturn::moment(int order) const {
  double m = 0.0;
  for (int i = 0; i < grid.n_atoms; ++i)
    m += std::pow(grid.atom(i), order) * probs[i];
  return m;
}

double CategoricalReturn::total_mass() const {
  double m = 0.0;
  for (double p : probs) m += p;
  return m;
}

DiscreteDistribution CategoricalReturn::to_discrete() const {
  std::vector<std::pair<double, double>> weighted;
  weighted.reserve(probs.size());
  for (int i = 0; i < grid.n_atoms; ++i)
    if (probs[i] > 0.0) weighted.emplace_back(grid.atom(i), probs[i]);
  return DiscreteDistribution::from_weighted_atoms(std::move(weighted), 0.0);
}

CategoricalReturn CategoricalReturn::point_mass(const GridSpec& grid,
                                                double value) {
  double atom[1] = {value};
  double prob[1] = {1.0};
  return categorical_project(atom, prob, grid);
}

ReturnFunction ReturnFunction::point_mass(const GridSpec& grid, int n_states,
                                          double value) {
  ReturnFunction eta{grid, Matrix(n_states, grid.n_atoms, 0.0)};
  CategoricalReturn one = CategoricalReturn::point_mass(grid, value);
  for (int x = 0; x < n_states; ++x) {
    auto row = eta.probs.row(x);
    for (int i = 0; i < grid.n_atoms; ++i) row[i] = one.probs[i];
  }
  return eta;
}

double max_l1_distance(const ReturnFunction& a, const ReturnFunction& b) {
  assert(a.grid == b.grid && a.probs.same_shape(b.probs));
  double worst = 0.0;
  for (int x = 0; x < a.probs.rows; ++x) {
    double l1 = 0.0;
    auto ra = a.probs.row(x);
    auto rb = b.probs.row(x);
    for (int i = 0; i < a.probs.cols; ++i) l1 += std::abs(ra[i] - rb[i]);
    if (l1 > worst) worst = l1;
  }
  return worst;
}

void project_into(std::span<const double> atoms, std::span<const double> probs,
                  const GridSpec& grid, std::span<double> out, double weight,
                  ClipRule rule) {
  assert(atoms.size() == probs.size());
  assert(static_cast<int>(out.size()) == grid.n_atoms);
  const double inv_spacing = 1.0 / grid.spacing();
  const int last = grid.n_atoms - 1;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    double mass = weight * probs[j];
    if (mass == 0.0) continue;
    double z = atoms[j];
    if (z <= grid.v_min) {
      if (rule == ClipRule::boundary || z == grid.v_min) out[0] += mass;
      continue;
    }
    if (z >= grid.v_max) {
      if (rule == ClipRule::boundary || z == grid.v_max) out[last] += mass;
      continue;
    }
    double pos = (z - grid.v_min) * inv_spacing;
    int lo = static_cast<int>(pos);
    if (lo >= last) lo = last - 1;
    double frac = pos - lo;
    out[lo] += mass * (1.0 - frac);
    out[lo + 1] += mass * frac;
  }
}

CategoricalReturn categorical_project(std::span<const double> atoms,
                                      std::span<const double> probs,
                                      const GridSpec& grid, ClipRule rule) {
  CategoricalReturn result{grid, std::vector<double>(grid.n_atoms, 0.0)};
  project_into(atoms, probs, grid, result.probs, 1.0, rule);
  return result;
}

DiscreteDistribution pushforward(const DiscreteDistribution& dist, double r,
                                 double gamma) {
  if (gamma == 0.0) return DiscreteDistribution::point_mass(r);
  DiscreteDistribution out;
  out.atoms.reserve(dist.atoms.size());
  out.probs = dist.probs;
  for (double z : dist.atoms) out.atoms.push_back(r + gamma * z);
  return out;
}

CategoricalReturn pushforward(const CategoricalReturn& dist, double r,
                              double gamma) {
  if (!(gamma > 0.0))
    throw std::invalid_argument(
        "grid pushforward requires gamma > 0; the image grid degenerates");
  GridSpec image{r + gamma * dist.grid.v_min, r + gamma * dist.grid.v_max,
                 dist.grid.n_atoms};
  return CategoricalReturn{image, dist.probs};
}

}  // namespace riskdp
