#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "riskdp/dist_dp.hpp"
#include "riskdp/experiment.hpp"
#include "riskdp/rng.hpp"
#include "riskdp/trajectory.hpp"

namespace riskdp {

namespace {

// Returns an empty optional on success, a message on failure.
using Check = std::function<std::optional<std::string>(Profile)>;

struct Property {
  std::string name;
  Check check;
};

TabularMDP random_mdp(int n_states, int n_actions, double gamma, double r_max,
                      std::uint64_t seed) {
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
    double a = r_max * (2.0 * rng.uniform01() - 1.0);
    double b = r_max * (2.0 * rng.uniform01() - 1.0);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-9) b = std::min(r_max, a + 0.1 * r_max + 1e-6);
    double p = 0.2 + 0.6 * rng.uniform01();
    mdp.reward.push_back(DiscreteDistribution{{a, b}, {p, 1.0 - p}});
  }
  return mdp;
}

Policy random_policy(int n_states, int n_actions, std::uint64_t seed) {
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

ReturnFunction random_return_function(const GridSpec& grid, int n_states,
                                      std::uint64_t seed) {
  SplitRng rng(seed);
  ReturnFunction eta{grid, Matrix(n_states, grid.n_atoms, 0.0)};
  for (int x = 0; x < n_states; ++x) {
    auto row = eta.probs.row(x);
    double total = 0.0;
    for (int i = 0; i < grid.n_atoms; ++i) {
      double u = rng.uniform01();
      row[i] = u < 0.8 ? 0.0 : rng.exponential();
      total += row[i];
    }
    if (total == 0.0) {
      row[grid.n_atoms / 2] = 1.0;
      total = 1.0;
    }
    for (int i = 0; i < grid.n_atoms; ++i) row[i] /= total;
  }
  return eta;
}

std::optional<std::string> fail(const std::string& msg) { return msg; }

std::optional<std::string> check_trajectory_determinism(Profile) {
  EnvSpec spec;
  spec.name = "coin_flip";
  BuiltEnv env = build_env(spec);
  Policy policy = random_policy(1, 2, 7);
  Trajectory a = sample_trajectory(env.mdp, policy, 0, 40, 123);
  Trajectory b = sample_trajectory(env.mdp, policy, 0, 40, 123);
  if (a.steps.size() != b.steps.size() ||
      a.discounted_return != b.discounted_return)
    return fail("same seed produced different trajectories");
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    if (a.steps[i].action != b.steps[i].action ||
        a.steps[i].reward != b.steps[i].reward ||
        a.steps[i].next_state != b.steps[i].next_state)
      return fail("same seed produced different steps");
  }
  return std::nullopt;
}

std::optional<std::string> check_truncation_bound(Profile profile) {
  int n = profile == Profile::fast ? 5 : 20;
  for (int i = 0; i < n; ++i) {
    TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 100 + i);
    Policy policy = random_policy(4, 2, 200 + i);
    for (int h : {8, 16}) {
      Trajectory short_t = sample_trajectory(mdp, policy, 0, h, 33 + i);
      Trajectory long_t = sample_trajectory(mdp, policy, 0, 2 * h, 33 + i);
      for (int t = 0; t < h; ++t)
        if (short_t.steps[t].reward != long_t.steps[t].reward)
          return fail("horizon extension changed the trajectory prefix");
      double bound = std::pow(mdp.gamma, h) * mdp.r_max / (1.0 - mdp.gamma);
      double delta =
          std::abs(short_t.discounted_return - long_t.discounted_return);
      if (delta > bound + 1e-12) return fail("truncation bound violated");
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_projection_mass_mean(Profile profile,
                                                      ClipRule rule) {
  int n = profile == Profile::fast ? 50 : 300;
  GridSpec grid{-2.0, 2.0, 41};
  SplitRng rng(42);
  for (int i = 0; i < n; ++i) {
    int n_atoms = 1 + static_cast<int>(rng.uniform01() * 6);
    std::vector<double> atoms, probs;
    bool outside = false;
    double total = 0.0;
    for (int j = 0; j < n_atoms; ++j) {
      double z = -3.0 + 6.0 * rng.uniform01();  // may fall outside the grid
      if (z < grid.v_min || z > grid.v_max) outside = true;
      atoms.push_back(z);
      double w = rng.exponential();
      probs.push_back(w);
      total += w;
    }
    for (double& p : probs) p /= total;
    std::sort(atoms.begin(), atoms.end());
    CategoricalReturn projected = categorical_project(atoms, probs, grid, rule);
    if (std::abs(projected.total_mass() - 1.0) > 1e-12)
      return fail("projection lost probability mass");
    if (!outside) {
      double mean_in = 0.0;
      for (int j = 0; j < n_atoms; ++j) mean_in += atoms[j] * probs[j];
      if (std::abs(projected.mean() - mean_in) > 1e-12)
        return fail("projection moved the mean of interior atoms");
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_backup_nonexpansion(Profile profile) {
  int n = profile == Profile::fast ? 10 : 40;
  for (int i = 0; i < n; ++i) {
    TabularMDP mdp = random_mdp(4, 2, 0.7, 1.0, 300 + i);
    GridSpec grid = GridSpec::return_range(mdp, 101);
    Policy policy = random_policy(4, 2, 400 + i);
    ReturnFunction eta1 = random_return_function(grid, 4, 500 + i);
    ReturnFunction eta2 = random_return_function(grid, 4, 600 + i);
    double before = max_l1_distance(eta1, eta2);
    double after = max_l1_distance(distributional_backup(mdp, policy, eta1),
                                   distributional_backup(mdp, policy, eta2));
    if (after > before + 1e-10)
      return fail("projected backup expanded the L1 distance");
  }
  return std::nullopt;
}

std::optional<std::string> check_fixed_point_mean(Profile profile) {
  int n = profile == Profile::fast ? 5 : 15;
  for (int i = 0; i < n; ++i) {
    TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 700 + i);
    GridSpec grid = GridSpec::return_range(mdp, 201);
    Policy policy = random_policy(4, 2, 800 + i);
    ReturnFunction eta = return_distribution(mdp, policy, grid, 1e-9);
    std::vector<double> v = value_fixed_point(mdp, policy, 1e-12);
    for (int x = 0; x < 4; ++x)
      if (std::abs(eta.state(x).mean() - v[x]) > grid.spacing())
        return fail("distributional mean drifted from the value fixed point");
  }
  return std::nullopt;
}

std::optional<std::string> check_grid_consistency(Profile) {
  EnvSpec spec;
  spec.name = "coin_flip";
  BuiltEnv env = build_env(spec);
  Policy always_risky = deterministic_policy({1}, 2);
  RiskSpec risk = RiskSpec::cvar(0.5);
  double prev = 0.0;
  double prev_spacing = 0.0;
  bool first = true;
  for (int n_atoms : {101, 201, 401}) {
    GridSpec grid = GridSpec::return_range(env.mdp, n_atoms);
    ReturnFunction eta =
        return_distribution(env.mdp, always_risky, grid, 1e-10);
    double value = risk_value(risk, eta.state(0));
    if (!first && std::abs(value - prev) > prev_spacing)
      return fail("cvar moved by more than one previous grid spacing");
    prev = value;
    prev_spacing = grid.spacing();
    first = false;
  }
  return std::nullopt;
}

std::optional<std::string> check_imputation_exactness(Profile) {
  SplitRng rng(4242);
  for (int i = 0; i < 100; ++i) {
    double mu = 4.0 * (rng.uniform01() - 0.5);
    double var = rng.exponential();
    if (i % 10 == 0) var = 0.0;  // degenerate case
    std::vector<double> s = {mu, mu * mu + var};
    for (auto kind : {ImputationSpec::Kind::two_point,
                      ImputationSpec::Kind::normal_clipped}) {
      DiscreteDistribution d =
          impute(ImputationSpec{kind}, SketchSpec::moments(2), s);
      auto back = apply_sketch(SketchSpec::moments(2), d);
      if (std::abs(back[0] - s[0]) > 1e-10 || std::abs(back[1] - s[1]) > 1e-10)
        return fail("imputed distribution does not reproduce its statistics");
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_closedness_commutation(Profile profile,
                                                        CrossTerm cross) {
  int n = profile == Profile::fast ? 10 : 50;
  for (int i = 0; i < n; ++i) {
    TabularMDP mdp = random_mdp(4, 2, 0.7, 1.0, 900 + i);
    GridSpec grid = GridSpec::return_range(mdp, 401);
    Policy policy = random_policy(4, 2, 1000 + i);
    ReturnFunction eta = random_return_function(grid, 4, 1100 + i);
    StatisticVector via_dist =
        apply_sketch(SketchSpec::moments(2),
                     distributional_backup(mdp, policy, eta));
    StatisticVector via_moments = moment_backup(
        mdp, policy, apply_sketch(SketchSpec::moments(2), eta), 2, cross);
    if (max_abs_diff(via_dist, via_moments) > 2.0 * grid.spacing())
      return fail("sketch of the backup disagrees with the moment backup");
  }
  return std::nullopt;
}

std::optional<std::string> check_sketch_mode_agreement(Profile profile) {
  int n = profile == Profile::fast ? 5 : 10;
  for (int i = 0; i < n; ++i) {
    TabularMDP mdp = random_mdp(4, 2, 0.6, 1.0, 1200 + i);
    Policy policy = random_policy(4, 2, 1300 + i);
    for (auto kind : {ImputationSpec::Kind::two_point,
                      ImputationSpec::Kind::normal_clipped}) {
      StatisticVector closed = sketch_fixed_point(
          mdp, policy, SketchSpec::moments(2), ImputationSpec{kind},
          SketchDpMode::closed_form, 1e-11);
      StatisticVector imputed = sketch_fixed_point(
          mdp, policy, SketchSpec::moments(2), ImputationSpec{kind},
          SketchDpMode::impute_backup, 1e-11);
      if (max_abs_diff(closed, imputed) > 1e-8)
        return fail("closed-form and impute-backup fixed points disagree");
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_sketch_contraction(Profile) {
  TabularMDP mdp = random_mdp(5, 2, 0.8, 1.0, 1400);
  Policy policy = random_policy(5, 2, 1500);
  StatisticVector target = sketch_fixed_point(
      mdp, policy, SketchSpec::moments(2),
      ImputationSpec{ImputationSpec::Kind::two_point},
      SketchDpMode::closed_form, 1e-13);

  // First-moment error ratio from a zero start.
  {
    StatisticVector s(5, 2, 0.0);
    double prev = 0.0;
    for (int it = 0; it < 30; ++it) {
      s = moment_backup(mdp, policy, s, 2);
      double err = 0.0;
      for (int x = 0; x < 5; ++x)
        err = std::max(err, std::abs(s(x, 0) - target(x, 0)));
      if (it > 5 && prev > 1e-12) {
        double ratio = err / prev;
        if (ratio > mdp.gamma + 0.02)
          return fail("first-moment error contracted slower than gamma");
      }
      prev = err;
      if (err < 1e-13) break;
    }
  }
  // Second-moment ratio with the first moment seeded at its fixed point.
  {
    StatisticVector s(5, 2, 0.0);
    for (int x = 0; x < 5; ++x) s(x, 0) = target(x, 0);
    double prev = 0.0;
    for (int it = 0; it < 30; ++it) {
      s = moment_backup(mdp, policy, s, 2);
      double err = 0.0;
      for (int x = 0; x < 5; ++x)
        err = std::max(err, std::abs(s(x, 1) - target(x, 1)));
      if (it > 5 && prev > 1e-12) {
        double ratio = err / prev;
        if (ratio > mdp.gamma * mdp.gamma + 0.02)
          return fail("second-moment error contracted slower than gamma^2");
      }
      prev = err;
      if (err < 1e-13) break;
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_sketch_distdp_consistency(Profile profile) {
  std::vector<std::string> names = {"coin_flip"};
  if (profile == Profile::full) {
    names.push_back("windy_cliffs");
    names.push_back("four_rooms_risky");
    names.push_back("frozen_lake_8x8");
  }
  for (const auto& name : names) {
    EnvSpec spec;
    spec.name = name;
    BuiltEnv env = build_env(spec);
    GridSpec grid = GridSpec::return_range(env.mdp, 401);
    Policy policy = random_policy(env.mdp.n_states, env.mdp.n_actions, 77);
    StatisticVector via_sketch = sketch_fixed_point(
        env.mdp, policy, SketchSpec::moments(2),
        ImputationSpec{ImputationSpec::Kind::two_point},
        SketchDpMode::closed_form, 1e-10);
    ReturnFunction eta = return_distribution(env.mdp, policy, grid, 1e-8);
    StatisticVector via_dist = apply_sketch(SketchSpec::moments(2), eta);
    if (max_abs_diff(via_dist, via_sketch) > 2.0 * grid.spacing())
      return fail(name + ": sketch and distributional moments disagree");
  }
  return std::nullopt;
}

std::optional<std::string> check_cvar_monotone(Profile) {
  SplitRng rng(1600);
  for (int i = 0; i < 50; ++i) {
    int n = 2 + static_cast<int>(rng.uniform01() * 5);
    std::vector<std::pair<double, double>> weighted;
    for (int j = 0; j < n; ++j)
      weighted.emplace_back(4.0 * (rng.uniform01() - 0.5), rng.exponential());
    DiscreteDistribution d =
        DiscreteDistribution::from_weighted_atoms(weighted);
    double prev = -1e300;
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
      double v = risk_value(RiskSpec::cvar(tau), d);
      if (v < prev - 1e-12) return fail("cvar decreased in tau");
      prev = v;
    }
    if (std::abs(risk_value(RiskSpec::cvar(1.0), d) - d.mean()) > 1e-10)
      return fail("cvar at level one is not the mean");
  }
  return std::nullopt;
}

std::optional<std::string> check_spectral_consistency(Profile) {
  SplitRng rng(1700);
  RiskSpec flat = RiskSpec::spectral({0.0, 1.0}, {1.0});
  for (int i = 0; i < 100; ++i) {
    int n = 2 + static_cast<int>(rng.uniform01() * 5);
    std::vector<std::pair<double, double>> weighted;
    for (int j = 0; j < n; ++j)
      weighted.emplace_back(4.0 * (rng.uniform01() - 0.5), rng.exponential());
    DiscreteDistribution d =
        DiscreteDistribution::from_weighted_atoms(weighted);
    if (std::abs(risk_value(flat, d) - d.mean()) > 1e-10)
      return fail("flat spectral density is not the mean");
    double tau = 0.05 + 0.9 * rng.uniform01();
    double via_spectral = risk_value(RiskSpec::cvar_as_spectral(tau), d);
    double via_cvar = risk_value(RiskSpec::cvar(tau), d);
    if (std::abs(via_spectral - via_cvar) > 1e-10)
      return fail("spectral step density disagrees with cvar");
  }
  return std::nullopt;
}

std::optional<std::string> check_risk_translation(Profile) {
  SplitRng rng(1800);
  for (int i = 0; i < 30; ++i) {
    int n = 2 + static_cast<int>(rng.uniform01() * 4);
    std::vector<std::pair<double, double>> weighted;
    for (int j = 0; j < n; ++j)
      weighted.emplace_back(2.0 * (rng.uniform01() - 0.5), rng.exponential());
    DiscreteDistribution d =
        DiscreteDistribution::from_weighted_atoms(weighted);
    double c = 2.0 * (rng.uniform01() - 0.5);
    DiscreteDistribution shifted = pushforward(d, c, 1.0);
    for (const RiskSpec& spec :
         {RiskSpec::cvar(0.4), RiskSpec::cvar_as_spectral(0.6),
          RiskSpec::mean_variance(0.7), RiskSpec::neutral()}) {
      double lhs = risk_value(spec, shifted);
      double rhs = risk_value(spec, d) + c;
      if (std::abs(lhs - rhs) > 1e-10)
        return fail("risk value is not translation equivariant");
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_risk_neutral_limits(Profile profile) {
  int n = profile == Profile::fast ? 4 : 10;
  int n_states = profile == Profile::fast ? 4 : 5;
  int found = 0;
  for (int i = 0; found < n && i < n * 20; ++i) {
    TabularMDP mdp = random_mdp(n_states, 2, 0.7, 1.0, 1900 + i);
    PlanResult neutral = risk_neutral_vi(mdp, 1e-12);
    // Unique-argmax filter.
    bool unique = true;
    for (int x = 0; x < mdp.n_states && unique; ++x) {
      auto row = neutral.action_values.row(x);
      int best = neutral.policy.greedy_actions()[x];
      for (int a = 0; a < mdp.n_actions; ++a)
        if (a != best && row[a] > row[best] - 1e-6) unique = false;
    }
    if (!unique) continue;
    ++found;

    GridSpec grid = GridSpec::return_range(mdp, 201);
    PlanResult budget = cvar_budget_vi(mdp, 1.0, grid, 65, 400, 0);
    if (budget.policy.greedy_actions() != neutral.policy.greedy_actions())
      return fail("cvar planning at level one left the risk-neutral argmax");
    PlanResult mv = mean_variance_vi(mdp, 1e-12, 1e-10);
    if (mv.policy.greedy_actions() != neutral.policy.greedy_actions())
      return fail("mean-variance planning at tiny weight left the argmax");
    BruteForceResult brute = brute_force_search(mdp, [&](const Policy& pi) {
      return value_fixed_point(mdp, pi, 1e-12);
    });
    if (brute.has_dominant &&
        brute.policy.greedy_actions() != neutral.policy.greedy_actions())
      return fail("value iteration disagrees with exhaustive enumeration");
  }
  if (found < n) return fail("could not find enough unique-optimum instances");
  return std::nullopt;
}

std::optional<std::string> check_planner_objective_consistency(Profile) {
  TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 2100);
  double lambda = 0.4, theta = 1e-10;
  PlanResult plan = mean_variance_vi(mdp, lambda, theta);
  StatisticVector s = sketch_fixed_point(
      mdp, plan.policy, SketchSpec::moments(2),
      ImputationSpec{ImputationSpec::Kind::two_point},
      SketchDpMode::closed_form, 1e-12);
  for (int x = 0; x < mdp.n_states; ++x) {
    double obj = s(x, 0) - lambda * (s(x, 1) - s(x, 0) * s(x, 0));
    if (std::abs(obj - plan.values[x]) > 1e-6)
      return fail("reported objective drifts from the independent evaluation");
    if (std::abs(plan.policy.at(x)[plan.policy.greedy_actions()[x]] - 1.0) >
        1e-15)
      return fail("planner policy row is not one-hot");
  }
  return std::nullopt;
}

std::optional<std::string> check_risk_gap_bound(Profile) {
  const double stake = 1.0, gamma = 0.5, tau = 0.5;
  EnvSpec spec;
  spec.name = "coin_flip";
  spec.stake = stake;
  spec.gamma = gamma;
  BuiltEnv env = build_env(spec);
  GridSpec grid = GridSpec::return_range(env.mdp, 401);
  RiskSpec risk = RiskSpec::cvar(tau);

  ReturnFunction safe = return_distribution(
      env.mdp, deterministic_policy({0}, 2), grid, 1e-10);
  ReturnFunction risky = return_distribution(
      env.mdp, deterministic_policy({1}, 2), grid, 1e-10);
  double gap = risk_value(risk, safe.state(0)) - risk_value(risk, risky.state(0));
  double expected = 2.0 * stake * (1.0 - tau);
  double eps = 1.0 - tau;
  double bound = env.mdp.r_max / (1.0 - gamma) * eps * (1.0 - 0.0 * (1 - eps));
  if (std::abs(gap - expected) > 0.02)
    return fail("risk gap is off its closed form");
  if (gap < bound - 0.02) return fail("risk gap fell below the lower bound");
  return std::nullopt;
}

std::optional<std::string> check_zero_loss_identity(Profile) {
  TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 2200);
  ApproxModel model = ApproxModel::from_mdp(mdp);
  for (int count : {3}) {
    PolicySet policies = sample_policies(mdp, count, 99);
    for (const auto& sketch : {SketchSpec::moments(1), SketchSpec::moments(2)}) {
      // The p = 1 loss sums absolute fixed-point residuals, so the targets
      // must be solved essentially to float noise.
      auto stats = true_statistics(mdp, policies, sketch, 1e-15);
      for (int k : {1, 2, 3}) {
        for (double p : {1.0, 2.0}) {
          double loss = equivalence_loss(stats, model, policies, sketch, k, p);
          if (loss > 1e-12)
            return fail("true model does not achieve zero loss");
        }
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_policy_sampling(Profile) {
  TabularMDP mdp = random_mdp(3, 4, 0.8, 1.0, 2300);
  PolicySet a = sample_policies(mdp, 200, 31);
  PolicySet b = sample_policies(mdp, 200, 31);
  for (std::size_t i = 0; i < a.policies.size(); ++i)
    if (max_abs_diff(a.policies[i].action_probs, b.policies[i].action_probs) !=
        0.0)
      return fail("same seed produced different policy sets");
  double mean = 0.0;
  for (const auto& policy : a.policies) mean += policy.at(0)[0];
  mean /= static_cast<double>(a.policies.size());
  // Flat Dirichlet marginal: mean 1/4, sd sqrt(3/80)/sqrt(200).
  double stderr_bound = 3.0 * std::sqrt(3.0 / 80.0 / 200.0);
  if (std::abs(mean - 0.25) > stderr_bound)
    return fail("policy entries drift from the flat Dirichlet mean");
  return std::nullopt;
}

std::optional<std::string> check_membership_true_model(Profile) {
  TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 2400);
  ApproxModel model = ApproxModel::from_mdp(mdp);
  PolicySet policies = sample_policies(mdp, 3, 55);
  GridSpec grid = GridSpec::return_range(mdp, 201);
  for (auto criterion :
       {MembershipCriterion::dist_k, MembershipCriterion::dist_proper,
        MembershipCriterion::psi_k, MembershipCriterion::psi_proper}) {
    MembershipQuery query;
    query.criterion = criterion;
    query.k = 2;
    query.sketch = SketchSpec::moments(2);
    MembershipReport report =
        membership_check(model, mdp, policies, query, grid, 1e-10);
    if (!report.all_pass)
      return fail("true model failed a membership criterion");
  }
  return std::nullopt;
}

std::optional<std::string> check_psi_k_nesting(Profile profile) {
  int n = profile == Profile::fast ? 5 : 15;
  for (int i = 0; i < n; ++i) {
    // Deliberately small discount and reward bound keep the iterated
    // operator Lipschitz below one on both moment coordinates.
    TabularMDP mdp = random_mdp(4, 2, 0.4, 0.5, 2500 + i);
    PolicySet policies = sample_policies(mdp, 3, 66 + i);
    SplitRng rng(2600 + i);
    ApproxModel model = ApproxModel::from_mdp(mdp);
    for (auto& v : model.logits.data) v += 1e-5 * (rng.uniform01() - 0.5);
    GridSpec grid = GridSpec::return_range(mdp, 201);
    MembershipQuery q1{MembershipCriterion::psi_k, 1, SketchSpec::moments(2)};
    MembershipQuery q2{MembershipCriterion::psi_k, 2, SketchSpec::moments(2)};
    MembershipReport r1 = membership_check(model, mdp, policies, q1, grid, 1e-5);
    if (!r1.all_pass) continue;  // only the implication is claimed
    MembershipReport r2 =
        membership_check(model, mdp, policies, q2, grid, 2e-5);
    if (!r2.all_pass)
      return fail("model passing order one failed order two at double tol");
  }
  return std::nullopt;
}

std::optional<std::string> check_mle_concentration(Profile) {
  TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 2700);
  TransitionDataset data = sample_dataset(mdp, 10000, 77);
  ApproxModel model = mle_model(MdpShape::of(mdp), data, 0.0);
  Matrix rows = model.realized_transition();
  for (int r = 0; r < rows.rows; ++r) {
    double l1 = 0.0;
    for (int y = 0; y < mdp.n_states; ++y)
      l1 += std::abs(rows(r, y) - mdp.transition(r, y));
    if (l1 > 0.05) return fail("mle transition rows concentrate too slowly");
  }
  return std::nullopt;
}

std::optional<std::string> check_mle_trend(Profile profile) {
  TabularMDP mdp = random_mdp(4, 2, 0.8, 1.0, 2800);
  int n_seeds = profile == Profile::fast ? 6 : 20;
  std::vector<int> sizes = profile == Profile::fast
                               ? std::vector<int>{4, 32, 256}
                               : std::vector<int>{4, 16, 64, 256, 1024};
  PolicySet policies = sample_policies(mdp, 5, 88);
  auto stats = true_statistics(mdp, policies, SketchSpec::moments(2), 1e-11);
  double prev = 1e300;
  for (int size : sizes) {
    double total = 0.0;
    for (int seed = 0; seed < n_seeds; ++seed) {
      TransitionDataset data = sample_dataset(mdp, size, 1000 + seed);
      ApproxModel model = mle_model(MdpShape::of(mdp), data, 1e-3);
      model.reward = mdp.reward;  // isolate the transition error
      total += equivalence_loss(stats, model, policies,
                                SketchSpec::moments(2), 1, 2.0);
    }
    double mean = total / n_seeds;
    if (mean > prev * 1.05)
      return fail("mle equivalence loss is not shrinking with data");
    prev = mean;
  }
  return std::nullopt;
}

std::optional<std::string> check_env_construction(Profile) {
  for (const std::string& name :
       {std::string("coin_flip"), std::string("four_rooms_risky"),
        std::string("windy_cliffs"), std::string("frozen_lake_8x8")}) {
    EnvSpec spec;
    spec.name = name;
    BuiltEnv env = build_env(spec);
    auto errs = validate_mdp(env.mdp);
    if (!errs.empty()) return fail(name + ": " + errs.front());
    // Pay states feed the sink; the sink absorbs with zero reward.
    int sink = env.meta.terminal_states.empty()
                   ? -1
                   : env.meta.terminal_states.front();
    if (name != "coin_flip") {
      sink = env.mdp.n_states - 1;
      for (int a = 0; a < env.mdp.n_actions; ++a) {
        if (std::abs(env.mdp.next_state_probs(sink, a)[sink] - 1.0) > 1e-15)
          return fail(name + ": sink state is not absorbing");
        if (env.mdp.reward_at(sink, a).mean() != 0.0)
          return fail(name + ": sink state pays a reward");
      }
      for (int x : env.meta.terminal_states) {
        if (x == sink) continue;
        for (int a = 0; a < env.mdp.n_actions; ++a)
          if (std::abs(env.mdp.next_state_probs(x, a)[sink] - 1.0) > 1e-15)
            return fail(name + ": pay state does not fall into the sink");
      }
    }
  }
  // Layouts are pinned by checksum.
  auto map_hash = [](const BuiltEnv& env) {
    std::string all;
    for (const auto& row : env.meta.map_rows) all += row + "\n";
    return fnv1a64(all);
  };
  EnvSpec four;
  four.name = "four_rooms_risky";
  if (map_hash(build_env(four)) != 0x15cac5faec4a89f4ULL)
    return fail("four_rooms_risky layout changed");
  EnvSpec cliffs;
  cliffs.name = "windy_cliffs";
  if (map_hash(build_env(cliffs)) != 0x769084d93492aecdULL)
    return fail("windy_cliffs layout changed");
  EnvSpec lake;
  lake.name = "frozen_lake_8x8";
  if (map_hash(build_env(lake)) != 0x9d14038d85399e31ULL)
    return fail("frozen_lake_8x8 layout changed");
  return std::nullopt;
}

std::optional<std::string> check_four_rooms_risky_expectation(Profile) {
  EnvSpec spec;
  spec.name = "four_rooms_risky";
  BuiltEnv env = build_env(spec);
  int risky_rows = 0;
  for (int x = 0; x < env.mdp.n_states; ++x) {
    for (int a = 0; a < env.mdp.n_actions; ++a) {
      const auto& d = env.mdp.reward_at(x, a);
      if (d.atoms.size() == 2) {
        ++risky_rows;
        if (std::abs(d.mean() - 0.02) > 1e-12)
          return fail("risky cell expectation is not 0.02");
      }
    }
  }
  if (risky_rows != 4 * 4) return fail("unexpected number of risky cells");
  return std::nullopt;
}

std::optional<std::string> check_frozen_lake_support(Profile profile) {
  EnvSpec spec;
  spec.name = "frozen_lake_8x8";
  BuiltEnv env = build_env(spec);
  Policy policy = random_policy(env.mdp.n_states, env.mdp.n_actions, 11);
  int n = profile == Profile::fast ? 200 : 2000;
  for (int i = 0; i < n; ++i) {
    Trajectory t = sample_trajectory(env.mdp, policy, env.meta.start_state,
                                     env.meta.horizon_cap, 5000 + i);
    double g = undiscounted_return(t);
    if (g != -1.0 && g != 0.0 && g != 1.0)
      return fail("episode return outside {-1, 0, 1}");
  }
  return std::nullopt;
}

std::optional<std::string> check_aggregation_order(Profile) {
  std::vector<ExperimentRow> rows;
  SplitRng rng(3111);
  for (int seed = 0; seed < 8; ++seed)
    for (const std::string& regime : {std::string("pve"), std::string("psi2")})
      rows.push_back(ExperimentRow{regime, "default",
                                   static_cast<std::uint64_t>(seed),
                                   rng.uniform01(), rng.uniform01(), 0.0, {}});
  auto base = aggregate_rows(rows);
  std::vector<ExperimentRow> permuted(rows.rbegin(), rows.rend());
  std::swap(permuted[0], permuted[5]);
  auto again = aggregate_rows(permuted);
  if (base.size() != again.size()) return fail("aggregate count changed");
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].regime != again[i].regime ||
        base[i].mean_cvar != again[i].mean_cvar ||
        base[i].ci95 != again[i].ci95)
      return fail("aggregation depends on row order");
  }
  return std::nullopt;
}

std::optional<std::string> check_experiment_determinism(Profile) {
  ExperimentConfig config;
  config.env.name = "coin_flip";
  config.regimes = {"pve", "psi2"};
  config.n_policies = 8;
  config.n_seeds = 2;
  config.n_eval_trajectories = 64;
  config.n_atoms = 101;
  config.learn.iters = 60;
  config.learn.step = 0.5;
  config.planner.iters = 40;
  config.master_seed = 5;

  namespace fs = std::filesystem;
  fs::path dir_a = fs::temp_directory_path() / "riskdp_prop_a";
  fs::path dir_b = fs::temp_directory_path() / "riskdp_prop_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  write_experiment_files(run_experiment(config), dir_a.string());
  write_experiment_files(run_experiment(config), dir_b.string());
  for (const char* suffix : {"_results.txt", "_summary.json"}) {
    std::ifstream fa(dir_a / ("coin_flip" + std::string(suffix)),
                     std::ios::binary);
    std::ifstream fb(dir_b / ("coin_flip" + std::string(suffix)),
                     std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str() != sb.str() || sa.str().empty())
      return fail("repeated runs produced different files");
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  return std::nullopt;
}

std::vector<Property> property_list() {
  return {
      {"trajectory_determinism", check_trajectory_determinism},
      {"trajectory_truncation_bound", check_truncation_bound},
      {"projection_mass_and_mean",
       [](Profile p) { return check_projection_mass_mean(p, ClipRule::boundary); }},
      {"backup_l1_nonexpansion", check_backup_nonexpansion},
      {"fixed_point_mean_consistency", check_fixed_point_mean},
      {"cvar_grid_consistency", check_grid_consistency},
      {"imputation_exactness", check_imputation_exactness},
      {"moment_backup_commutation",
       [](Profile p) {
         return check_closedness_commutation(p, CrossTerm::reward_weighted);
       }},
      {"sketch_mode_agreement", check_sketch_mode_agreement},
      {"sketch_contraction_rates", check_sketch_contraction},
      {"sketch_distdp_consistency", check_sketch_distdp_consistency},
      {"cvar_monotone_in_tau", check_cvar_monotone},
      {"spectral_consistency", check_spectral_consistency},
      {"risk_translation_equivariance", check_risk_translation},
      {"planners_risk_neutral_limit", check_risk_neutral_limits},
      {"planner_objective_consistency", check_planner_objective_consistency},
      {"pve_risk_gap_bound", check_risk_gap_bound},
      {"equivalence_zero_loss_identity", check_zero_loss_identity},
      {"policy_sampling_contract", check_policy_sampling},
      {"membership_true_model", check_membership_true_model},
      {"membership_order_nesting", check_psi_k_nesting},
      {"mle_concentration", check_mle_concentration},
      {"mle_loss_trend", check_mle_trend},
      {"env_construction", check_env_construction},
      {"four_rooms_risky_expectation", check_four_rooms_risky_expectation},
      {"frozen_lake_return_support", check_frozen_lake_support},
      {"aggregation_order_independence", check_aggregation_order},
      {"experiment_determinism", check_experiment_determinism},
  };
}

}  // namespace

int run_property_suite(Profile profile, std::ostream& out) {
  int failures = 0;
  for (const auto& property : property_list()) {
    std::optional<std::string> result;
    try {
      result = property.check(profile);
    } catch (const std::exception& e) {
      result = std::string("exception: ") + e.what();
    }
    if (result) {
      ++failures;
      out << "[FAIL] " << property.name << ": " << *result << "\n";
    } else {
      out << "[PASS] " << property.name << "\n";
    }
  }
  out << (failures == 0 ? "all properties passed" : "property failures")
      << " (" << failures << " failed)\n";
  return failures;
}

int run_property_selftest(std::ostream& out) {
  int undetected = 0;

  // A projection that discards out-of-range mass must trip the
  // mass-conservation property.
  if (check_projection_mass_mean(Profile::fast, ClipRule::drop)) {
    out << "[PASS] selftest: mass-dropping projection is detected\n";
  } else {
    ++undetected;
    out << "[FAIL] selftest: mass-dropping projection went undetected\n";
  }

  // The unweighted second-moment cross term must trip the commutation
  // property.
  if (check_closedness_commutation(Profile::fast, CrossTerm::unweighted)) {
    out << "[PASS] selftest: unweighted cross term is detected\n";
  } else {
    ++undetected;
    out << "[FAIL] selftest: unweighted cross term went undetected\n";
  }
  return undetected;
}

}  // namespace riskdp
