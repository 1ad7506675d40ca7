#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "riskdp/dist_dp.hpp"
#include "riskdp/envs.hpp"
#include "riskdp/planning.hpp"

using namespace riskdp;

TEST_SUITE_BEGIN("planning");

namespace {

// One decision state branching to a safe or a risky terminal arm. The risky
// arm has the higher mean but the worse lower tail.
TabularMDP branching_chain() {
  TabularMDP mdp;
  mdp.n_states = 4;  // 0 choice, 1 risky arm, 2 safe arm, 3 sink
  mdp.n_actions = 2;
  mdp.gamma = 0.9;
  mdp.r_max = 1.0;
  mdp.transition = Matrix(8, 4, 0.0);
  mdp.reward.assign(8, DiscreteDistribution::point_mass(0.0));
  auto set_row = [&](int x, int a, int y) {
    mdp.transition(x * 2 + a, y) = 1.0;
  };
  set_row(0, 0, 2);  // action 0: safe arm
  set_row(0, 1, 1);  // action 1: risky arm
  for (int a = 0; a < 2; ++a) {
    set_row(1, a, 3);
    set_row(2, a, 3);
    set_row(3, a, 3);
    mdp.reward[1 * 2 + a] = DiscreteDistribution{{-1.0, 1.0}, {0.25, 0.75}};
    mdp.reward[2 * 2 + a] = DiscreteDistribution::point_mass(0.4);
  }
  return mdp;
}

}  // namespace

TEST_CASE("mean-variance planning on the coin flip") {
  BuiltEnv env = build_env(EnvSpec{});
  PlanResult plan = mean_variance_vi(env.mdp, 0.1, 1e-10);
  CHECK(plan.converged);
  CHECK(plan.policy.greedy_actions() == std::vector<int>{0});
  // Per-action objectives use the greedy continuation: the risky one-step
  // second moment is E[R^2] = 1 on top of the safe tail.
  CHECK(plan.action_values(0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(plan.action_values(0, 1) == doctest::Approx(-0.1).epsilon(1e-5));
  CHECK(plan.action_values(0, 0) > plan.action_values(0, 1));
}

TEST_CASE("mean-variance planning ties in the value-matched model") {
  TabularMDP pve = coin_flip_pve_model().realize();
  PlanResult plan = mean_variance_vi(pve, 0.1, 1e-10);
  CHECK(plan.policy.greedy_actions() == std::vector<int>{0});  // tie-break
  CHECK(std::abs(plan.action_values(0, 0) - plan.action_values(0, 1)) <=
        1e-10);
}

TEST_CASE("tiny variance weight recovers the risk-neutral argmax") {
  int found = 0;
  for (int i = 0; found < 10 && i < 100; ++i) {
    TabularMDP mdp = testing::random_mdp(5, 2, 0.7, 1.0, 200 + i);
    PlanResult neutral = risk_neutral_vi(mdp, 1e-12);
    bool unique = true;
    auto actions = neutral.policy.greedy_actions();
    for (int x = 0; x < mdp.n_states && unique; ++x)
      for (int a = 0; a < mdp.n_actions; ++a)
        if (a != actions[x] &&
            neutral.action_values(x, a) >
                neutral.action_values(x, actions[x]) - 1e-6)
          unique = false;
    if (!unique) continue;
    ++found;
    PlanResult mv = mean_variance_vi(mdp, 1e-12, 1e-10);
    CHECK(mv.policy.greedy_actions() == actions);
    // Exhaustive enumeration agrees wherever a dominant policy exists.
    BruteForceResult brute = brute_force_search(mdp, [&](const Policy& pi) {
      return value_fixed_point(mdp, pi, 1e-12);
    });
    if (brute.has_dominant)
      CHECK(brute.policy.greedy_actions() == actions);
  }
  CHECK(found == 10);
}

TEST_CASE("budget cvar planning on the coin flip") {
  BuiltEnv env = build_env(EnvSpec{});
  GridSpec grid = GridSpec::return_range(env.mdp, 401);
  PlanResult plan = cvar_budget_vi(env.mdp, 0.5, grid, 65, 400, 0);
  CHECK(plan.policy.greedy_actions() == std::vector<int>{0});
  CHECK(std::abs(plan.values[0] - 0.0) <= grid.spacing());
}

TEST_CASE("budget cvar planning at level one is risk neutral") {
  int found = 0;
  for (int i = 0; found < 10 && i < 100; ++i) {
    TabularMDP mdp = testing::random_mdp(5, 2, 0.7, 1.0, 300 + i);
    PlanResult neutral = risk_neutral_vi(mdp, 1e-12);
    bool unique = true;
    auto actions = neutral.policy.greedy_actions();
    for (int x = 0; x < mdp.n_states && unique; ++x)
      for (int a = 0; a < mdp.n_actions; ++a)
        if (a != actions[x] &&
            neutral.action_values(x, a) >
                neutral.action_values(x, actions[x]) - 1e-6)
          unique = false;
    if (!unique) continue;
    ++found;
    GridSpec grid = GridSpec::return_range(mdp, 201);
    PlanResult plan = cvar_budget_vi(mdp, 1.0, grid, 65, 400, 0);
    CHECK(plan.policy.greedy_actions() == actions);
  }
  CHECK(found == 10);
}

TEST_CASE("budget cvar planning matches enumeration on the branching chain") {
  TabularMDP mdp = branching_chain();
  GridSpec grid = GridSpec::return_range(mdp, 801);

  // Risk-neutral check: the risky arm has mean 0.45 > 0.36 at the choice.
  PlanResult neutral = cvar_budget_vi(mdp, 1.0, grid, 129, 600, 0);
  CHECK(neutral.policy.greedy_actions()[0] == 1);

  PlanResult averse = cvar_budget_vi(mdp, 0.5, grid, 129, 600, 0);
  CHECK(averse.policy.greedy_actions()[0] == 0);

  for (double tau : {0.5, 1.0}) {
    BruteForceResult brute =
        brute_force_risk(mdp, RiskSpec::cvar(tau), grid, 1e-10);
    PlanResult plan = cvar_budget_vi(mdp, tau, grid, 129, 600, 0);
    REQUIRE(brute.has_dominant);
    CHECK(plan.policy.greedy_actions()[0] ==
          brute.policy.greedy_actions()[0]);
  }
}

TEST_CASE("greedy cvar planning on the coin flip and its value-matched model") {
  BuiltEnv env = build_env(EnvSpec{});
  GridSpec grid = GridSpec::return_range(env.mdp, 401);
  PlanResult plan = cvar_greedy_vi(env.mdp, 0.5, grid, 300, 0);
  CHECK(plan.policy.greedy_actions() == std::vector<int>{0});
  CHECK(std::abs(plan.values[0] - 0.0) <= grid.spacing());
  CHECK(plan.action_values(0, 0) > plan.action_values(0, 1) + 0.5);

  TabularMDP pve = coin_flip_pve_model().realize();
  PlanResult tied = cvar_greedy_vi(pve, 0.5, grid, 300, 0);
  CHECK(tied.policy.greedy_actions() == std::vector<int>{0});
  CHECK(std::abs(tied.action_values(0, 0) - tied.action_values(0, 1)) <=
        1e-10);
}

TEST_CASE("greedy cvar planning reduces to a bandit at zero discount") {
  TabularMDP mdp;
  mdp.n_states = 3;
  mdp.n_actions = 2;
  mdp.gamma = 0.0;
  mdp.r_max = 1.0;
  mdp.transition = Matrix(6, 3, 0.0);
  for (int x = 0; x < 3; ++x)
    for (int a = 0; a < 2; ++a) mdp.transition(x * 2 + a, (x + 1) % 3) = 1.0;
  mdp.reward = {
      DiscreteDistribution{{-1.0, 1.0}, {0.5, 0.5}},   // state 0, action 0
      DiscreteDistribution::point_mass(-0.1),          // state 0, action 1
      DiscreteDistribution::point_mass(0.2),           // state 1, action 0
      DiscreteDistribution{{-1.0, 1.0}, {0.2, 0.8}},   // state 1, action 1
      DiscreteDistribution{{-0.5, 0.5}, {0.5, 0.5}},   // state 2, action 0
      DiscreteDistribution::point_mass(-0.6),          // state 2, action 1
  };
  GridSpec grid = GridSpec::return_range(mdp, 401);
  RiskSpec risk = RiskSpec::cvar(0.5);
  PlanResult plan = cvar_greedy_vi(mdp, 0.5, grid, 50, 0);
  for (int x = 0; x < 3; ++x) {
    double v0 = risk_value(risk, mdp.reward_at(x, 0));
    double v1 = risk_value(risk, mdp.reward_at(x, 1));
    int expected = v1 > v0 ? 1 : 0;
    CHECK(plan.policy.greedy_actions()[x] == expected);
  }
}

TEST_CASE("risk gap of the coin-flip pair meets its closed form") {
  const double stake = 1.0, tau = 0.5;
  EnvSpec spec;
  spec.stake = stake;
  spec.gamma = 0.5;
  BuiltEnv env = build_env(spec);
  GridSpec grid = GridSpec::return_range(env.mdp, 401);
  RiskSpec risk = RiskSpec::cvar(tau);
  ReturnFunction safe =
      return_distribution(env.mdp, deterministic_policy({0}, 2), grid, 1e-10);
  ReturnFunction risky =
      return_distribution(env.mdp, deterministic_policy({1}, 2), grid, 1e-10);
  double gap =
      risk_value(risk, safe.state(0)) - risk_value(risk, risky.state(0));
  CHECK(std::abs(gap - 2.0 * stake * (1.0 - tau)) <= 0.02);
}

TEST_SUITE_END();
