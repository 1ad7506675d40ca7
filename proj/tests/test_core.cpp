#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "riskdp/envs.hpp"
#include "riskdp/trajectory.hpp"

using namespace riskdp;

TEST_SUITE_BEGIN("core");

TEST_CASE("distribution moments and construction") {
  DiscreteDistribution d{{-1.0, 1.0}, {0.5, 0.5}};
  CHECK(d.mean() == doctest::Approx(0.0));
  CHECK(d.variance() == doctest::Approx(1.0));
  CHECK(d.moment(2) == doctest::Approx(1.0));
  CHECK(validate_distribution(d).empty());

  DiscreteDistribution merged = DiscreteDistribution::from_weighted_atoms(
      {{1.0, 0.25}, {1.0, 0.25}, {0.0, 0.5}});
  CHECK(merged.atoms.size() == 2);
  CHECK(merged.probs[1] == doctest::Approx(0.5));

  DiscreteDistribution bad{{1.0, 0.5}, {0.5, 0.5}};
  CHECK(!validate_distribution(bad).empty());
}

TEST_CASE("validate_mdp flags the exact violation") {
  TabularMDP mdp = testing::random_mdp(2, 2, 0.9, 1.0, 1);
  CHECK(validate_mdp(mdp).empty());

  SUBCASE("transition row sum") {
    mdp.transition(1, 0) -= 0.1;  // row (state 0, action 1) now sums to 0.9
    auto errs = validate_mdp(mdp);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("state 0 action 1") != std::string::npos);
    CHECK(errs[0].find("sums to") != std::string::npos);
  }
  SUBCASE("reward atom outside the bound") {
    mdp.reward[3] = DiscreteDistribution::point_mass(5.0);
    auto errs = validate_mdp(mdp);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("exceeds r_max") != std::string::npos);
    CHECK(errs[0].find("state 1 action 1") != std::string::npos);
  }
  SUBCASE("gamma at one rejected") {
    mdp.gamma = 1.0;
    CHECK(!validate_mdp(mdp).empty());
  }
}

TEST_CASE("deterministic reward chain matches the geometric series") {
  TabularMDP mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.gamma = 0.5;
  mdp.r_max = 1.0;
  mdp.transition = Matrix(1, 1, 1.0);
  mdp.reward = {DiscreteDistribution::point_mass(1.0)};
  Policy policy = uniform_policy(1, 1);

  Trajectory t = sample_trajectory(mdp, policy, 0, 20, 7);
  double expected = 2.0 * (1.0 - std::pow(0.5, 20));
  CHECK(t.discounted_return == doctest::Approx(expected).epsilon(1e-12));
  CHECK(t.steps.size() == 20);
}

TEST_CASE("safe action of the coin flip never pays") {
  BuiltEnv env = build_env(EnvSpec{});
  Policy always_safe = deterministic_policy({0}, 2);
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    Trajectory t = sample_trajectory(env.mdp, always_safe, 0, 30, seed);
    for (const auto& step : t.steps) CHECK(step.reward == 0.0);
    CHECK(t.discounted_return == 0.0);
  }
}

TEST_CASE("risky coin-flip returns sample the uniform law") {
  BuiltEnv env = build_env(EnvSpec{});
  Policy always_risky = deterministic_policy({1}, 2);
  int horizon = default_mc_horizon(env.mdp);
  CHECK(horizon == 21);

  const int n = 100000;
  double sum = 0.0, lo = 1e300, hi = -1e300;
  for (int i = 0; i < n; ++i) {
    Trajectory t = sample_trajectory(env.mdp, always_risky, 0, horizon,
                                     1000000 + static_cast<std::uint64_t>(i));
    sum += t.discounted_return;
    lo = std::min(lo, t.discounted_return);
    hi = std::max(hi, t.discounted_return);
  }
  double mean = sum / n;
  CHECK(mean > -0.02);
  CHECK(mean < 0.02);
  CHECK(lo <= -1.9);
  CHECK(hi >= 1.9);
}

TEST_CASE("trajectory errors") {
  BuiltEnv env = build_env(EnvSpec{});
  Policy policy = uniform_policy(1, 2);
  CHECK_THROWS_AS(sample_trajectory(env.mdp, policy, 1, 10, 0),
                  std::out_of_range);
  CHECK_THROWS_AS(sample_trajectory(env.mdp, policy, 0, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("policy helpers") {
  Policy p = deterministic_policy({1, 0}, 2);
  CHECK(p.greedy_actions() == std::vector<int>{1, 0});
  TabularMDP mdp = testing::random_mdp(2, 2, 0.9, 1.0, 3);
  CHECK(validate_policy(p, mdp).empty());
  p.action_probs(0, 0) = 0.5;
  CHECK(!validate_policy(p, mdp).empty());
}

TEST_SUITE_END();
