#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "riskdp/envs.hpp"
#include "riskdp/model_learn.hpp"
#include "riskdp/planning.hpp"

using namespace riskdp;

TEST_SUITE_BEGIN("model_learn");

TEST_CASE("policy sampling contract") {
  TabularMDP mdp = testing::random_mdp(3, 1, 0.9, 1.0, 400);
  PolicySet unique = sample_policies(mdp, 1, 5);
  CHECK(unique.policies[0].at(0)[0] == doctest::Approx(1.0));

  TabularMDP mdp2 = testing::random_mdp(3, 3, 0.9, 1.0, 401);
  PolicySet a = sample_policies(mdp2, 25, 17);
  PolicySet b = sample_policies(mdp2, 25, 17);
  for (std::size_t i = 0; i < a.policies.size(); ++i)
    CHECK(max_abs_diff(a.policies[i].action_probs,
                       b.policies[i].action_probs) == 0.0);
  for (const auto& policy : a.policies)
    CHECK(validate_policy(policy, mdp2).empty());
}

TEST_CASE("mle recovers a deterministic machine and falls back when empty") {
  TabularMDP mdp;
  mdp.n_states = 3;
  mdp.n_actions = 2;
  mdp.gamma = 0.8;
  mdp.r_max = 1.0;
  mdp.transition = Matrix(6, 3, 0.0);
  mdp.reward.assign(6, DiscreteDistribution::point_mass(0.0));
  for (int x = 0; x < 3; ++x)
    for (int a = 0; a < 2; ++a) {
      mdp.transition(x * 2 + a, (x + a + 1) % 3) = 1.0;
      mdp.reward[x * 2 + a] =
          DiscreteDistribution::point_mass(0.1 * (x * 2 + a));
    }

  TransitionDataset data = sample_dataset(mdp, 5, 3);
  ApproxModel model = mle_model(MdpShape::of(mdp), data, 0.0);
  Matrix rows = model.realized_transition();
  for (int r = 0; r < 6; ++r)
    for (int y = 0; y < 3; ++y)
      CHECK(rows(r, y) == doctest::Approx(mdp.transition(r, y)).epsilon(1e-12));
  for (int r = 0; r < 6; ++r)
    CHECK(model.reward[r].mean() == doctest::Approx(mdp.reward[r].mean()));

  ApproxModel empty = mle_model(MdpShape::of(mdp), TransitionDataset{}, 0.0);
  Matrix uniform_rows = empty.realized_transition();
  for (int r = 0; r < 6; ++r)
    for (int y = 0; y < 3; ++y)
      CHECK(uniform_rows(r, y) == doctest::Approx(1.0 / 3.0));
  CHECK(empty.reward[0].atoms == std::vector<double>{0.0});
}

TEST_CASE("equivalence loss vanishes at the true model") {
  TabularMDP mdp = testing::random_mdp(4, 2, 0.8, 1.0, 402);
  ApproxModel model = ApproxModel::from_mdp(mdp);
  PolicySet policies = sample_policies(mdp, 4, 19);
  for (const auto& sketch : {SketchSpec::moments(1), SketchSpec::moments(2)}) {
    auto stats = true_statistics(mdp, policies, sketch, 1e-15);
    for (int k : {1, 2, 4})
      CHECK(equivalence_loss(stats, model, policies, sketch, k, 2.0) <= 1e-12);
  }
}

TEST_CASE("value-matched coin-flip model: first moments match, second do not") {
  BuiltEnv env = build_env(EnvSpec{});
  ApproxModel pve = coin_flip_pve_model();
  PolicySet risky_only;
  risky_only.policies.push_back(deterministic_policy({1}, 2));

  auto stats1 =
      true_statistics(env.mdp, risky_only, SketchSpec::moments(1), 1e-12);
  CHECK(equivalence_loss(stats1, pve, risky_only, SketchSpec::moments(1), 1,
                         2.0) <= 1e-12);

  auto stats2 =
      true_statistics(env.mdp, risky_only, SketchSpec::moments(2), 1e-12);
  double loss =
      equivalence_loss(stats2, pve, risky_only, SketchSpec::moments(2), 1, 2.0);
  // True second moment 4/3; the model backup gives 1/3; squared deviation 1.
  CHECK(loss == doctest::Approx(1.0).epsilon(1e-6));

  double prev = loss;
  for (int k : {2, 3, 4}) {
    double lk = equivalence_loss(stats2, pve, risky_only,
                                 SketchSpec::moments(2), k, 2.0);
    CHECK(lk >= prev - 1e-9);  // deviation never heals with more backups
    CHECK(lk > 0.5);
    prev = lk;
  }
}

TEST_CASE("analytic loss gradient matches finite differences") {
  TabularMDP mdp = testing::random_mdp(3, 2, 0.7, 1.0, 403);
  PolicySet policies = sample_policies(mdp, 3, 23);
  for (int k : {1, 2}) {
    ApproxModel model = ApproxModel::from_mdp(mdp);
    SplitRng rng(29);
    for (auto& v : model.logits.data) v += 0.3 * rng.gaussian();
    auto stats = true_statistics(mdp, policies, SketchSpec::moments(2), 1e-13);
    auto [loss, grad] = equivalence_loss_gradient(stats, model, policies,
                                                  SketchSpec::moments(2), k);
    CHECK(loss > 0.0);
    const double h = 1e-6;
    for (int idx : {0, 4, 7, 11, 16}) {
      ApproxModel bumped = model;
      bumped.logits.data[idx] += h;
      double up = equivalence_loss(stats, bumped, policies,
                                   SketchSpec::moments(2), k, 2.0);
      bumped.logits.data[idx] -= 2 * h;
      double down = equivalence_loss(stats, bumped, policies,
                                     SketchSpec::moments(2), k, 2.0);
      double fd = (up - down) / (2 * h);
      CHECK(grad.data[idx] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("learning a two-moment model transfers the mean-variance argmax") {
  TabularMDP mdp = testing::random_mdp(4, 2, 0.9, 1.0, 404);
  PolicySet policies = sample_policies(mdp, 40, 31);
  OptConfig opt;
  opt.step = 0.02;
  opt.iters = 9000;
  opt.seed = 11;
  ApproxModel model =
      learn_model(mdp, policies, SketchSpec::moments(2), 1, 0, opt);
  CHECK(model.provenance.final_loss <= 1e-6);

  PlanResult in_model = mean_variance_vi(model.realize(), 0.5, 1e-9);
  PlanResult in_true = mean_variance_vi(mdp, 0.5, 1e-9);
  CHECK(in_model.policy.greedy_actions() == in_true.policy.greedy_actions());
}

TEST_CASE("restricting the rank leaves residual loss on a rank-2 structure") {
  // Two distinct transition rows per action: rank 2, not rank 1.
  TabularMDP mdp;
  mdp.n_states = 3;
  mdp.n_actions = 2;
  mdp.gamma = 0.8;
  mdp.r_max = 1.0;
  mdp.transition = Matrix(6, 3, 0.0);
  mdp.reward.assign(6, DiscreteDistribution::point_mass(0.0));
  double rows[6][3] = {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8},
                       {0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
  for (int r = 0; r < 6; ++r) {
    for (int y = 0; y < 3; ++y) mdp.transition(r, y) = rows[r][y];
    mdp.reward[r] = DiscreteDistribution{{-0.5, 0.5 + 0.05 * r}, {0.4, 0.6}};
  }
  REQUIRE(validate_mdp(mdp).empty());

  PolicySet policies = sample_policies(mdp, 30, 37);
  OptConfig opt;
  opt.step = 0.02;
  opt.iters = 4000;
  opt.seed = 13;
  ApproxModel full =
      learn_model(mdp, policies, SketchSpec::moments(2), 1, 0, opt);
  ApproxModel rank1 =
      learn_model(mdp, policies, SketchSpec::moments(2), 1, 1, opt);
  CHECK(std::abs(validate_model(rank1).empty() ? 0.0 : 1.0) == 0.0);
  CHECK(rank1.provenance.final_loss >
        full.provenance.final_loss + 1e-4);
}

TEST_CASE("fixed rewards come from the dataset when one is supplied") {
  TabularMDP mdp = testing::random_mdp(3, 2, 0.8, 1.0, 405);
  PolicySet policies = sample_policies(mdp, 10, 41);
  TransitionDataset data = sample_dataset(mdp, 400, 43);
  OptConfig opt;
  opt.step = 0.05;
  opt.iters = 50;
  ApproxModel model =
      learn_model(mdp, policies, SketchSpec::moments(1), 1, 0, opt, &data);
  for (int r = 0; r < 6; ++r)
    CHECK(std::abs(model.reward[r].mean() - mdp.reward[r].mean()) < 0.2);
}

TEST_CASE("sample-based loss agrees with its closed form") {
  TabularMDP mdp = testing::random_mdp(4, 2, 0.8, 1.0, 406);
  ApproxModel model = ApproxModel::from_mdp(mdp);
  SplitRng rng(47);
  for (auto& v : model.logits.data) v += 0.5 * rng.gaussian();
  TransitionDataset data = sample_dataset(mdp, 20, 49);

  Matrix stats(4, 2, 0.0);
  for (int x = 0; x < 4; ++x) {
    stats(x, 0) = rng.gaussian();
    stats(x, 1) = rng.gaussian();
  }

  // Closed form: expectation over the model's realized rows.
  Matrix rows = model.realized_transition();
  double exact = 0.0;
  for (const auto& row : data.rows) {
    auto p = rows.row(row.state * 2 + row.action);
    for (int y = 0; y < 4; ++y) {
      double sq = 0.0;
      for (int j = 0; j < 2; ++j) {
        double d = stats(row.next_state, j) - stats(y, j);
        sq += d * d;
      }
      exact += p[y] * sq;
    }
  }
  exact /= static_cast<double>(data.rows.size());

  double mc = sample_based_loss(model, data, stats, 4000, 51);
  CHECK(mc == doctest::Approx(exact).epsilon(0.05));

  // Deterministic true model with matching data drives the loss to zero.
  TabularMDP det;
  det.n_states = 2;
  det.n_actions = 1;
  det.gamma = 0.5;
  det.r_max = 0.0;
  det.transition = Matrix(2, 2, 0.0);
  det.transition(0, 1) = 1.0;
  det.transition(1, 0) = 1.0;
  det.reward.assign(2, DiscreteDistribution::point_mass(0.0));
  ApproxModel det_model = ApproxModel::from_mdp(det);
  TransitionDataset det_data = sample_dataset(det, 10, 53);
  Matrix det_stats(2, 1, 0.0);
  det_stats(0, 0) = 1.0;
  det_stats(1, 0) = -1.0;
  CHECK(sample_based_loss(det_model, det_data, det_stats, 8, 55) ==
        doctest::Approx(0.0));
}

TEST_CASE("membership criteria separate the value-matched coin-flip model") {
  BuiltEnv env = build_env(EnvSpec{});
  ApproxModel pve = coin_flip_pve_model();
  GridSpec grid = GridSpec::return_range(env.mdp, 401);

  PolicySet risky_only;
  risky_only.policies.push_back(deterministic_policy({1}, 2));

  MembershipQuery first{MembershipCriterion::psi_proper, 1,
                        SketchSpec::moments(1)};
  MembershipReport pass =
      membership_check(pve, env.mdp, risky_only, first, grid, 1e-8);
  CHECK(pass.all_pass);

  MembershipQuery second{MembershipCriterion::psi_proper, 1,
                         SketchSpec::moments(2)};
  MembershipReport fail =
      membership_check(pve, env.mdp, risky_only, second, grid, 1e-8);
  CHECK(!fail.all_pass);
  CHECK(fail.max_deviation == doctest::Approx(4.0 / 3.0).epsilon(1e-6));

  MembershipQuery dist{MembershipCriterion::dist_proper, 1,
                       SketchSpec::moments(2)};
  MembershipReport dist_fail =
      membership_check(pve, env.mdp, risky_only, dist, grid, grid.spacing());
  CHECK(!dist_fail.all_pass);

  // The true model passes every criterion tightly.
  ApproxModel truth = ApproxModel::from_mdp(env.mdp);
  for (auto criterion :
       {MembershipCriterion::dist_k, MembershipCriterion::dist_proper,
        MembershipCriterion::psi_k, MembershipCriterion::psi_proper}) {
    MembershipQuery query{criterion, 2, SketchSpec::moments(2)};
    MembershipReport report =
        membership_check(truth, env.mdp, risky_only, query, grid, 1e-12);
    CHECK(report.all_pass);
    CHECK(report.max_deviation <= 1e-12);
  }
}

TEST_SUITE_END();
