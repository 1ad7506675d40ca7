// Acceptance suite: end-to-end checks of the toolkit's contractual claims,
// one line of output per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "riskdp/dist_dp.hpp"
#include "riskdp/envs.hpp"
#include "riskdp/experiment.hpp"
#include "riskdp/model_learn.hpp"
#include "riskdp/planning.hpp"
#include "riskdp/trajectory.hpp"

using namespace riskdp;

namespace {

std::string ok() { return std::string(); }

std::string failure(const std::string& msg) { return msg; }

template <typename T>
std::string str(T v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. The always-risky coin-flip return law matches the uniform law in
//    1-Wasserstein distance on the default 401-atom grid.
std::string criterion_return_law() {
  EnvSpec spec;
  spec.stake = 1.0;
  spec.gamma = 0.5;
  BuiltEnv env = build_env(spec);
  GridSpec grid = GridSpec::return_range(env.mdp, 401);
  ReturnFunction eta =
      return_distribution(env.mdp, deterministic_policy({1}, 2), grid, 1e-10);
  double w1 = testing::w1_to_uniform(eta.state(0), -2.0, 2.0);
  if (w1 > 0.02)
    return failure("W1 to the uniform law is " + str(w1) + " > 0.02");
  return ok();
}

// ---------------------------------------------------------------------------
// 2. CVaR(1/2) of the exact uniform representation matches its closed form
//    2*c*tau - 2*c = -1 at c = 1.
std::string criterion_cvar_closed_form() {
  DiscreteDistribution uniform = testing::uniform_midpoint(-2.0, 2.0, 1000);
  double value = risk_value(RiskSpec::cvar(0.5), uniform);
  double closed_form = 2.0 * 1.0 * 0.5 - 2.0 * 1.0;
  if (std::abs(value - closed_form) > 1e-9)
    return failure("cvar is " + str(value) + ", expected " + str(closed_form));
  return ok();
}

// ---------------------------------------------------------------------------
// 3. The risk gap between the true-optimal policy and the adversarially
//    tie-broken policy of the value-matched model equals 1.0 and meets the
//    spectral lower bound (r_max / (1 - gamma)) * eps * (1 - delta (1 - eps)).
std::string criterion_risk_gap() {
  const double tau = 0.5, gamma = 0.5, stake = 1.0;
  EnvSpec spec;
  spec.stake = stake;
  spec.gamma = gamma;
  BuiltEnv env = build_env(spec);
  GridSpec grid = GridSpec::return_range(env.mdp, 401);
  RiskSpec risk = RiskSpec::cvar(tau);

  PlanResult true_plan = cvar_greedy_vi(env.mdp, tau, grid, 200, 0);
  if (true_plan.policy.greedy_actions() != std::vector<int>{0})
    return failure("true planning did not choose the safe action");

  TabularMDP model = coin_flip_pve_model(stake, gamma).realize();
  PlanResult model_plan = cvar_greedy_vi(model, tau, grid, 200, 0);
  if (std::abs(model_plan.action_values(0, 0) -
               model_plan.action_values(0, 1)) > 1e-9)
    return failure("model planning did not tie the two actions");

  // Adversarial tie-break: among tied actions pick the one that scores worst
  // under a one-step true-environment backup of the default extraction.
  ReturnFunction eta_default = return_distribution(
      env.mdp, model_plan.policy, grid, 1e-10);
  double score_safe = risk_value(
      risk, action_backup_distribution(env.mdp, 0, 0, eta_default));
  double score_risky = risk_value(
      risk, action_backup_distribution(env.mdp, 0, 1, eta_default));
  int adversarial = score_risky < score_safe ? 1 : 0;
  if (adversarial != 1)
    return failure("adversarial tie-break did not select the risky action");

  ReturnFunction eta_true_opt =
      return_distribution(env.mdp, true_plan.policy, grid, 1e-10);
  ReturnFunction eta_adversarial = return_distribution(
      env.mdp, deterministic_policy({adversarial}, 2), grid, 1e-10);
  double gap = risk_value(risk, eta_true_opt.state(0)) -
               risk_value(risk, eta_adversarial.state(0));

  double eps = 1.0 - tau, delta = 0.0;
  double bound = env.mdp.r_max / (1.0 - gamma) * eps * (1.0 - delta * (1.0 - eps));
  if (std::abs(gap - 1.0) > 0.02)
    return failure("gap is " + str(gap) + ", expected 1.0 +- 0.02");
  if (gap < bound - 0.02)
    return failure("gap " + str(gap) + " fell below the bound " + str(bound));
  return ok();
}

// ---------------------------------------------------------------------------
// 4. The value-matched coin-flip model matches all first-moment return
//    statistics but misses the second moment by 4/3.
std::string criterion_moment_witness() {
  BuiltEnv env = build_env(EnvSpec{});
  ApproxModel pve = coin_flip_pve_model();
  GridSpec grid = GridSpec::return_range(env.mdp, 401);

  PolicySet policies = sample_policies(env.mdp, 8, 2024);
  policies.policies.push_back(deterministic_policy({1}, 2));

  MembershipQuery first{MembershipCriterion::psi_proper, 1,
                        SketchSpec::moments(1)};
  MembershipReport pass =
      membership_check(pve, env.mdp, policies, first, grid, 1e-8);
  if (!pass.all_pass)
    return failure("first-moment check failed with deviation " +
                   str(pass.max_deviation));

  PolicySet risky_only;
  risky_only.policies.push_back(deterministic_policy({1}, 2));
  MembershipQuery second{MembershipCriterion::psi_proper, 1,
                         SketchSpec::moments(2)};
  MembershipReport fail =
      membership_check(pve, env.mdp, risky_only, second, grid, 1e-8);
  if (fail.all_pass) return failure("second-moment check unexpectedly passed");
  if (std::abs(fail.max_deviation - 4.0 / 3.0) > 1e-6)
    return failure("second-moment deviation is " + str(fail.max_deviation) +
                   ", expected 4/3");
  return ok();
}

// ---------------------------------------------------------------------------
// 5. Models learned to two-moment loss <= 1e-6 reproduce the mean-variance
//    argmax of the true MDP on 20 unique-optimum instances.
std::string criterion_moment_transfer() {
  const double lambda = 0.5;
  int passed = 0, attempted = 0;
  for (std::uint64_t seed = 0; passed < 20 && seed < 200; ++seed) {
    TabularMDP mdp = testing::random_mdp(4, 2, 0.9, 1.0, 9000 + seed);
    PlanResult true_plan = mean_variance_vi(mdp, lambda, 1e-10);
    auto actions = true_plan.policy.greedy_actions();

    // Unique-optimum filter: exhaustive enumeration must name the same
    // policy as its unique per-state dominant, with a working margin.
    BruteForceResult brute = brute_force_mean_variance(mdp, lambda);
    if (!brute.has_dominant || !brute.unique || brute.margin < 1e-3) continue;
    if (brute.policy.greedy_actions() != actions) continue;
    bool clear = true;
    for (int x = 0; x < mdp.n_states && clear; ++x)
      for (int a = 0; a < mdp.n_actions; ++a)
        if (a != actions[x] &&
            true_plan.action_values(x, a) >
                true_plan.action_values(x, actions[x]) - 1e-3)
          clear = false;
    if (!clear) continue;

    ++attempted;
    PolicySet policies = sample_policies(mdp, 40, 5000 + seed);
    OptConfig opt;
    opt.step = 0.05;
    opt.iters = 30000;
    opt.seed = 7000 + seed;
    ApproxModel model =
        learn_model(mdp, policies, SketchSpec::moments(2), 1, 0, opt);
    if (model.provenance.final_loss > 1e-6)
      return failure("instance " + str(seed) + " stalled at loss " +
                     str(model.provenance.final_loss));
    PlanResult model_plan = mean_variance_vi(model.realize(), lambda, 1e-10);
    if (model_plan.policy.greedy_actions() != actions)
      return failure("instance " + str(seed) +
                     " changed the mean-variance argmax");
    ++passed;
  }
  if (passed < 20)
    return failure("only " + str(passed) + "/20 instances qualified");
  return ok();
}

// ---------------------------------------------------------------------------
// 6. Models matching all return distributions at grid tolerance transfer the
//    greedy CVaR argmax at tau in {0.25, 0.5, 0.75} on unique-optimum
//    instances.
std::string criterion_distribution_transfer() {
  int transfers_checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TabularMDP mdp = testing::random_mdp(3, 2, 0.7, 1.0, 9500 + seed);
    GridSpec grid = GridSpec::return_range(mdp, 401);
    PolicySet policies = sample_policies(mdp, 6, 400 + seed);

    std::vector<ApproxModel> candidates;
    candidates.push_back(ApproxModel::from_mdp(mdp));
    for (double scale : {1e-4, 3e-2, 3e-1}) {
      ApproxModel perturbed = ApproxModel::from_mdp(mdp);
      SplitRng rng(600 + seed * 7 + static_cast<std::uint64_t>(scale * 1000));
      for (auto& v : perturbed.logits.data) v += scale * rng.gaussian();
      candidates.push_back(std::move(perturbed));
    }

    for (const auto& model : candidates) {
      MembershipQuery query{MembershipCriterion::dist_proper, 1,
                            SketchSpec::moments(2)};
      MembershipReport report = membership_check(model, mdp, policies, query,
                                                 grid, grid.spacing());
      if (!report.all_pass) continue;
      TabularMDP realized = model.realize();
      for (double tau : {0.25, 0.5, 0.75}) {
        PlanResult true_plan = cvar_greedy_vi(mdp, tau, grid, 200, 0);
        auto actions = true_plan.policy.greedy_actions();
        bool unique = true;
        for (int x = 0; x < mdp.n_states && unique; ++x)
          for (int a = 0; a < mdp.n_actions; ++a)
            if (a != actions[x] &&
                true_plan.action_values(x, a) >
                    true_plan.action_values(x, actions[x]) -
                        5.0 * grid.spacing())
              unique = false;
        if (!unique) continue;
        PlanResult model_plan = cvar_greedy_vi(realized, tau, grid, 200, 0);
        ++transfers_checked;
        if (model_plan.policy.greedy_actions() != actions)
          return failure("argmax transfer failed at tau " + str(tau) +
                         " on instance " + str(seed));
      }
    }
  }
  if (transfers_checked < 10)
    return failure("only " + str(transfers_checked) +
                   " transfer checks materialized");
  return ok();
}

// ---------------------------------------------------------------------------
// 7. Two-moment statistics commute with the projected distributional backup
//    up to twice the grid spacing on 50 random triples.
std::string criterion_commutation() {
  for (int i = 0; i < 50; ++i) {
    TabularMDP mdp = testing::random_mdp(4, 2, 0.7, 1.0, 9700 + i);
    GridSpec grid = GridSpec::return_range(mdp, 401);
    Policy policy = testing::random_policy(4, 2, 9800 + i);
    SplitRng rng(9900 + i);
    ReturnFunction eta{grid, Matrix(4, grid.n_atoms, 0.0)};
    for (int x = 0; x < 4; ++x) {
      auto row = eta.probs.row(x);
      double total = 0.0;
      for (int j = 0; j < grid.n_atoms; ++j) {
        row[j] = rng.uniform01() < 0.85 ? 0.0 : rng.exponential();
        total += row[j];
      }
      if (total == 0.0) {
        row[grid.n_atoms / 2] = 1.0;
        total = 1.0;
      }
      for (int j = 0; j < grid.n_atoms; ++j) row[j] /= total;
    }
    auto via_dist = apply_sketch(SketchSpec::moments(2),
                                 distributional_backup(mdp, policy, eta));
    auto via_moments = moment_backup(
        mdp, policy, apply_sketch(SketchSpec::moments(2), eta), 2);
    double dev = max_abs_diff(via_dist, via_moments);
    if (dev > 2.0 * grid.spacing())
      return failure("commutation deviation " + str(dev) + " on triple " +
                     str(i));
  }
  return ok();
}

// ---------------------------------------------------------------------------
// 8. Imputation round-trips statistics exactly for 100 random image points,
//    both strategies.
std::string criterion_imputation_exactness() {
  SplitRng rng(31337);
  SketchSpec m2 = SketchSpec::moments(2);
  for (int i = 0; i < 100; ++i) {
    double mu = 4.0 * (rng.uniform01() - 0.5);
    double var = i % 9 == 0 ? 0.0 : rng.exponential();
    std::vector<double> s{mu, mu * mu + var};
    for (auto kind : {ImputationSpec::Kind::two_point,
                      ImputationSpec::Kind::normal_clipped}) {
      auto back = apply_sketch(m2, impute(ImputationSpec{kind}, m2, s));
      if (std::abs(back[0] - s[0]) > 1e-10 || std::abs(back[1] - s[1]) > 1e-10)
        return failure("round trip missed at point " + str(i));
    }
  }
  return ok();
}

// ---------------------------------------------------------------------------
// 9. Tabular experiment reproduction (ordinal): two-moment models plan at
//    least as well as value-matched models on the cliff and rooms domains
//    with separated confidence intervals on at least one of them, and the
//    value-matched model earns roughly zero on the lake.
struct AggregateView {
  double mean = 0.0, ci = 0.0;
};

AggregateView find_aggregate(const ExperimentResult& result,
                             const std::string& regime,
                             const std::string& mode) {
  for (const auto& agg : result.aggregates)
    if (agg.regime == regime && agg.tie_mode == mode)
      return {agg.mean_cvar, agg.ci95};
  return {};
}

ExperimentConfig experiment_base(const std::string& env_name) {
  ExperimentConfig config;
  config.env.name = env_name;
  config.regimes = {"pve", "psi2"};
  config.planner.kind = "cvar_greedy";
  config.planner.risk = RiskSpec::cvar(0.5);
  config.planner.iters = 120;
  config.n_policies = 50;
  config.n_seeds = 20;
  config.n_eval_trajectories = 1000;
  config.n_atoms = 401;
  config.learn.step = 0.05;
  config.learn.iters = 1500;
  config.eval_tau = 0.5;
  config.master_seed = 20240817;
  config.eval_tol = 1e-6;
  return config;
}

std::string criterion_experiment(std::string* detail) {
  ExperimentResult cliffs = run_experiment(experiment_base("windy_cliffs"));
  ExperimentResult rooms = run_experiment(experiment_base("four_rooms_risky"));
  ExperimentConfig lake_config = experiment_base("frozen_lake_8x8");
  ExperimentResult lake = run_experiment(lake_config);

  namespace fs = std::filesystem;
  fs::path out = fs::path("acceptance_results");
  write_experiment_files(cliffs, out.string());
  write_experiment_files(rooms, out.string());
  write_experiment_files(lake, out.string());

  std::ostringstream note;
  int separated = 0;
  for (const auto* result : {&cliffs, &rooms}) {
    AggregateView psi2 = find_aggregate(*result, "psi2", "default");
    AggregateView pve = find_aggregate(*result, "pve", "adversarial");
    note << result->env_name << ": psi2 " << psi2.mean << "+-" << psi2.ci
         << " pve " << pve.mean << "+-" << pve.ci << "; ";
    if (psi2.mean < pve.mean)
      return failure(result->env_name +
                     ": two-moment planning scored below value-matched (" +
                     str(psi2.mean) + " < " + str(pve.mean) + ")");
    if (psi2.mean - psi2.ci > pve.mean + pve.ci) ++separated;
  }
  if (separated < 1)
    return failure("confidence intervals overlap on both grid domains (" +
                   note.str() + ")");

  AggregateView lake_pve = find_aggregate(lake, "pve", "adversarial");
  note << "lake pve " << lake_pve.mean << "+-" << lake_pve.ci;
  if (std::abs(lake_pve.mean) > 0.05)
    return failure("lake value-matched cvar is " + str(lake_pve.mean) +
                   ", expected within 0.05 of zero");
  if (detail != nullptr) *detail = note.str();
  return ok();
}

// ---------------------------------------------------------------------------
// 10. Spectral step densities reproduce the mean and CVaR on 100 random
//     discrete distributions.
std::string criterion_spectral_consistency() {
  SplitRng rng(777);
  RiskSpec flat = RiskSpec::spectral({0.0, 1.0}, {1.0});
  for (int i = 0; i < 100; ++i) {
    int n = 2 + static_cast<int>(rng.uniform01() * 6);
    std::vector<std::pair<double, double>> weighted;
    for (int j = 0; j < n; ++j)
      weighted.emplace_back(4.0 * (rng.uniform01() - 0.5), rng.exponential());
    DiscreteDistribution d =
        DiscreteDistribution::from_weighted_atoms(weighted);
    if (std::abs(risk_value(flat, d) - d.mean()) > 1e-10)
      return failure("flat density missed the mean at case " + str(i));
    double tau = 0.05 + 0.9 * rng.uniform01();
    if (std::abs(risk_value(RiskSpec::cvar_as_spectral(tau), d) -
                 risk_value(RiskSpec::cvar(tau), d)) > 1e-10)
      return failure("step density missed cvar at case " + str(i));
  }
  return ok();
}

// ---------------------------------------------------------------------------
// 11. Whenever a policy dominates another in a model that matches all return
//     distributions at grid tolerance, it also dominates in the true MDP.
std::string criterion_dominance_transfer() {
  RiskSpec risk = RiskSpec::cvar(0.5);
  int held = 0;
  for (std::uint64_t instance = 0; instance < 5; ++instance) {
    TabularMDP mdp = testing::random_mdp(4, 2, 0.8, 1.0, 11000 + instance);
    GridSpec grid = GridSpec::return_range(mdp, 401);
    PolicySet probes = sample_policies(mdp, 4, 500 + instance);

    std::vector<ApproxModel> candidates;
    candidates.push_back(ApproxModel::from_mdp(mdp));
    for (double scale : {3e-5, 3e-1}) {
      ApproxModel perturbed = ApproxModel::from_mdp(mdp);
      SplitRng rng(12000 + instance * 3 +
                   static_cast<std::uint64_t>(scale * 1e6));
      for (auto& v : perturbed.logits.data) v += scale * rng.gaussian();
      candidates.push_back(std::move(perturbed));
    }

    for (const auto& model : candidates) {
      MembershipQuery query{MembershipCriterion::dist_proper, 1,
                            SketchSpec::moments(2)};
      MembershipReport report = membership_check(model, mdp, probes, query,
                                                 grid, grid.spacing());
      if (!report.all_pass) continue;
      TabularMDP realized = model.realize();

      for (int pair = 0; pair < 50; ++pair) {
        std::uint64_t s = 13000 + instance * 100 + pair;
        Policy a = testing::random_policy(4, 2, s);
        Policy b = testing::random_policy(4, 2, s + 50000);
        ReturnFunction ma = return_distribution(realized, a, grid, 1e-8);
        ReturnFunction mb = return_distribution(realized, b, grid, 1e-8);
        bool model_dominates = dominates(risk, ma, mb);
        if (!model_dominates) continue;
        ++held;
        ReturnFunction ta = return_distribution(mdp, a, grid, 1e-8);
        ReturnFunction tb = return_distribution(mdp, b, grid, 1e-8);
        if (!dominates(risk, ta, tb, 2.0 * grid.spacing()))
          return failure("dominance did not transfer on instance " +
                         str(instance) + " pair " + str(pair));
      }
    }
  }
  if (held < 10)
    return failure("only " + str(held) + " dominance pairs materialized");
  return ok();
}

// ---------------------------------------------------------------------------
// 12. Repeated runs with the same master seed produce byte-identical result
//     files.
std::string criterion_determinism() {
  ExperimentConfig config;
  config.env.name = "coin_flip";
  config.regimes = {"mle", "pve", "psi2"};
  config.n_policies = 8;
  config.n_seeds = 3;
  config.n_eval_trajectories = 200;
  config.n_atoms = 201;
  config.learn.iters = 120;
  config.planner.iters = 60;
  config.master_seed = 99;

  namespace fs = std::filesystem;
  fs::path dir_a = fs::temp_directory_path() / "riskdp_accept_a";
  fs::path dir_b = fs::temp_directory_path() / "riskdp_accept_b";
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
    if (sa.str().empty() || sa.str() != sb.str())
      return failure(std::string("files differ for ") + suffix);
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  return ok();
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.push_back(std::stoi(tok));
    }
  }

  struct Criterion {
    int id;
    const char* name;
    std::function<std::string()> run;
  };
  std::string experiment_detail;
  std::vector<Criterion> criteria = {
      {1, "coin-flip return law matches the uniform law", criterion_return_law},
      {2, "cvar closed form on the exact uniform representation",
       criterion_cvar_closed_form},
      {3, "risk gap of value-matched planning meets its lower bound",
       criterion_risk_gap},
      {4, "value-matched model passes first moments and fails second",
       criterion_moment_witness},
      {5, "learned two-moment models transfer the mean-variance argmax",
       criterion_moment_transfer},
      {6, "distribution-matched models transfer the cvar-greedy argmax",
       criterion_distribution_transfer},
      {7, "moment backup commutes with the projected backup",
       criterion_commutation},
      {8, "imputation is exact on the sketch image",
       criterion_imputation_exactness},
      {9, "tabular experiment reproduction (ordinal)",
       [&] { return criterion_experiment(&experiment_detail); }},
      {10, "spectral step densities match mean and cvar",
       criterion_spectral_consistency},
      {11, "dominance transfers from distribution-matched models",
       criterion_dominance_transfer},
      {12, "experiment runs are byte-identical under one seed",
       criterion_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!only.empty() &&
        std::find(only.begin(), only.end(), criterion.id) == only.end())
      continue;
    auto start = std::chrono::steady_clock::now();
    std::string result;
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result = std::string("exception: ") + e.what();
    }
    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    if (result.empty()) {
      std::printf("[PASS] %2d. %s (%.1fs)\n", criterion.id, criterion.name,
                  seconds);
      if (criterion.id == 9 && !experiment_detail.empty())
        std::printf("        %s\n", experiment_detail.c_str());
    } else {
      ++failures;
      std::printf("[FAIL] %2d. %s (%.1fs): %s\n", criterion.id, criterion.name,
                  seconds, result.c_str());
    }
    std::fflush(stdout);
  }
  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria failed\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
