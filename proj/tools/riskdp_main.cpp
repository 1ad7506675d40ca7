#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "riskdp/dist_dp.hpp"
#include "riskdp/experiment.hpp"
#include "riskdp/io.hpp"
#include "riskdp/rng.hpp"
#include "riskdp/trajectory.hpp"

namespace {

using namespace riskdp;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfigError = 2;

EnvSpec make_env_spec(const std::string& name, const std::string& env_config) {
  if (!env_config.empty()) return env_from_json(load_json(env_config));
  EnvSpec spec;
  spec.name = name;
  return spec;
}

int cmd_export_env(const std::string& env_name, const std::string& env_config,
                   const std::string& out_path) {
  BuiltEnv env = build_env(make_env_spec(env_name, env_config));
  Json j = mdp_to_json(env.mdp);
  j["metadata"] = Json{{"name", env.name},
                       {"start_state", env.meta.start_state},
                       {"terminal_states", env.meta.terminal_states},
                       {"goal_states", env.meta.goal_states},
                       {"horizon_cap", env.meta.horizon_cap},
                       {"undiscounted_eval", env.meta.undiscounted_eval},
                       {"map", env.meta.map_rows},
                       {"notes", env.meta.notes}};
  save_json(j, out_path);
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_learn_model(const std::string& env_name, const std::string& env_config,
                    const std::string& sketch_name, int k, int rank,
                    int n_policies, OptConfig opt, int mle_samples,
                    const std::string& out_path) {
  BuiltEnv env = build_env(make_env_spec(env_name, env_config));
  PolicySet policies = sample_policies(env.mdp, n_policies,
                                       SplitRng(opt.seed).split(1).seed());
  SketchSpec sketch = sketch_name == "moments1" ? SketchSpec::moments(1)
                                                : SketchSpec::moments(2);
  ApproxModel model;
  if (sketch_name == "mle") {
    TransitionDataset data =
        sample_dataset(env.mdp, mle_samples, SplitRng(opt.seed).split(2).seed());
    model = mle_model(MdpShape::of(env.mdp), data, 1e-3);
  } else {
    model = learn_model(env.mdp, policies, sketch, k, rank, opt);
  }
  save_json(model_to_json(model), out_path);
  std::cout << "wrote " << out_path << " (final loss "
            << model.provenance.final_loss << ")\n";
  return kExitOk;
}

int cmd_plan(const std::string& env_name, const std::string& env_config,
             const std::string& model_path, const std::string& planner,
             double tau, double lambda, int iters, int n_budget,
             const std::string& out_path) {
  BuiltEnv env = build_env(make_env_spec(env_name, env_config));
  TabularMDP target = env.mdp;
  if (!model_path.empty())
    target = model_from_json(load_json(model_path)).realize();
  GridSpec grid = GridSpec::return_range(target, 401);
  PlanResult plan;
  if (planner == "mean_variance") {
    plan = mean_variance_vi(target, lambda, 1e-8);
  } else if (planner == "cvar_augmented") {
    plan = cvar_budget_vi(target, tau, grid, n_budget, iters,
                          env.meta.start_state);
  } else if (planner == "cvar_greedy") {
    plan = cvar_greedy_vi(target, tau, grid, iters, env.meta.start_state);
  } else {
    std::cerr << "unknown planner: " << planner << "\n";
    return kExitConfigError;
  }
  Json j;
  j["planner"] = planner;
  j["iterations"] = plan.iterations;
  j["converged"] = plan.converged;
  j["values"] = plan.values;
  j["policy"] = policy_to_json(plan.policy);
  if (!out_path.empty()) {
    save_json(j, out_path);
    std::cout << "wrote " << out_path << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& env_name, const std::string& env_config,
             const std::string& policy_path, double tau, int n_trajectories,
             std::uint64_t seed, const std::string& out_path) {
  BuiltEnv env = build_env(make_env_spec(env_name, env_config));
  Policy policy = policy_from_json(load_json(policy_path));
  auto errs = validate_policy(policy, env.mdp);
  if (!errs.empty()) {
    std::cerr << "invalid policy: " << errs.front() << "\n";
    return kExitConfigError;
  }
  int horizon = env.meta.horizon_cap > 0 ? env.meta.horizon_cap
                                         : default_mc_horizon(env.mdp);
  SplitRng stream(seed);
  std::vector<double> returns;
  returns.reserve(n_trajectories);
  for (int i = 0; i < n_trajectories; ++i) {
    Trajectory t = sample_trajectory(env.mdp, policy, env.meta.start_state,
                                     horizon, stream.split(i).seed());
    returns.push_back(env.meta.undiscounted_eval ? undiscounted_return(t)
                                                 : t.discounted_return);
  }
  double cvar = empirical_cvar(returns, tau);
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= returns.size();
  Json j{{"env", env.name},       {"tau", tau},
         {"cvar", cvar},          {"mean_return", mean},
         {"horizon", horizon},    {"n_trajectories", n_trajectories},
         {"seed", seed},          {"rng_algorithm", SplitRng::kAlgorithmId},
         {"version", kToolkitVersion}};
  if (!out_path.empty()) {
    save_json(j, out_path);
    std::cout << "wrote " << out_path << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular risk-sensitive model-based RL toolkit"};
  app.require_subcommand(1);

  // experiment
  auto* experiment = app.add_subcommand(
      "experiment", "Run a configured model-learning experiment");
  std::string config_path, out_dir = "results";
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  experiment->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  experiment->add_option("--out", out_dir, "Output directory");
  experiment->add_option("--seed", seed_override, "Master seed override")
      ->each([&](const std::string&) { seed_given = true; });

  // check
  auto* check = app.add_subcommand("check", "Run the property suite");
  std::string profile = "fast";
  bool self_test = false;
  check->add_option("--profile", profile, "fast or full")
      ->check(CLI::IsMember({"fast", "full"}));
  check->add_flag("--self-test", self_test,
                  "Verify the suite detects injected defects");

  // export-env
  auto* export_env =
      app.add_subcommand("export-env", "Write an environment as an MDP file");
  std::string env_name = "coin_flip", env_config, out_path = "env.json";
  export_env->add_option("--env", env_name, "Environment name");
  export_env->add_option("--env-config", env_config, "Environment spec JSON");
  export_env->add_option("--out", out_path, "Output file")->required();

  // learn-model
  auto* learn = app.add_subcommand("learn-model",
                                   "Fit a model by equivalence loss or MLE");
  std::string l_env = "coin_flip", l_env_config, l_sketch = "moments2",
              l_out = "model.json";
  int l_k = 1, l_rank = 0, l_policies = 50, l_mle_samples = 100;
  OptConfig l_opt;
  learn->add_option("--env", l_env, "Environment name");
  learn->add_option("--env-config", l_env_config, "Environment spec JSON");
  learn->add_option("--sketch", l_sketch, "moments1, moments2 or mle")
      ->check(CLI::IsMember({"moments1", "moments2", "mle"}));
  learn->add_option("--k", l_k, "Backup applications in the loss");
  learn->add_option("--rank", l_rank, "Transition rank (0 = full)");
  learn->add_option("--policies", l_policies, "Policy-set size");
  learn->add_option("--iters", l_opt.iters, "Gradient iterations");
  learn->add_option("--step", l_opt.step, "Gradient step size");
  learn->add_option("--seed", l_opt.seed, "Seed");
  learn->add_option("--mle-samples", l_mle_samples,
                    "Samples per (state, action) for MLE");
  learn->add_option("--out", l_out, "Output model file")->required();

  // plan
  auto* plan = app.add_subcommand("plan", "Plan in an environment or model");
  std::string p_env = "coin_flip", p_env_config, p_model, p_out,
              p_planner = "cvar_greedy";
  double p_tau = 0.5, p_lambda = 0.5;
  int p_iters = 200, p_budget = 65;
  plan->add_option("--env", p_env, "Environment name");
  plan->add_option("--env-config", p_env_config, "Environment spec JSON");
  plan->add_option("--model", p_model, "Planning model file (default: true)");
  plan->add_option("--planner", p_planner,
                   "mean_variance, cvar_augmented or cvar_greedy");
  plan->add_option("--tau", p_tau, "CVaR level");
  plan->add_option("--lambda", p_lambda, "Mean-variance weight");
  plan->add_option("--iters", p_iters, "Sweep budget");
  plan->add_option("--n-budget", p_budget, "Budget levels (augmented)");
  plan->add_option("--out", p_out, "Output file (stdout if omitted)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a policy by rollouts");
  std::string e_env = "coin_flip", e_env_config, e_policy, e_out;
  double e_tau = 0.5;
  int e_trajectories = 1000;
  std::uint64_t e_seed = 1;
  eval->add_option("--env", e_env, "Environment name");
  eval->add_option("--env-config", e_env_config, "Environment spec JSON");
  eval->add_option("--policy", e_policy, "Policy file")->required();
  eval->add_option("--tau", e_tau, "CVaR level");
  eval->add_option("--trajectories", e_trajectories, "Rollout count");
  eval->add_option("--seed", e_seed, "Seed");
  eval->add_option("--out", e_out, "Output file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (experiment->parsed()) {
      ExperimentConfig config =
          experiment_config_from_json(load_json(config_path));
      if (seed_given) config.master_seed = seed_override;
      auto errs = validate_config(config);
      if (!errs.empty()) {
        for (const auto& e : errs) std::cerr << "config error: " << e << "\n";
        return kExitConfigError;
      }
      ExperimentResult result = run_experiment(config);
      write_experiment_files(result, out_dir);
      for (const auto& agg : result.aggregates)
        std::cout << agg.regime << "/" << agg.tie_mode << ": cvar "
                  << agg.mean_cvar << " +- " << agg.ci95 << " (n=" << agg.n
                  << ")\n";
      std::cout << "wrote " << out_dir << "/" << result.env_name
                << "_results.txt\n";
      return kExitOk;
    }
    if (check->parsed()) {
      if (self_test) {
        int undetected = run_property_selftest(std::cout);
        return undetected == 0 ? kExitOk : kExitPropertyFailure;
      }
      Profile p = profile == "full" ? Profile::full : Profile::fast;
      int failures = run_property_suite(p, std::cout);
      return failures == 0 ? kExitOk : kExitPropertyFailure;
    }
    if (export_env->parsed())
      return cmd_export_env(env_name, env_config, out_path);
    if (learn->parsed())
      return cmd_learn_model(l_env, l_env_config, l_sketch, l_k, l_rank,
                             l_policies, l_opt, l_mle_samples, l_out);
    if (plan->parsed())
      return cmd_plan(p_env, p_env_config, p_model, p_planner, p_tau, p_lambda,
                      p_iters, p_budget, p_out);
    if (eval->parsed())
      return cmd_eval(e_env, e_env_config, e_policy, e_tau, e_trajectories,
                      e_seed, e_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPropertyFailure;
  }
  return kExitOk;
}
