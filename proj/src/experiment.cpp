#include "riskdp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "riskdp/dist_dp.hpp"
#include "riskdp/rng.hpp"
#include "riskdp/trajectory.hpp"

namespace riskdp {

namespace {

int regime_stream_id(const std::string& regime) {
  if (regime == "true") return 0;
  if (regime == "mle") return 1;
  if (regime == "pve") return 2;
  if (regime == "psi2") return 3;
  throw std::invalid_argument("unknown regime: " + regime);
}

}  // namespace

std::vector<std::string> validate_config(const ExperimentConfig& config) {
  std::vector<std::string> errs;
  try {
    build_env(config.env);
  } catch (const std::exception& e) {
    errs.push_back(std::string("env: ") + e.what());
  }
  if (config.regimes.empty()) errs.push_back("regimes must be nonempty");
  for (const auto& regime : config.regimes) {
    if (regime != "mle" && regime != "pve" && regime != "psi2")
      errs.push_back("unknown regime: " + regime);
  }
  if (config.planner.kind != "mean_variance" &&
      config.planner.kind != "cvar_augmented" &&
      config.planner.kind != "cvar_greedy")
    errs.push_back("unknown planner: " + config.planner.kind);
  for (const auto& msg : validate_risk(config.planner.risk))
    errs.push_back("planner risk: " + msg);
  if (config.n_policies < 1) errs.push_back("n_policies must be >= 1");
  if (config.n_seeds < 1) errs.push_back("n_seeds must be >= 1");
  if (config.n_eval_trajectories < 1)
    errs.push_back("n_eval_trajectories must be >= 1");
  if (config.n_atoms < 2) errs.push_back("n_atoms must be >= 2");
  if (!(config.eval_tau > 0.0 && config.eval_tau <= 1.0))
    errs.push_back("eval_tau must lie in (0, 1]");
  if (config.k < 1) errs.push_back("k must be >= 1");
  if (config.learn.iters < 1) errs.push_back("learn.iters must be >= 1");
  if (!(config.learn.step > 0.0)) errs.push_back("learn.step must be > 0");
  if (config.mle.samples_per_pair < 1)
    errs.push_back("mle.samples_per_pair must be >= 1");
  return errs;
}

Json experiment_config_to_json(const ExperimentConfig& config) {
  Json j;
  j["env"] = env_to_json(config.env);
  j["regimes"] = config.regimes;
  j["planner"] = Json{{"kind", config.planner.kind},
                      {"risk", risk_to_json(config.planner.risk)},
                      {"lambda", config.planner.lambda},
                      {"theta", config.planner.theta},
                      {"iters", config.planner.iters},
                      {"n_budget", config.planner.n_budget}};
  j["n_policies"] = config.n_policies;
  j["n_seeds"] = config.n_seeds;
  j["n_eval_trajectories"] = config.n_eval_trajectories;
  j["n_atoms"] = config.n_atoms;
  j["learn"] = Json{{"step", config.learn.step},
                    {"iters", config.learn.iters},
                    {"init_scale", config.learn.init_scale}};
  j["k"] = config.k;
  j["eval_tau"] = config.eval_tau;
  j["mle"] = Json{{"samples_per_pair", config.mle.samples_per_pair},
                  {"smoothing", config.mle.smoothing}};
  j["master_seed"] = config.master_seed;
  j["eval_tol"] = config.eval_tol;
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig config;
  config.env = env_from_json(j.at("env"));
  if (j.contains("regimes"))
    config.regimes = j.at("regimes").get<std::vector<std::string>>();
  if (j.contains("planner")) {
    const Json& p = j.at("planner");
    if (p.contains("kind")) config.planner.kind = p.at("kind").get<std::string>();
    if (p.contains("risk")) config.planner.risk = risk_from_json(p.at("risk"));
    if (p.contains("lambda")) config.planner.lambda = p.at("lambda").get<double>();
    if (p.contains("theta")) config.planner.theta = p.at("theta").get<double>();
    if (p.contains("iters")) config.planner.iters = p.at("iters").get<int>();
    if (p.contains("n_budget"))
      config.planner.n_budget = p.at("n_budget").get<int>();
  }
  if (j.contains("n_policies")) config.n_policies = j.at("n_policies").get<int>();
  if (j.contains("n_seeds")) config.n_seeds = j.at("n_seeds").get<int>();
  if (j.contains("n_eval_trajectories"))
    config.n_eval_trajectories = j.at("n_eval_trajectories").get<int>();
  if (j.contains("n_atoms")) config.n_atoms = j.at("n_atoms").get<int>();
  if (j.contains("learn")) {
    const Json& l = j.at("learn");
    if (l.contains("step")) config.learn.step = l.at("step").get<double>();
    if (l.contains("iters")) config.learn.iters = l.at("iters").get<int>();
    if (l.contains("init_scale"))
      config.learn.init_scale = l.at("init_scale").get<double>();
  }
  if (j.contains("k")) config.k = j.at("k").get<int>();
  if (j.contains("eval_tau")) config.eval_tau = j.at("eval_tau").get<double>();
  if (j.contains("mle")) {
    const Json& m = j.at("mle");
    if (m.contains("samples_per_pair"))
      config.mle.samples_per_pair = m.at("samples_per_pair").get<int>();
    if (m.contains("smoothing"))
      config.mle.smoothing = m.at("smoothing").get<double>();
  }
  if (j.contains("master_seed"))
    config.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("eval_tol")) config.eval_tol = j.at("eval_tol").get<double>();
  return config;
}

namespace {

struct Harness {
  const ExperimentConfig& config;
  BuiltEnv env;
  GridSpec grid;
  int horizon;

  PlanResult plan_in(const TabularMDP& model_mdp) const {
    const PlannerConfig& p = config.planner;
    if (p.kind == "mean_variance")
      return mean_variance_vi(model_mdp, p.lambda, p.theta);
    if (p.kind == "cvar_augmented")
      return cvar_budget_vi(model_mdp, p.risk.tau, grid, p.n_budget, p.iters,
                            env.meta.start_state, config.eval_tol);
    return cvar_greedy_vi(model_mdp, p.risk.tau, grid, p.iters,
                          env.meta.start_state, 1e-9, config.eval_tol);
  }

  // Among actions tied in the model, pick the one scoring worst in the true
  // environment. Scores come from a one-step backup of the default policy's
  // true-environment evaluation.
  Policy adversarial_policy(const PlanResult& plan) const {
    const TabularMDP& mdp = env.mdp;
    std::vector<int> actions = plan.policy.greedy_actions();
    constexpr double kTieTol = 1e-9;

    bool any_tie = false;
    for (int x = 0; x < mdp.n_states && !any_tie; ++x) {
      double best = plan.action_values(x, actions[x]);
      for (int a = 0; a < mdp.n_actions; ++a)
        if (a != actions[x] && plan.action_values(x, a) >= best - kTieTol)
          any_tie = true;
    }
    if (!any_tie) return plan.policy;

    if (config.planner.kind == "mean_variance") {
      StatisticVector s = sketch_fixed_point(
          mdp, plan.policy, SketchSpec::moments(2),
          ImputationSpec{ImputationSpec::Kind::two_point},
          SketchDpMode::closed_form, 1e-10);
      for (int x = 0; x < mdp.n_states; ++x) {
        double best = plan.action_values(x, actions[x]);
        double worst_score = 0.0;
        int pick = actions[x];
        bool first = true;
        for (int a = 0; a < mdp.n_actions; ++a) {
          if (plan.action_values(x, a) < best - kTieTol) continue;
          double e1 = 0.0, e2 = 0.0;
          auto next = mdp.next_state_probs(x, a);
          for (int y = 0; y < mdp.n_states; ++y) {
            e1 += next[y] * s(y, 0);
            e2 += next[y] * s(y, 1);
          }
          double rbar = mdp.mean_reward(x, a);
          double v = rbar + mdp.gamma * e1;
          double m2 = mdp.second_moment_reward(x, a) +
                      2.0 * mdp.gamma * rbar * e1 +
                      mdp.gamma * mdp.gamma * e2;
          double score = v - config.planner.lambda * (m2 - v * v);
          if (first || score < worst_score) {
            worst_score = score;
            pick = a;
            first = false;
          }
        }
        actions[x] = pick;
      }
      return deterministic_policy(actions, mdp.n_actions);
    }

    ReturnFunction eta_true =
        return_distribution(mdp, plan.policy, grid, config.eval_tol);
    RiskSpec score_risk = RiskSpec::cvar(config.planner.risk.tau);
    for (int x = 0; x < mdp.n_states; ++x) {
      double best = plan.action_values(x, actions[x]);
      double worst_score = 0.0;
      int pick = actions[x];
      bool first = true;
      for (int a = 0; a < mdp.n_actions; ++a) {
        if (plan.action_values(x, a) < best - kTieTol) continue;
        double score = risk_value(
            score_risk, action_backup_distribution(mdp, x, a, eta_true));
        if (first || score < worst_score) {
          worst_score = score;
          pick = a;
          first = false;
        }
      }
      actions[x] = pick;
    }
    return deterministic_policy(actions, mdp.n_actions);
  }

  std::pair<double, double> evaluate(const Policy& policy,
                                     const SplitRng& stream) const {
    std::vector<double> returns;
    returns.reserve(config.n_eval_trajectories);
    for (int i = 0; i < config.n_eval_trajectories; ++i) {
      Trajectory t =
          sample_trajectory(env.mdp, policy, env.meta.start_state, horizon,
                            stream.split(static_cast<std::uint64_t>(i)).seed());
      returns.push_back(env.meta.undiscounted_eval ? undiscounted_return(t)
                                                   : t.discounted_return);
    }
    double cvar = empirical_cvar(returns, config.eval_tau);
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    return {cvar, mean};
  }
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  auto errs = validate_config(config);
  if (!errs.empty()) {
    std::string joined;
    for (const auto& e : errs) joined += e + "; ";
    throw std::invalid_argument("invalid experiment config: " + joined);
  }

  Harness h{config, build_env(config.env),
            GridSpec{},  // filled below
            0};
  h.grid = GridSpec::return_range(h.env.mdp, config.n_atoms);
  h.horizon = h.env.meta.horizon_cap > 0 ? h.env.meta.horizon_cap
                                         : default_mc_horizon(h.env.mdp);

  ExperimentResult result;
  result.config = config;
  result.env_name = h.env.name;
  result.env_notes = h.env.meta.notes;
  result.horizon = h.horizon;
  result.undiscounted_eval = h.env.meta.undiscounted_eval;

  SplitRng root(config.master_seed);

  // Reference: plan in the true environment once, evaluate per seed.
  PlanResult true_plan = h.plan_in(h.env.mdp);
  for (int seed = 0; seed < config.n_seeds; ++seed) {
    SplitRng srng = root.split(static_cast<std::uint64_t>(seed));
    SplitRng eval_stream = srng.split(1000 + regime_stream_id("true") * 4);
    auto [cvar, mean] = h.evaluate(true_plan.policy, eval_stream);
    ExperimentRow row;
    row.regime = "true";
    row.tie_mode = "default";
    row.seed = static_cast<std::uint64_t>(seed);
    row.cvar = cvar;
    row.mean_return = mean;
    row.policy_actions = true_plan.policy.greedy_actions();
    result.rows.push_back(std::move(row));
  }

  for (int seed = 0; seed < config.n_seeds; ++seed) {
    SplitRng srng = root.split(static_cast<std::uint64_t>(seed));
    PolicySet policies = sample_policies(h.env.mdp, config.n_policies,
                                         srng.split(0).seed());
    for (const auto& regime : config.regimes) {
      int rid = regime_stream_id(regime);
      ApproxModel model;
      if (regime == "mle") {
        TransitionDataset data = sample_dataset(
            h.env.mdp, config.mle.samples_per_pair, srng.split(10).seed());
        model = mle_model(MdpShape::of(h.env.mdp), data, config.mle.smoothing);
      } else {
        OptConfig opt = config.learn;
        opt.seed = srng.split(20 + rid).seed();
        SketchSpec sketch = regime == "pve" ? SketchSpec::moments(1)
                                            : SketchSpec::moments(2);
        model = learn_model(h.env.mdp, policies, sketch, config.k, 0, opt);
      }
      TabularMDP model_mdp = model.realize();
      PlanResult plan = h.plan_in(model_mdp);
      Policy adversarial = h.adversarial_policy(plan);

      for (int mode = 0; mode < 2; ++mode) {
        const Policy& policy = mode == 0 ? plan.policy : adversarial;
        SplitRng eval_stream = srng.split(1000 + rid * 4 + mode);
        auto [cvar, mean] = h.evaluate(policy, eval_stream);
        ExperimentRow row;
        row.regime = regime;
        row.tie_mode = mode == 0 ? "default" : "adversarial";
        row.seed = static_cast<std::uint64_t>(seed);
        row.cvar = cvar;
        row.mean_return = mean;
        row.final_loss = model.provenance.final_loss;
        row.policy_actions = policy.greedy_actions();
        result.rows.push_back(std::move(row));
      }
    }
  }

  std::sort(result.rows.begin(), result.rows.end(),
            [](const ExperimentRow& a, const ExperimentRow& b) {
              if (a.regime != b.regime) return a.regime < b.regime;
              if (a.tie_mode != b.tie_mode) return a.tie_mode < b.tie_mode;
              return a.seed < b.seed;
            });
  result.aggregates = aggregate_rows(result.rows);
  return result;
}

std::vector<ExperimentAggregate> aggregate_rows(
    const std::vector<ExperimentRow>& rows) {
  std::vector<ExperimentRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const ExperimentRow& a, const ExperimentRow& b) {
              if (a.regime != b.regime) return a.regime < b.regime;
              if (a.tie_mode != b.tie_mode) return a.tie_mode < b.tie_mode;
              return a.seed < b.seed;
            });
  std::vector<ExperimentAggregate> aggregates;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    double sum = 0.0, sum_return = 0.0;
    while (j < sorted.size() && sorted[j].regime == sorted[i].regime &&
           sorted[j].tie_mode == sorted[i].tie_mode) {
      sum += sorted[j].cvar;
      sum_return += sorted[j].mean_return;
      ++j;
    }
    int n = static_cast<int>(j - i);
    double mean = sum / n;
    double ss = 0.0;
    for (std::size_t t = i; t < j; ++t) {
      double d = sorted[t].cvar - mean;
      ss += d * d;
    }
    double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    ExperimentAggregate agg;
    agg.regime = sorted[i].regime;
    agg.tie_mode = sorted[i].tie_mode;
    agg.n = n;
    agg.mean_cvar = mean;
    agg.ci95 = n > 1 ? 1.96 * sd / std::sqrt(static_cast<double>(n)) : 0.0;
    agg.mean_return = sum_return / n;
    aggregates.push_back(std::move(agg));
    i = j;
  }
  return aggregates;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void write_experiment_files(const ExperimentResult& result,
                            const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string base = out_dir + "/" + result.env_name;

  {
    std::ofstream out(base + "_results.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write results file");
    out << "# " << result.env_name << " experiment results\n";
    out << "# toolkit " << kToolkitVersion << "; rng "
        << SplitRng::kAlgorithmId << "\n";
    out << "# planner " << result.config.planner.kind << "; eval cvar tau "
        << fmt(result.config.eval_tau) << "; horizon " << result.horizon
        << "; returns "
        << (result.undiscounted_eval ? "undiscounted" : "discounted") << "\n";
    for (const auto& note : result.env_notes) out << "# env " << note << "\n";
    out << "# columns: regime tie_mode seed cvar mean_return\n";
    for (const auto& row : result.rows)
      out << row.regime << " " << row.tie_mode << " " << row.seed << " "
          << fmt(row.cvar) << " " << fmt(row.mean_return) << "\n";
    out << "# aggregate columns: regime tie_mode n mean_cvar ci95 "
           "mean_return\n";
    for (const auto& agg : result.aggregates)
      out << "aggregate " << agg.regime << " " << agg.tie_mode << " " << agg.n
          << " " << fmt(agg.mean_cvar) << " " << fmt(agg.ci95) << " "
          << fmt(agg.mean_return) << "\n";
  }

  {
    Json j;
    j["version"] = kToolkitVersion;
    j["rng_algorithm"] = std::string(SplitRng::kAlgorithmId);
    j["config"] = experiment_config_to_json(result.config);
    j["env_notes"] = result.env_notes;
    j["horizon"] = result.horizon;
    j["undiscounted_eval"] = result.undiscounted_eval;
    Json rows = Json::array();
    for (const auto& row : result.rows) {
      rows.push_back(Json{{"regime", row.regime},
                          {"tie_mode", row.tie_mode},
                          {"seed", row.seed},
                          {"cvar", row.cvar},
                          {"mean_return", row.mean_return},
                          {"final_loss", row.final_loss},
                          {"policy", row.policy_actions}});
    }
    j["rows"] = std::move(rows);
    Json aggs = Json::array();
    for (const auto& agg : result.aggregates) {
      aggs.push_back(Json{{"regime", agg.regime},
                          {"tie_mode", agg.tie_mode},
                          {"n", agg.n},
                          {"mean_cvar", agg.mean_cvar},
                          {"ci95", agg.ci95},
                          {"mean_return", agg.mean_return}});
    }
    j["aggregates"] = std::move(aggs);
    save_json(j, base + "_summary.json");
  }
}

}  // namespace riskdp
