#include "riskdp/model_learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "riskdp/dist_dp.hpp"
#include "riskdp/rng.hpp"

namespace riskdp {

PolicySet sample_policies(const TabularMDP& mdp, int count,
                          std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be at least 1");
  PolicySet set;
  set.seed = seed;
  set.policies.reserve(count);
  SplitRng root(seed);
  for (int i = 0; i < count; ++i) {
    SplitRng rng = root.split(static_cast<std::uint64_t>(i));
    Policy policy{Matrix(mdp.n_states, mdp.n_actions, 0.0)};
    for (int x = 0; x < mdp.n_states; ++x) {
      auto row = policy.action_probs.row(x);
      double total = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        row[a] = rng.exponential();
        total += row[a];
      }
      for (int a = 0; a < mdp.n_actions; ++a) row[a] /= total;
    }
    set.policies.push_back(std::move(policy));
  }
  return set;
}

TransitionDataset sample_dataset(const TabularMDP& mdp, int per_pair,
                                 std::uint64_t seed) {
  TransitionDataset data;
  data.rows.reserve(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions *
                    per_pair);
  SplitRng root(seed);
  for (int x = 0; x < mdp.n_states; ++x) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      SplitRng rng = root.split(static_cast<std::uint64_t>(x) * mdp.n_actions + a);
      const auto& rdist = mdp.reward_at(x, a);
      auto next = mdp.next_state_probs(x, a);
      for (int i = 0; i < per_pair; ++i) {
        double r = rdist.atoms[rng.categorical(rdist.probs)];
        int y = static_cast<int>(rng.categorical(next));
        data.rows.push_back({x, a, r, y});
      }
    }
  }
  return data;
}

ApproxModel mle_model(const MdpShape& shape, const TransitionDataset& data,
                      double smoothing) {
  if (smoothing < 0.0) throw std::invalid_argument("smoothing must be >= 0");
  const int n_rows = shape.n_states * shape.n_actions;
  Matrix counts(n_rows, shape.n_states, 0.0);
  std::vector<std::map<double, int>> reward_counts(n_rows);
  for (const auto& row : data.rows) {
    if (row.state < 0 || row.state >= shape.n_states || row.action < 0 ||
        row.action >= shape.n_actions || row.next_state < 0 ||
        row.next_state >= shape.n_states)
      throw std::invalid_argument("dataset row out of range");
    int r = row.state * shape.n_actions + row.action;
    counts(r, row.next_state) += 1.0;
    reward_counts[r][row.reward] += 1;
  }

  ApproxModel model;
  model.n_states = shape.n_states;
  model.n_actions = shape.n_actions;
  model.gamma = shape.gamma;
  model.r_max = shape.r_max;
  model.rank = 0;
  model.logits = Matrix(n_rows, shape.n_states, 0.0);
  model.reward.resize(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    double total = 0.0;
    for (double c : counts.row(r)) total += c;
    auto dst = model.logits.row(r);
    if (total == 0.0 && smoothing == 0.0) {
      for (int y = 0; y < shape.n_states; ++y) dst[y] = 0.0;  // uniform row
    } else {
      double denom = total + smoothing * shape.n_states;
      for (int y = 0; y < shape.n_states; ++y) {
        double p = (counts(r, y) + smoothing) / denom;
        dst[y] = std::log(std::max(p, 1e-300));
      }
    }
    if (reward_counts[r].empty()) {
      model.reward[r] = DiscreteDistribution::point_mass(0.0);
    } else {
      DiscreteDistribution d;
      double n = 0.0;
      for (const auto& [atom, c] : reward_counts[r]) n += c;
      for (const auto& [atom, c] : reward_counts[r]) {
        d.atoms.push_back(atom);
        d.probs.push_back(c / n);
      }
      model.reward[r] = std::move(d);
    }
  }
  model.provenance.loss = "mle";
  return model;
}

std::vector<StatisticVector> true_statistics(const TabularMDP& mdp,
                                             const PolicySet& policies,
                                             const SketchSpec& sketch,
                                             double tol) {
  std::vector<StatisticVector> stats;
  stats.reserve(policies.policies.size());
  const ImputationSpec imp{ImputationSpec::Kind::two_point};
  for (const auto& policy : policies.policies)
    stats.push_back(sketch_fixed_point(mdp, policy, sketch, imp,
                                       SketchDpMode::closed_form, tol));
  return stats;
}

namespace {

struct RewardMoments {
  std::vector<double> mean;    // per (x, a)
  std::vector<double> second;  // per (x, a)
};

RewardMoments reward_moments(const std::vector<DiscreteDistribution>& reward) {
  RewardMoments m;
  m.mean.reserve(reward.size());
  m.second.reserve(reward.size());
  for (const auto& d : reward) {
    m.mean.push_back(d.mean());
    m.second.push_back(d.moment(2));
  }
  return m;
}

// One moment backup in raw coordinates against explicit transition rows.
void backup_raw(const Matrix& rows, const RewardMoments& rm, double gamma,
                int n_states, int n_actions, const Policy& policy,
                const Matrix& s, int m, Matrix& out) {
  for (int x = 0; x < n_states; ++x) {
    auto pi = policy.at(x);
    double mu1 = 0.0, mu2 = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (pi[a] == 0.0) continue;
      int r = x * n_actions + a;
      auto p = rows.row(r);
      double e1 = 0.0, e2 = 0.0;
      for (int y = 0; y < n_states; ++y) {
        e1 += p[y] * s(y, 0);
        if (m == 2) e2 += p[y] * s(y, 1);
      }
      mu1 += pi[a] * (rm.mean[r] + gamma * e1);
      if (m == 2)
        mu2 += pi[a] * (rm.second[r] + 2.0 * gamma * rm.mean[r] * e1 +
                        gamma * gamma * e2);
    }
    out(x, 0) = mu1;
    if (m == 2) out(x, 1) = mu2;
  }
}

}  // namespace

double equivalence_loss(const std::vector<StatisticVector>& true_stats,
                        const ApproxModel& model, const PolicySet& policies,
                        const SketchSpec& sketch, int k, double p) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (p < 1.0) throw std::invalid_argument("p must be at least 1");
  if (true_stats.size() != policies.policies.size())
    throw std::invalid_argument("one statistic table per policy required");
  const int m = sketch.m;
  if (m > 2)
    throw std::invalid_argument("loss uses the closed-form backup; m <= 2");

  Matrix rows = model.realized_transition();
  RewardMoments rm = reward_moments(model.reward);

  double loss = 0.0;
  Matrix s(model.n_states, m, 0.0);
  Matrix next(model.n_states, m, 0.0);
  for (std::size_t i = 0; i < policies.policies.size(); ++i) {
    const Policy& policy = policies.policies[i];
    const StatisticVector& target = true_stats[i];
    if (target.rows != model.n_states || target.cols != m)
      throw std::invalid_argument("statistic table has wrong shape");
    // Work in raw moment coordinates.
    for (int x = 0; x < model.n_states; ++x) {
      auto raw = to_raw_moments(sketch, target.row(x));
      for (int j = 0; j < m; ++j) s(x, j) = raw[j];
    }
    for (int step = 0; step < k; ++step) {
      backup_raw(rows, rm, model.gamma, model.n_states, model.n_actions,
                 policy, s, m, next);
      std::swap(s, next);
    }
    for (int x = 0; x < model.n_states; ++x) {
      auto got = from_raw_moments(sketch, s.row(x));
      for (int j = 0; j < m; ++j) {
        double dev = std::abs(got[j] - target(x, j));
        loss += std::pow(dev, p);
      }
    }
  }
  return loss;
}

namespace {

struct Gradients {
  Matrix logits;              // full
  Matrix left;                // low-rank
  std::vector<Matrix> right;  // low-rank
};

// Loss and gradient with respect to transition logits for the p = 2
// equivalence loss in raw moment coordinates (moments sketch).
double loss_and_gradient(const ApproxModel& model, const Matrix& rows,
                         const RewardMoments& rm,
                         const std::vector<StatisticVector>& targets,
                         const PolicySet& policies, int m, int k,
                         Gradients& grad) {
  const int n_states = model.n_states;
  const int n_actions = model.n_actions;
  const double g = model.gamma;

  Matrix grad_rows(n_states * n_actions, n_states, 0.0);
  double loss = 0.0;

  std::vector<Matrix> iterates(static_cast<std::size_t>(k) + 1,
                               Matrix(n_states, m, 0.0));
  Matrix adj(n_states, m, 0.0);
  Matrix adj_next(n_states, m, 0.0);

  for (std::size_t pi_idx = 0; pi_idx < policies.policies.size(); ++pi_idx) {
    const Policy& policy = policies.policies[pi_idx];
    const StatisticVector& target = targets[pi_idx];

    iterates[0] = target;
    for (int step = 0; step < k; ++step)
      backup_raw(rows, rm, g, n_states, n_actions, policy, iterates[step], m,
                 iterates[step + 1]);

    // Adjoint of the squared deviation at the final iterate.
    for (int x = 0; x < n_states; ++x)
      for (int j = 0; j < m; ++j) {
        double dev = iterates[k](x, j) - target(x, j);
        loss += dev * dev;
        adj(x, j) = 2.0 * dev;
      }

    for (int step = k - 1; step >= 0; --step) {
      const Matrix& s_in = iterates[step];
      for (auto& v : adj_next.data) v = 0.0;
      for (int x = 0; x < n_states; ++x) {
        auto pi = policy.at(x);
        double g1 = adj(x, 0);
        double g2 = m == 2 ? adj(x, 1) : 0.0;
        if (g1 == 0.0 && g2 == 0.0) continue;
        for (int a = 0; a < n_actions; ++a) {
          if (pi[a] == 0.0) continue;
          int r = x * n_actions + a;
          auto p = rows.row(r);
          auto gp = grad_rows.row(r);
          double c1 = pi[a] * (g * g1 + 2.0 * g * rm.mean[r] * g2);
          double c2 = pi[a] * g * g * g2;
          for (int y = 0; y < n_states; ++y) {
            gp[y] += c1 * s_in(y, 0) + (m == 2 ? c2 * s_in(y, 1) : 0.0);
            adj_next(y, 0) += c1 * p[y];
            if (m == 2) adj_next(y, 1) += c2 * p[y];
          }
        }
      }
      std::swap(adj, adj_next);
    }
  }

  // Chain through the row-wise softmax: for row probabilities q and row
  // gradient gq, the logit gradient is q .* (gq - <q, gq>).
  Matrix grad_logits(n_states * n_actions, n_states, 0.0);
  for (int r = 0; r < grad_rows.rows; ++r) {
    auto q = rows.row(r);
    auto gq = grad_rows.row(r);
    double inner = 0.0;
    for (int y = 0; y < n_states; ++y) inner += q[y] * gq[y];
    auto gl = grad_logits.row(r);
    for (int y = 0; y < n_states; ++y) gl[y] = q[y] * (gq[y] - inner);
  }

  if (model.rank == 0) {
    grad.logits = std::move(grad_logits);
  } else {
    grad.left = Matrix(n_states, model.rank, 0.0);
    grad.right.assign(n_actions, Matrix(model.rank, n_states, 0.0));
    for (int x = 0; x < n_states; ++x) {
      for (int a = 0; a < n_actions; ++a) {
        auto gl = grad_logits.row(x * n_actions + a);
        const Matrix& r_a = model.right[a];
        Matrix& gr_a = grad.right[a];
        for (int d = 0; d < model.rank; ++d) {
          double acc = 0.0;
          for (int y = 0; y < n_states; ++y) {
            acc += gl[y] * r_a(d, y);
            gr_a(d, y) += model.left(x, d) * gl[y];
          }
          grad.left(x, d) += acc;
        }
      }
    }
  }
  return loss;
}

}  // namespace

std::pair<double, Matrix> equivalence_loss_gradient(
    const std::vector<StatisticVector>& true_stats, const ApproxModel& model,
    const PolicySet& policies, const SketchSpec& sketch, int k) {
  if (model.rank != 0)
    throw std::invalid_argument("gradient diagnostic expects a full-rank model");
  if (sketch.kind != SketchSpec::Kind::moments || sketch.m > 2)
    throw std::invalid_argument("gradient requires a moments(1|2) sketch");
  Matrix rows = model.realized_transition();
  RewardMoments rm = reward_moments(model.reward);
  Gradients grad;
  double loss = loss_and_gradient(model, rows, rm, true_stats, policies,
                                  sketch.m, k, grad);
  return {loss, std::move(grad.logits)};
}

ApproxModel learn_model(const TabularMDP& mdp, const PolicySet& policies,
                        const SketchSpec& sketch, int k, int rank,
                        const OptConfig& opt, const TransitionDataset* data) {
  if (policies.policies.empty())
    throw std::invalid_argument("policy set must be nonempty");
  if (sketch.kind != SketchSpec::Kind::moments || sketch.m > 2)
    throw std::invalid_argument(
        "learning uses the closed-form backup; sketch must be moments(1) or "
        "moments(2)");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (rank < 0 || rank > mdp.n_states)
    throw std::invalid_argument("rank must lie in [0, n_states]");

  ApproxModel model;
  model.n_states = mdp.n_states;
  model.n_actions = mdp.n_actions;
  model.gamma = mdp.gamma;
  model.r_max = mdp.r_max;
  model.rank = rank;
  if (data != nullptr) {
    ApproxModel est = mle_model(MdpShape::of(mdp), *data, 1e-3);
    model.reward = std::move(est.reward);
  } else {
    model.reward = mdp.reward;
  }

  SplitRng rng(opt.seed);
  if (rank == 0) {
    model.logits = Matrix(mdp.n_states * mdp.n_actions, mdp.n_states, 0.0);
    SplitRng stream = rng.split(0);
    for (auto& v : model.logits.data) v = opt.init_scale * stream.gaussian();
  } else {
    double scale = opt.init_scale / std::sqrt(static_cast<double>(rank));
    model.left = Matrix(mdp.n_states, rank, 0.0);
    SplitRng stream = rng.split(1);
    for (auto& v : model.left.data) v = scale * stream.gaussian();
    model.right.assign(mdp.n_actions, Matrix(rank, mdp.n_states, 0.0));
    for (int a = 0; a < mdp.n_actions; ++a) {
      SplitRng s = rng.split(2 + static_cast<std::uint64_t>(a));
      for (auto& v : model.right[a].data) v = scale * s.gaussian();
    }
  }

  std::vector<StatisticVector> targets =
      true_statistics(mdp, policies, sketch, 1e-11);

  double best_loss = std::numeric_limits<double>::infinity();
  Matrix best_logits = model.logits;
  Matrix best_left = model.left;
  std::vector<Matrix> best_right = model.right;

  struct AdamState {
    std::vector<double> m, v;
    void init(std::size_t n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
    void update(std::vector<double>& params, const std::vector<double>& grad,
                double lr, int t) {
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      double c1 = 1.0 - std::pow(b1, t);
      double c2 = 1.0 - std::pow(b2, t);
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
  };
  AdamState adam_logits, adam_left;
  std::vector<AdamState> adam_right(mdp.n_actions);
  if (rank == 0) {
    adam_logits.init(model.logits.data.size());
  } else {
    adam_left.init(model.left.data.size());
    for (int a = 0; a < mdp.n_actions; ++a)
      adam_right[a].init(model.right[a].data.size());
  }

  Gradients grad;
  for (int it = 1; it <= opt.iters; ++it) {
    Matrix rows = model.realized_transition();
    RewardMoments rm = reward_moments(model.reward);
    double loss = loss_and_gradient(model, rows, rm, targets, policies,
                                    sketch.m, k, grad);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "equivalence loss became non-finite at iteration " << it
         << "; reduce the step size";
      throw std::runtime_error(os.str());
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_logits = model.logits;
      best_left = model.left;
      best_right = model.right;
    }
    if (rank == 0) {
      adam_logits.update(model.logits.data, grad.logits.data, opt.step, it);
    } else {
      adam_left.update(model.left.data, grad.left.data, opt.step, it);
      for (int a = 0; a < mdp.n_actions; ++a)
        adam_right[a].update(model.right[a].data, grad.right[a].data, opt.step,
                             it);
    }
  }

  // Final candidate might beat the stored best.
  {
    Matrix rows = model.realized_transition();
    RewardMoments rm = reward_moments(model.reward);
    Gradients scratch;
    double loss = loss_and_gradient(model, rows, rm, targets, policies,
                                    sketch.m, k, scratch);
    if (std::isfinite(loss) && loss < best_loss) {
      best_loss = loss;
      best_logits = model.logits;
      best_left = model.left;
      best_right = model.right;
    }
  }

  model.logits = std::move(best_logits);
  model.left = std::move(best_left);
  model.right = std::move(best_right);
  model.provenance.loss = "equivalence";
  model.provenance.sketch = sketch.describe();
  model.provenance.k = k;
  model.provenance.p = 2.0;
  model.provenance.rank = rank;
  model.provenance.seed = opt.seed;
  model.provenance.final_loss = best_loss;
  return model;
}

double sample_based_loss(const ApproxModel& model,
                         const TransitionDataset& data,
                         const Matrix& stat_table, int n_draws,
                         std::uint64_t seed) {
  if (data.rows.empty()) throw std::invalid_argument("dataset is empty");
  if (n_draws < 1) throw std::invalid_argument("n_draws must be at least 1");
  if (stat_table.rows != model.n_states)
    throw std::invalid_argument("statistic table has wrong shape");

  Matrix rows = model.realized_transition();
  SplitRng root(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& row = data.rows[i];
    SplitRng rng = root.split(i);
    auto p = rows.row(row.state * model.n_actions + row.action);
    double acc = 0.0;
    for (int d = 0; d < n_draws; ++d) {
      int sampled = static_cast<int>(rng.categorical(p));
      double sq = 0.0;
      for (int j = 0; j < stat_table.cols; ++j) {
        double diff = stat_table(row.next_state, j) - stat_table(sampled, j);
        sq += diff * diff;
      }
      acc += sq;
    }
    total += acc / n_draws;
  }
  return total / static_cast<double>(data.rows.size());
}

MembershipReport membership_check(const ApproxModel& model,
                                  const TabularMDP& mdp,
                                  const PolicySet& policies,
                                  const MembershipQuery& query,
                                  const GridSpec& grid, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  TabularMDP realized = model.realize();
  if (realized.n_states != mdp.n_states ||
      realized.n_actions != mdp.n_actions)
    throw std::invalid_argument("model and MDP shapes differ");

  const ImputationSpec imp{ImputationSpec::Kind::two_point};
  const double sup_tol = std::min(1e-11, tol * 1e-3);
  const double l1_tol = std::min(1e-8, tol * 1e-2);

  MembershipReport report;
  for (const auto& policy : policies.policies) {
    double deviation = 0.0;
    switch (query.criterion) {
      case MembershipCriterion::psi_proper: {
        StatisticVector st = sketch_fixed_point(
            mdp, policy, query.sketch, imp, SketchDpMode::closed_form, sup_tol);
        StatisticVector sm =
            sketch_fixed_point(realized, policy, query.sketch, imp,
                               SketchDpMode::closed_form, sup_tol);
        deviation = max_abs_diff(st, sm);
        break;
      }
      case MembershipCriterion::psi_k: {
        StatisticVector start = sketch_fixed_point(
            mdp, policy, query.sketch, imp, SketchDpMode::closed_form, sup_tol);
        Matrix raw(start.rows, query.sketch.m, 0.0);
        for (int x = 0; x < start.rows; ++x) {
          auto r = to_raw_moments(query.sketch, start.row(x));
          for (int j = 0; j < query.sketch.m; ++j) raw(x, j) = r[j];
        }
        Matrix a = raw, b = raw;
        for (int step = 0; step < query.k; ++step) {
          a = moment_backup(mdp, policy, a, query.sketch.m);
          b = moment_backup(realized, policy, b, query.sketch.m);
        }
        deviation = max_abs_diff(a, b);
        break;
      }
      case MembershipCriterion::dist_proper: {
        ReturnFunction et = return_distribution(mdp, policy, grid, l1_tol);
        ReturnFunction em = return_distribution(realized, policy, grid, l1_tol);
        deviation = max_l1_distance(et, em);
        break;
      }
      case MembershipCriterion::dist_k: {
        ReturnFunction start = return_distribution(mdp, policy, grid, l1_tol);
        ReturnFunction a = start, b = start;
        for (int step = 0; step < query.k; ++step) {
          a = distributional_backup(mdp, policy, a);
          b = distributional_backup(realized, policy, b);
        }
        deviation = max_l1_distance(a, b);
        break;
      }
    }
    report.per_policy.push_back({deviation, deviation <= tol});
    report.max_deviation = std::max(report.max_deviation, deviation);
    if (deviation > tol) report.all_pass = false;
  }
  return report;
}

}  // namespace riskdp
