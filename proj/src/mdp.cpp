#include "riskdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riskdp {

std::vector<std::string> validate_mdp(const TabularMDP& mdp) {
  std::vector<std::string> errs;
  if (mdp.n_states <= 0) errs.push_back("n_states must be positive");
  if (mdp.n_actions <= 0) errs.push_back("n_actions must be positive");
  if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0))
    errs.push_back("gamma must lie in [0, 1)");
  if (mdp.r_max < 0.0) errs.push_back("r_max must be nonnegative");
  if (mdp.transition.rows != mdp.n_states * mdp.n_actions ||
      mdp.transition.cols != mdp.n_states) {
    errs.push_back("transition table has wrong shape");
    return errs;
  }
  if (static_cast<int>(mdp.reward.size()) != mdp.n_states * mdp.n_actions) {
    errs.push_back("reward table has wrong shape");
    return errs;
  }
  for (int x = 0; x < mdp.n_states; ++x) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      auto row = mdp.next_state_probs(x, a);
      double sum = 0.0;
      bool neg = false;
      for (double p : row) {
        sum += p;
        if (p < 0.0) neg = true;
      }
      if (neg) {
        std::ostringstream os;
        os << "negative transition probability at state " << x << " action "
           << a;
        errs.push_back(os.str());
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "transition row at state " << x << " action " << a
           << " sums to " << sum;
        errs.push_back(os.str());
      }
      const auto& r = mdp.reward_at(x, a);
      for (const auto& msg : validate_distribution(r)) {
        std::ostringstream os;
        os << "reward at state " << x << " action " << a << ": " << msg;
        errs.push_back(os.str());
      }
      for (double z : r.atoms) {
        if (std::abs(z) > mdp.r_max) {
          std::ostringstream os;
          os << "reward atom " << z << " at state " << x << " action " << a
             << " exceeds r_max " << mdp.r_max;
          errs.push_back(os.str());
          break;
        }
      }
    }
  }
  return errs;
}

std::vector<int> Policy::greedy_actions() const {
  std::vector<int> actions(n_states(), 0);
  for (int x = 0; x < n_states(); ++x) {
    auto row = at(x);
    actions[x] = static_cast<int>(
        std::max_element(row.begin(), row.end()) - row.begin());
  }
  return actions;
}

std::vector<std::string> validate_policy(const Policy& policy,
                                         const TabularMDP& mdp) {
  std::vector<std::string> errs;
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions) {
    errs.push_back("policy has wrong shape");
    return errs;
  }
  for (int x = 0; x < policy.n_states(); ++x) {
    double sum = 0.0;
    for (double p : policy.at(x)) {
      if (p < 0.0) {
        std::ostringstream os;
        os << "negative action probability at state " << x;
        errs.push_back(os.str());
        break;
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "action probabilities at state " << x << " sum to " << sum;
      errs.push_back(os.str());
    }
  }
  return errs;
}

Policy uniform_policy(int n_states, int n_actions) {
  Policy p{Matrix(n_states, n_actions, 1.0 / n_actions)};
  return p;
}

Policy deterministic_policy(const std::vector<int>& actions, int n_actions) {
  Policy p{Matrix(static_cast<int>(actions.size()), n_actions, 0.0)};
  for (std::size_t x = 0; x < actions.size(); ++x)
    p.action_probs(static_cast<int>(x), actions[x]) = 1.0;
  return p;
}

}  // namespace riskdp
