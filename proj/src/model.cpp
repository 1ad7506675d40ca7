#include "riskdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace riskdp {

void softmax_row(std::span<const double> logits, std::span<double> out) {
  double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
}

Matrix ApproxModel::realized_transition() const {
  const int n_rows = n_states * n_actions;
  Matrix rows(n_rows, n_states, 0.0);
  if (rank == 0) {
    if (logits.rows != n_rows || logits.cols != n_states)
      throw std::invalid_argument("model logits have wrong shape");
    for (int r = 0; r < n_rows; ++r) softmax_row(logits.row(r), rows.row(r));
    return rows;
  }
  if (left.rows != n_states || left.cols != rank ||
      static_cast<int>(right.size()) != n_actions)
    throw std::invalid_argument("low-rank factors have wrong shape");
  std::vector<double> row_logits(n_states, 0.0);
  for (int x = 0; x < n_states; ++x) {
    for (int a = 0; a < n_actions; ++a) {
      const Matrix& r_a = right[a];
      for (int y = 0; y < n_states; ++y) {
        double v = 0.0;
        for (int d = 0; d < rank; ++d) v += left(x, d) * r_a(d, y);
        row_logits[y] = v;
      }
      softmax_row(row_logits, rows.row(x * n_actions + a));
    }
  }
  return rows;
}

TabularMDP ApproxModel::realize() const {
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_max = r_max;
  mdp.transition = realized_transition();
  mdp.reward = reward;
  return mdp;
}

ApproxModel ApproxModel::from_mdp(const TabularMDP& mdp) {
  ApproxModel model;
  model.n_states = mdp.n_states;
  model.n_actions = mdp.n_actions;
  model.gamma = mdp.gamma;
  model.r_max = mdp.r_max;
  model.rank = 0;
  model.logits = Matrix(mdp.n_states * mdp.n_actions, mdp.n_states, 0.0);
  for (int r = 0; r < model.logits.rows; ++r) {
    auto src = mdp.transition.row(r);
    auto dst = model.logits.row(r);
    for (int y = 0; y < mdp.n_states; ++y)
      dst[y] = std::log(std::max(src[y], 1e-300));
  }
  model.reward = mdp.reward;
  model.provenance.loss = "constructed";
  return model;
}

std::vector<std::string> validate_model(const ApproxModel& model) {
  std::vector<std::string> errs;
  Matrix rows;
  try {
    rows = model.realized_transition();
  } catch (const std::exception& e) {
    errs.push_back(e.what());
    return errs;
  }
  for (int r = 0; r < rows.rows; ++r) {
    double sum = 0.0;
    bool neg = false;
    for (double p : rows.row(r)) {
      sum += p;
      if (p < 0.0) neg = true;
    }
    if (neg || std::abs(sum - 1.0) > 1e-10) {
      std::ostringstream os;
      os << "realized transition row " << r << " is not a probability vector";
      errs.push_back(os.str());
    }
  }
  if (static_cast<int>(model.reward.size()) !=
      model.n_states * model.n_actions)
    errs.push_back("reward table has wrong shape");
  return errs;
}

}  // namespace riskdp
