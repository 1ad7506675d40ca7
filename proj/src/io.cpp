#include "riskdp/io.hpp"

#include <fstream>
#include <stdexcept>

namespace riskdp {

namespace {

Json matrix_rows_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows; ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_rows_from_json(const Json& j) {
  int rows = static_cast<int>(j.size());
  int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Matrix m(rows, cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw std::invalid_argument("ragged matrix rows");
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

Json distribution_to_json(const DiscreteDistribution& d) {
  return Json{{"atoms", d.atoms}, {"probs", d.probs}};
}

DiscreteDistribution distribution_from_json(const Json& j) {
  DiscreteDistribution d;
  d.atoms = j.at("atoms").get<std::vector<double>>();
  d.probs = j.at("probs").get<std::vector<double>>();
  return d;
}

}  // namespace

Json mdp_to_json(const TabularMDP& mdp) {
  Json j;
  j["version"] = kFileFormatVersion;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["gamma"] = mdp.gamma;
  j["r_max"] = mdp.r_max;
  Json transition = Json::array();
  Json reward = Json::array();
  for (int x = 0; x < mdp.n_states; ++x) {
    Json trow = Json::array();
    Json rrow = Json::array();
    for (int a = 0; a < mdp.n_actions; ++a) {
      Json probs = Json::array();
      for (double p : mdp.next_state_probs(x, a)) probs.push_back(p);
      trow.push_back(std::move(probs));
      rrow.push_back(distribution_to_json(mdp.reward_at(x, a)));
    }
    transition.push_back(std::move(trow));
    reward.push_back(std::move(rrow));
  }
  j["transition"] = std::move(transition);
  j["reward"] = std::move(reward);
  return j;
}

TabularMDP mdp_from_json(const Json& j) {
  if (j.at("version").get<int>() != kFileFormatVersion)
    throw std::invalid_argument("unsupported MDP file version");
  TabularMDP mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  mdp.gamma = j.at("gamma").get<double>();
  mdp.r_max = j.at("r_max").get<double>();
  mdp.transition = Matrix(mdp.n_states * mdp.n_actions, mdp.n_states, 0.0);
  mdp.reward.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  const Json& transition = j.at("transition");
  const Json& reward = j.at("reward");
  for (int x = 0; x < mdp.n_states; ++x) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const Json& probs = transition.at(x).at(a);
      auto row = mdp.transition.row(mdp.row_index(x, a));
      for (int y = 0; y < mdp.n_states; ++y) row[y] = probs.at(y).get<double>();
      mdp.reward[mdp.row_index(x, a)] =
          distribution_from_json(reward.at(x).at(a));
    }
  }
  return mdp;
}

Json policy_to_json(const Policy& policy) {
  return Json{{"action_probs", matrix_rows_to_json(policy.action_probs)}};
}

Policy policy_from_json(const Json& j) {
  return Policy{matrix_rows_from_json(j.at("action_probs"))};
}

Json return_function_to_json(const ReturnFunction& eta) {
  Json j;
  j["v_min"] = eta.grid.v_min;
  j["v_max"] = eta.grid.v_max;
  j["n_atoms"] = eta.grid.n_atoms;
  j["probs"] = matrix_rows_to_json(eta.probs);
  return j;
}

ReturnFunction return_function_from_json(const Json& j) {
  ReturnFunction eta;
  eta.grid.v_min = j.at("v_min").get<double>();
  eta.grid.v_max = j.at("v_max").get<double>();
  eta.grid.n_atoms = j.at("n_atoms").get<int>();
  eta.probs = matrix_rows_from_json(j.at("probs"));
  return eta;
}

Json statistics_to_json(const StatisticVector& s, const SketchSpec& sketch) {
  Json j;
  j["sketch"] =
      sketch.kind == SketchSpec::Kind::moments ? "moments" : "mean_variance";
  j["m"] = sketch.m;
  j["values"] = matrix_rows_to_json(s);
  return j;
}

StatisticVector statistics_from_json(const Json& j, SketchSpec* sketch_out) {
  if (sketch_out != nullptr) {
    std::string kind = j.at("sketch").get<std::string>();
    int m = j.at("m").get<int>();
    *sketch_out = kind == "mean_variance" ? SketchSpec::mean_variance()
                                          : SketchSpec::moments(m);
  }
  return matrix_rows_from_json(j.at("values"));
}

Json model_to_json(const ApproxModel& model) {
  Json j = mdp_to_json(model.realize());
  j["provenance"] = Json{{"loss", model.provenance.loss},
                         {"sketch", model.provenance.sketch},
                         {"k", model.provenance.k},
                         {"p", model.provenance.p},
                         {"rank", model.provenance.rank},
                         {"seed", model.provenance.seed},
                         {"final_loss", model.provenance.final_loss}};
  return j;
}

ApproxModel model_from_json(const Json& j) {
  ApproxModel model = ApproxModel::from_mdp(mdp_from_json(j));
  if (j.contains("provenance")) {
    const Json& p = j.at("provenance");
    model.provenance.loss = p.at("loss").get<std::string>();
    model.provenance.sketch = p.at("sketch").get<std::string>();
    model.provenance.k = p.at("k").get<int>();
    model.provenance.p = p.at("p").get<double>();
    model.provenance.rank = p.at("rank").get<int>();
    model.provenance.seed = p.at("seed").get<std::uint64_t>();
    model.provenance.final_loss = p.at("final_loss").get<double>();
  }
  return model;
}

Json risk_to_json(const RiskSpec& spec) {
  switch (spec.kind) {
    case RiskSpec::Kind::neutral:
      return Json{{"kind", "neutral"}};
    case RiskSpec::Kind::cvar:
      return Json{{"kind", "cvar"}, {"tau", spec.tau}};
    case RiskSpec::Kind::mean_variance:
      return Json{{"kind", "mean_variance"}, {"lambda", spec.lambda}};
    case RiskSpec::Kind::spectral:
      return Json{{"kind", "spectral"},
                  {"breakpoints", spec.breakpoints},
                  {"levels", spec.levels}};
  }
  return Json{};
}

RiskSpec risk_from_json(const Json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "neutral") return RiskSpec::neutral();
  if (kind == "cvar") return RiskSpec::cvar(j.at("tau").get<double>());
  if (kind == "mean_variance")
    return RiskSpec::mean_variance(j.at("lambda").get<double>());
  if (kind == "spectral")
    return RiskSpec::spectral(j.at("breakpoints").get<std::vector<double>>(),
                              j.at("levels").get<std::vector<double>>());
  throw std::invalid_argument("unknown risk kind: " + kind);
}

Json env_to_json(const EnvSpec& spec) {
  Json j;
  j["name"] = spec.name;
  j["stake"] = spec.stake;
  if (spec.gamma) j["gamma"] = *spec.gamma;
  if (spec.slip) j["slip"] = *spec.slip;
  if (spec.risky_gain) j["risky_gain"] = *spec.risky_gain;
  if (spec.risky_loss) j["risky_loss"] = *spec.risky_loss;
  if (spec.risky_cells) {
    Json cells = Json::array();
    for (auto [r, c] : *spec.risky_cells) cells.push_back(Json::array({r, c}));
    j["risky_cells"] = std::move(cells);
  }
  if (spec.width) j["width"] = *spec.width;
  if (spec.height) j["height"] = *spec.height;
  return j;
}

EnvSpec env_from_json(const Json& j) {
  EnvSpec spec;
  spec.name = j.at("name").get<std::string>();
  if (j.contains("stake")) spec.stake = j.at("stake").get<double>();
  if (j.contains("gamma")) spec.gamma = j.at("gamma").get<double>();
  if (j.contains("slip")) spec.slip = j.at("slip").get<double>();
  if (j.contains("risky_gain"))
    spec.risky_gain = j.at("risky_gain").get<double>();
  if (j.contains("risky_loss"))
    spec.risky_loss = j.at("risky_loss").get<double>();
  if (j.contains("risky_cells")) {
    std::vector<std::array<int, 2>> cells;
    for (const auto& cell : j.at("risky_cells"))
      cells.push_back({cell.at(0).get<int>(), cell.at(1).get<int>()});
    spec.risky_cells = std::move(cells);
  }
  if (j.contains("width")) spec.width = j.at("width").get<int>();
  if (j.contains("height")) spec.height = j.at("height").get<int>();
  return spec;
}

void save_json(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

Json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  Json j;
  in >> j;
  return j;
}

}  // namespace riskdp
