#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "riskdp/categorical.hpp"
#include "riskdp/envs.hpp"
#include "riskdp/matrix.hpp"
#include "riskdp/mdp.hpp"
#include "riskdp/model.hpp"
#include "riskdp/risk.hpp"
#include "riskdp/sketch.hpp"

namespace riskdp {

using Json = nlohmann::ordered_json;

inline constexpr int kFileFormatVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

// MDP files: {version, n_states, n_actions, gamma, r_max,
//             transition[state][action] = [probs over states],
//             reward[state][action] = {atoms, probs}}.
Json mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const Json& j);

// Policies: {action_probs: [[...] per state]}.
Json policy_to_json(const Policy& policy);
Policy policy_from_json(const Json& j);

// Return functions: {v_min, v_max, n_atoms, probs: [[...] per state]}.
Json return_function_to_json(const ReturnFunction& eta);
ReturnFunction return_function_from_json(const Json& j);

// Statistic tables: {sketch, m, values: [[...] per state]}.
Json statistics_to_json(const StatisticVector& s, const SketchSpec& sketch);
StatisticVector statistics_from_json(const Json& j, SketchSpec* sketch_out);

// Models: realized MDP file plus a provenance block.
Json model_to_json(const ApproxModel& model);
ApproxModel model_from_json(const Json& j);

// Risk specs: {kind: "cvar", tau: ...} and the analogous forms.
Json risk_to_json(const RiskSpec& spec);
RiskSpec risk_from_json(const Json& j);

// Environment specs: {name, ...optional overrides}.
Json env_to_json(const EnvSpec& spec);
EnvSpec env_from_json(const Json& j);

void save_json(const Json& j, const std::string& path);
Json load_json(const std::string& path);

}  // namespace riskdp
