#include "riskdp/envs.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace riskdp {

namespace {

// Directions in action order: up, right, down, left.
constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

struct GridBuild {
  std::vector<std::string> rows;
  int height = 0, width = 0;
  std::map<std::pair<int, int>, int> cell_state;  // free cells only
  int done_state = -1;

  bool wall(int r, int c) const {
    if (r < 0 || r >= height || c < 0 || c >= width) return true;
    return rows[r][c] == '#';
  }
  int state_of(int r, int c) const { return cell_state.at({r, c}); }
};

GridBuild index_cells(std::vector<std::string> rows) {
  GridBuild g;
  g.rows = std::move(rows);
  g.height = static_cast<int>(g.rows.size());
  g.width = static_cast<int>(g.rows[0].size());
  int next = 0;
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c)
      if (g.rows[r][c] != '#') g.cell_state[{r, c}] = next++;
  g.done_state = next;  // trailing absorbing sink
  return g;
}

// Fills a transition row for a movement cell given per-direction
// probabilities; bumping into a wall or the border keeps the agent in place.
void movement_row(const GridBuild& g, TabularMDP& mdp, int r, int c, int a,
                  const std::array<double, 4>& dir_probs) {
  int x = g.state_of(r, c);
  auto row = mdp.transition.row(x * mdp.n_actions + a);
  for (int d = 0; d < 4; ++d) {
    if (dir_probs[d] == 0.0) continue;
    int rr = r + kDr[d], cc = c + kDc[d];
    int target = g.wall(rr, cc) ? x : g.state_of(rr, cc);
    row[target] += dir_probs[d];
  }
}

void sink_row(TabularMDP& mdp, int from_state, int to_state, int a) {
  mdp.transition.row(from_state * mdp.n_actions + a)[to_state] = 1.0;
}

BuiltEnv finish_grid(const std::string& name, const GridBuild& g,
                     TabularMDP mdp, EnvMetadata meta) {
  meta.map_rows = g.rows;
  meta.terminal_states.push_back(g.done_state);
  return BuiltEnv{name, std::move(mdp), std::move(meta)};
}

TabularMDP blank_mdp(int n_states, int n_actions, double gamma, double r_max) {
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_max = r_max;
  mdp.transition = Matrix(n_states * n_actions, n_states, 0.0);
  mdp.reward.assign(static_cast<std::size_t>(n_states) * n_actions,
                    DiscreteDistribution::point_mass(0.0));
  return mdp;
}

BuiltEnv build_coin_flip(const EnvSpec& spec) {
  if (!(spec.stake > 0.0))
    throw std::invalid_argument("coin_flip stake must be positive");
  double gamma = spec.gamma.value_or(0.5);
  TabularMDP mdp = blank_mdp(1, 2, gamma, spec.stake);
  sink_row(mdp, 0, 0, 0);
  sink_row(mdp, 0, 0, 1);
  mdp.reward[0] = DiscreteDistribution::point_mass(0.0);
  mdp.reward[1] =
      DiscreteDistribution{{-spec.stake, spec.stake}, {0.5, 0.5}};
  EnvMetadata meta;
  meta.start_state = 0;
  meta.undiscounted_eval = false;
  meta.notes.push_back("gamma=" + std::to_string(gamma));
  return BuiltEnv{"coin_flip", std::move(mdp), std::move(meta)};
}

BuiltEnv build_four_rooms(const EnvSpec& spec) {
  std::vector<std::string> rows = {
      ".....#....G",  //
      ".....#.....",  //
      "......R....",  //
      ".....#.....",  //
      ".R...#.....",  //
      "#.####..R..",  //
      ".....###.##",  //
      ".....#.....",  //
      ".....#.....",  //
      "......R....",  //
      "S....#.....",  //
  };
  double slip = spec.slip.value_or(0.2);
  double gain = spec.risky_gain.value_or(0.25);
  double loss = spec.risky_loss.value_or(0.9);
  double gamma = spec.gamma.value_or(0.95);
  if (!(slip >= 0.0 && slip <= 1.0))
    throw std::invalid_argument("slip probability must lie in [0, 1]");
  if (!(gain >= 0.0 && loss >= 0.0))
    throw std::invalid_argument("risky rewards must be nonnegative magnitudes");

  if (spec.risky_cells) {
    for (auto& row : rows)
      for (auto& ch : row)
        if (ch == 'R') ch = '.';
    for (auto [r, c] : *spec.risky_cells) {
      if (r < 0 || r >= static_cast<int>(rows.size()) || c < 0 ||
          c >= static_cast<int>(rows[0].size()) || rows[r][c] != '.')
        throw std::invalid_argument("risky cell outside the free grid");
      rows[r][c] = 'R';
    }
  }

  GridBuild g = index_cells(rows);
  int n_states = g.done_state + 1;
  TabularMDP mdp = blank_mdp(n_states, 4, gamma, 1.0);

  std::array<double, 4> dir_probs{};
  for (const auto& [cell, x] : g.cell_state) {
    auto [r, c] = cell;
    char ch = g.rows[r][c];
    if (ch == 'G') {
      for (int a = 0; a < 4; ++a) {
        sink_row(mdp, x, g.done_state, a);
        mdp.reward[x * 4 + a] = DiscreteDistribution::point_mass(1.0);
      }
      continue;
    }
    for (int a = 0; a < 4; ++a) {
      for (int d = 0; d < 4; ++d)
        dir_probs[d] = slip * 0.25 + (d == a ? 1.0 - slip : 0.0);
      movement_row(g, mdp, r, c, a, dir_probs);
      if (ch == 'R')
        mdp.reward[x * 4 + a] =
            DiscreteDistribution{{-loss, gain}, {slip, 1.0 - slip}};
    }
  }
  for (int a = 0; a < 4; ++a) sink_row(mdp, g.done_state, g.done_state, a);

  EnvMetadata meta;
  meta.start_state = g.state_of(10, 0);
  meta.goal_states = {g.state_of(0, 10)};
  meta.terminal_states = {g.state_of(0, 10)};
  meta.undiscounted_eval = true;
  std::ostringstream note;
  note << "gamma=" << gamma << " slip=" << slip << " risky_gain=" << gain
       << " risky_loss=" << loss;
  meta.notes.push_back(note.str());
  return finish_grid("four_rooms_risky", g, std::move(mdp), std::move(meta));
}

BuiltEnv build_windy_cliffs(const EnvSpec& spec) {
  int width = spec.width.value_or(12);
  int height = spec.height.value_or(4);
  if (width < 3 || height < 2)
    throw std::invalid_argument("cliff grid needs width >= 3 and height >= 2");
  double gamma = spec.gamma.value_or(0.95);

  std::vector<std::string> rows(height, std::string(width, '.'));
  rows[height - 1][0] = 'S';
  for (int c = 1; c < width - 1; ++c) rows[height - 1][c] = 'C';
  rows[height - 1][width - 1] = 'G';

  GridBuild g = index_cells(rows);
  int n_states = g.done_state + 1;
  TabularMDP mdp = blank_mdp(n_states, 4, gamma, 1.0);

  std::array<double, 4> dir_probs{};
  for (const auto& [cell, x] : g.cell_state) {
    auto [r, c] = cell;
    char ch = g.rows[r][c];
    if (ch == 'C' || ch == 'G') {
      for (int a = 0; a < 4; ++a) {
        sink_row(mdp, x, g.done_state, a);
        mdp.reward[x * 4 + a] =
            DiscreteDistribution::point_mass(ch == 'G' ? 1.0 : -1.0);
      }
      continue;
    }
    for (int a = 0; a < 4; ++a) {
      for (int d = 0; d < 4; ++d)
        dir_probs[d] = 1.0 / 12.0 + (d == a ? 2.0 / 3.0 : 0.0);
      movement_row(g, mdp, r, c, a, dir_probs);
    }
  }
  for (int a = 0; a < 4; ++a) sink_row(mdp, g.done_state, g.done_state, a);

  EnvMetadata meta;
  meta.start_state = g.state_of(height - 1, 0);
  meta.goal_states = {g.state_of(height - 1, width - 1)};
  meta.terminal_states = {g.state_of(height - 1, width - 1)};
  for (int c = 1; c < width - 1; ++c)
    meta.terminal_states.push_back(g.state_of(height - 1, c));
  meta.undiscounted_eval = true;
  std::ostringstream note;
  note << "gamma=" << gamma << " width=" << width << " height=" << height;
  meta.notes.push_back(note.str());
  return finish_grid("windy_cliffs", g, std::move(mdp), std::move(meta));
}

BuiltEnv build_frozen_lake(const EnvSpec& spec) {
  const std::vector<std::string> rows = {
      "SFFFFFFF",  //
      "FFFFFFFF",  //
      "FFFHFFFF",  //
      "FFFFFHFF",  //
      "FFFHFFFF",  //
      "FHHFFFHF",  //
      "FHFFHFHF",  //
      "FFFHFFFG",  //
  };
  double gamma = spec.gamma.value_or(0.95);

  GridBuild g = index_cells(rows);
  int n_states = g.done_state + 1;
  TabularMDP mdp = blank_mdp(n_states, 4, gamma, 1.0);

  std::array<double, 4> dir_probs{};
  for (const auto& [cell, x] : g.cell_state) {
    auto [r, c] = cell;
    char ch = g.rows[r][c];
    if (ch == 'H' || ch == 'G') {
      for (int a = 0; a < 4; ++a) {
        sink_row(mdp, x, g.done_state, a);
        mdp.reward[x * 4 + a] =
            DiscreteDistribution::point_mass(ch == 'G' ? 1.0 : -1.0);
      }
      continue;
    }
    for (int a = 0; a < 4; ++a) {
      // Intended direction plus both perpendiculars, one third each.
      for (int d = 0; d < 4; ++d) dir_probs[d] = 0.0;
      dir_probs[a] = 1.0 / 3.0;
      dir_probs[(a + 1) % 4] = 1.0 / 3.0;
      dir_probs[(a + 3) % 4] = 1.0 / 3.0;
      movement_row(g, mdp, r, c, a, dir_probs);
    }
  }
  for (int a = 0; a < 4; ++a) sink_row(mdp, g.done_state, g.done_state, a);

  EnvMetadata meta;
  meta.start_state = g.state_of(0, 0);
  meta.goal_states = {g.state_of(7, 7)};
  meta.terminal_states = {g.state_of(7, 7)};
  for (const auto& [cell, x] : g.cell_state)
    if (g.rows[cell.first][cell.second] == 'H')
      meta.terminal_states.push_back(x);
  meta.horizon_cap = 200;
  meta.undiscounted_eval = true;
  meta.notes.push_back("gamma=" + std::to_string(gamma));
  return finish_grid("frozen_lake_8x8", g, std::move(mdp), std::move(meta));
}

}  // namespace

BuiltEnv build_env(const EnvSpec& spec) {
  if (spec.name == "coin_flip") return build_coin_flip(spec);
  if (spec.name == "four_rooms_risky") return build_four_rooms(spec);
  if (spec.name == "windy_cliffs") return build_windy_cliffs(spec);
  if (spec.name == "frozen_lake_8x8") return build_frozen_lake(spec);
  throw std::invalid_argument("unknown environment: " + spec.name);
}

ApproxModel coin_flip_pve_model(double stake, double gamma) {
  EnvSpec spec;
  spec.name = "coin_flip";
  spec.stake = stake;
  spec.gamma = gamma;
  ApproxModel model = ApproxModel::from_mdp(build_env(spec).mdp);
  model.reward[1] = DiscreteDistribution::point_mass(0.0);
  model.provenance.loss = "constructed";
  return model;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace riskdp
