#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riskdp/mdp.hpp"
#include "riskdp/model.hpp"

namespace riskdp {

/// Environment selector with optional overrides. Known names:
///
/// coin_flip          single state, two actions; the safe action pays 0, the
///                    risky one pays +-stake with equal probability. With
///                    discount 1/2 the return of the always-risky policy is
///                    uniform on [-2*stake, 2*stake].
/// four_rooms_risky   11x11 four-rooms grid, slip probability 0.2 to a random
///                    direction, goal +1. Designated risky cells pay a small
///                    gain on clean moves and a large loss on slips, with
///                    slightly positive expectation.
/// windy_cliffs       cliff walk; every step moves randomly with probability
///                    1/3. Falling off the cliff pays -1, the goal +1.
/// frozen_lake_8x8    8x8 slippery lake: each action moves as intended with
///                    probability 1/3 and to each perpendicular direction
///                    with probability 1/3. Holes pay -1, the goal +1;
///                    episodes cap at 200 steps.
struct EnvSpec {
  std::string name = "coin_flip";
  double stake = 1.0;  // coin_flip reward magnitude, positive

  std::optional<double> gamma;       // default: 0.5 coin_flip, 0.95 grids
  std::optional<double> slip;        // four_rooms_risky, default 0.2
  std::optional<double> risky_gain;  // default 0.25
  std::optional<double> risky_loss;  // default 0.9 (magnitude)
  std::optional<std::vector<std::array<int, 2>>> risky_cells;
  std::optional<int> width;   // windy_cliffs, default 12
  std::optional<int> height;  // windy_cliffs, default 4
};

struct EnvMetadata {
  int start_state = 0;
  std::vector<int> terminal_states;  // one-time pay states plus the sink
  std::vector<int> goal_states;
  int horizon_cap = 0;          // 0: use the Monte Carlo default
  bool undiscounted_eval = false;  // episodic envs report raw return sums
  std::vector<std::string> map_rows;
  std::vector<std::string> notes;  // defaults that were applied
};

struct BuiltEnv {
  std::string name;
  TabularMDP mdp;
  EnvMetadata meta;
};

/// Constructs the named environment. Terminal cells pay their reward on the
/// first action taken in them and then fall into a zero-reward absorbing
/// sink, so returns stay finite and episodic returns keep their nominal
/// support. Throws std::invalid_argument for unknown names or bad parameters.
BuiltEnv build_env(const EnvSpec& spec);

/// The coin_flip environment with the risky action's reward collapsed to a
/// point mass at its mean. Matches the value of every policy in the original
/// while erasing all return variability.
ApproxModel coin_flip_pve_model(double stake = 1.0, double gamma = 0.5);

/// FNV-1a checksum of a map string; pins the grid layouts in tests.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace riskdp
