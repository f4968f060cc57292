#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccpt/sim/world.hpp"

namespace ccpt::sim {

enum class Action : std::uint8_t { MoveN, MoveS, MoveE, MoveW, MoveNE, MoveNW, MoveSE, MoveSW, Jump, Wait };

inline constexpr int kActionCount = 10;

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);
// Horizontal unit step of a move action; {0,0,0} for Jump and Wait.
Vec3 action_direction(Action a);

struct AgentState {
  Vec3 pos;
  int jump_ticks = 0;
  bool grounded = true;
  bool climbing = false;
  bool double_jump_available = true;
  // Last horizontal move intent (unit compass step, y = 0); zero when none yet.
  Vec3 last_move;
  // Displacement over the previous tick, each component in {-1, 0, 1}.
  Vec3 displacement;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct StepInfo {
  std::vector<int> goals_touched;
  std::uint32_t bug_mask = 0;  // bug regions in contact with the new state
};

struct StepResult {
  AgentState state;
  double extrinsic = 0.0;
  bool done = false;
  StepInfo info;
};

inline constexpr double kGoalReward = 10.0;
inline constexpr int kPaperEpisodeLength = 500;
inline constexpr int kDeskEpisodeLength = 128;

AgentState reset(const VoxelMap& map, std::uint64_t seed = 0);

// Advances one tick. `tick` is the index of the tick being played (0 for the
// first action after reset). Invalid moves are no-ops.
StepResult step(const VoxelMap& map, const AgentState& state, Action action, long tick,
                int episode_length = kDeskEpisodeLength);

// Position passable for the agent at `tick`, including moving platforms.
bool passable(const VoxelMap& map, const Vec3& p, long tick);
bool adjacent_climbable(const VoxelMap& map, const Vec3& p);

// Single-agent episode wrapper around reset/step.
class Environment {
 public:
  Environment(const VoxelMap& map, int episode_length = kDeskEpisodeLength);

  const AgentState& reset(std::uint64_t seed = 0);
  StepResult step(Action action);

  const VoxelMap& map() const { return *map_; }
  const AgentState& state() const { return state_; }
  long tick() const { return tick_; }
  int episode_length() const { return episode_length_; }
  bool done() const { return tick_ >= episode_length_; }

 private:
  const VoxelMap* map_;
  int episode_length_;
  AgentState state_;
  long tick_ = 0;
};

// Deterministic record of one episode: states[0] is the reset state and
// states[t+1] follows actions[t].
struct Trajectory {
  std::vector<AgentState> states;
  std::vector<Action> actions;
  std::vector<double> extrinsic;
  std::vector<std::uint32_t> bug_masks;  // per state
  bool reached_goal = false;
  // Index of the first state inside an active goal, or -1.
  int first_goal_step = -1;

  std::uint32_t bugs_entered() const;
};

Trajectory play_script(const VoxelMap& map, const std::vector<Action>& actions,
                       int episode_length = kDeskEpisodeLength);

}  // namespace ccpt::sim
