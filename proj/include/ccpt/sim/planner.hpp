#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ccpt/sim/physics.hpp"

namespace ccpt::sim {

// Breadth-first search over the discrete physics state space (position,
// jump counter, contact flags, platform phase). Returns the shortest action
// sequence from `start` at `tick` to any state whose position satisfies
// `target`, never entering a position rejected by `allowed`.
struct PlanRequest {
  AgentState start;
  long tick = 0;
  std::function<bool(const Vec3&)> target;
  std::function<bool(const Vec3&)> allowed;  // empty: everything allowed
  std::size_t max_states = 4'000'000;
};

std::optional<std::vector<Action>> plan_route(const VoxelMap& map, const PlanRequest& request);

// Shortest bug-free route from spawn through each waypoint in order, ending
// inside the active goal `goal_id`. Planned with bug physics disabled and
// never touching a bug region.
std::optional<std::vector<Action>> plan_demo(const VoxelMap& map, int goal_id, const std::vector<Vec3>& waypoints = {});

}  // namespace ccpt::sim
