#include "ccpt/sim/planner.hpp"

#include <deque>
#include <unordered_map>

namespace ccpt::sim {

namespace {

std::uint64_t state_key(const AgentState& s, long phase) {
  std::uint64_t k = static_cast<std::uint64_t>(s.pos.x) & 0x3ff;
  k = (k << 10) | (static_cast<std::uint64_t>(s.pos.y) & 0x3ff);
  k = (k << 10) | (static_cast<std::uint64_t>(s.pos.z) & 0x3ff);
  k = (k << 2) | static_cast<std::uint64_t>(s.jump_ticks & 3);
  k = (k << 1) | (s.grounded ? 1u : 0u);
  k = (k << 1) | (s.climbing ? 1u : 0u);
  k = (k << 1) | (s.double_jump_available ? 1u : 0u);
  return (k << 20) | static_cast<std::uint64_t>(phase);
}

}  // namespace

std::optional<std::vector<Action>> plan_route(const VoxelMap& map, const PlanRequest& request) {
  const long cycle = map.platform_cycle();
  struct Node {
    AgentState state;
    long tick;
    std::size_t parent;
    Action action;
  };
  std::vector<Node> nodes;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  std::deque<std::size_t> queue;

  auto path_to = [&](std::size_t i) {
    std::vector<Action> actions;
    while (i != 0) {
      actions.push_back(nodes[i].action);
      i = nodes[i].parent;
    }
    return std::vector<Action>(actions.rbegin(), actions.rend());
  };

  nodes.push_back({request.start, request.tick, 0, Action::Wait});
  seen.emplace(state_key(request.start, request.tick % cycle), 0);
  if (request.target(request.start.pos)) return std::vector<Action>{};
  queue.push_back(0);
  while (!queue.empty() && nodes.size() < request.max_states) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const Node cur = nodes[i];
    for (int a = 0; a < kActionCount; ++a) {
      const StepResult r = step(map, cur.state, static_cast<Action>(a), cur.tick, 1 << 30);
      if (request.allowed && !request.allowed(r.state.pos)) continue;
      const long tick = cur.tick + 1;
      if (!seen.emplace(state_key(r.state, tick % cycle), nodes.size()).second) continue;
      nodes.push_back({r.state, tick, i, static_cast<Action>(a)});
      if (request.target(r.state.pos)) return path_to(nodes.size() - 1);
      queue.push_back(nodes.size() - 1);
    }
  }
  return std::nullopt;
}

std::optional<std::vector<Action>> plan_demo(const VoxelMap& source, int goal_id, const std::vector<Vec3>& waypoints) {
  // Demonstrations show the intended way: plan on bug-free physics and keep
  // clear of every bug region.
  const VoxelMap map = source.with_bug_physics(false);
  const auto clear = [&map](const Vec3& p) { return map.bug_mask(p) == 0; };
  AgentState state = reset(map);
  long tick = 0;
  std::vector<Action> all;
  auto advance = [&](const std::vector<Action>& actions) {
    for (Action a : actions) {
      state = step(map, state, a, tick, 1 << 30).state;
      ++tick;
    }
    all.insert(all.end(), actions.begin(), actions.end());
  };
  for (const Vec3& w : waypoints) {
    PlanRequest req;
    req.start = state;
    req.tick = tick;
    req.target = [w](const Vec3& p) { return p == w; };
    req.allowed = clear;
    auto leg = plan_route(map, req);
    if (!leg) return std::nullopt;
    advance(*leg);
  }
  PlanRequest req;
  req.start = state;
  req.tick = tick;
  req.target = [&map, goal_id](const Vec3& p) { return map.active_goal_at(p) == goal_id; };
  req.allowed = clear;
  auto leg = plan_route(map, req);
  if (!leg) return std::nullopt;
  advance(*leg);
  return all;
}

}  // namespace ccpt::sim
