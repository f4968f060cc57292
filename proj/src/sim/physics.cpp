#include "ccpt/sim/physics.hpp"

#include <algorithm>
#include <deque>

namespace ccpt::sim {

namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "MoveN", "MoveS", "MoveE", "MoveW", "MoveNE", "MoveNW", "MoveSE", "MoveSW", "Jump", "Wait"};

constexpr std::array<Vec3, kActionCount> kDirections = {{
    {0, 0, 1}, {0, 0, -1}, {1, 0, 0}, {-1, 0, 0}, {1, 0, 1}, {-1, 0, 1}, {1, 0, -1}, {-1, 0, -1}, {}, {}}};

using PlatformVoxels = std::vector<std::pair<Vec3, int>>;

int platform_at(const PlatformVoxels& pv, const Vec3& p) {
  for (const auto& [v, k] : pv) {
    if (v == p) return k;
  }
  return -1;
}

bool open(const VoxelMap& map, const PlatformVoxels& pv, const Vec3& p) {
  return map.in_bounds(p) && !map.static_collides(p) && platform_at(pv, p) < 0;
}

int clamp_unit(int v) { return std::clamp(v, -1, 1); }

// Nearest open voxel by 6-connected BFS; ties broken by neighbour order.
std::optional<Vec3> nearest_open(const VoxelMap& map, const PlatformVoxels& pv, const Vec3& from, Vec3 preferred) {
  if (preferred != Vec3{} && open(map, pv, from + preferred)) return from + preferred;
  static constexpr std::array<Vec3, 6> kNeighbours = {{{0, 1, 0}, {0, 0, 1}, {0, 0, -1}, {1, 0, 0}, {-1, 0, 0}, {0, -1, 0}}};
  std::deque<Vec3> queue{from};
  std::vector<Vec3> seen{from};
  while (!queue.empty() && seen.size() < 512) {
    const Vec3 p = queue.front();
    queue.pop_front();
    for (const Vec3& d : kNeighbours) {
      const Vec3 q = p + d;
      if (!map.in_bounds(q) || std::find(seen.begin(), seen.end(), q) != seen.end()) continue;
      if (open(map, pv, q)) return q;
      seen.push_back(q);
      queue.push_back(q);
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view action_name(Action a) { return kActionNames[static_cast<int>(a)]; }

std::optional<Action> parse_action(std::string_view name) {
  for (int i = 0; i < kActionCount; ++i) {
    if (kActionNames[i] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

Vec3 action_direction(Action a) { return kDirections[static_cast<int>(a)]; }

bool passable(const VoxelMap& map, const Vec3& p, long tick) {
  if (!map.in_bounds(p) || map.static_collides(p)) return false;
  return platform_at(map.platform_voxels(tick), p) < 0;
}

bool adjacent_climbable(const VoxelMap& map, const Vec3& p) {
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dz = -1; dz <= 1; ++dz) {
      if ((dx != 0 || dz != 0) && map.climbable({p.x + dx, p.y, p.z + dz})) return true;
    }
  }
  return false;
}

AgentState reset(const VoxelMap& map, std::uint64_t /*seed*/) {
  AgentState s;
  s.pos = map.spawn;
  s.grounded = true;
  s.double_jump_available = true;
  return s;
}

StepResult step(const VoxelMap& map, const AgentState& state, Action action, long tick, int episode_length) {
  // (1) Platforms sit at their `tick` positions while the agent acts and
  // advance to `tick + 1` at the end of the tick.
  const PlatformVoxels now = map.platform_voxels(tick);
  const PlatformVoxels next = map.platform_voxels(tick + 1);

  AgentState s = state;
  const Vec3 start = state.pos;
  const int riding = platform_at(now, start - kUp);

  // (2) Horizontal move.
  const Vec3 dir = action_direction(action);
  if (dir != Vec3{}) {
    s.last_move = dir;
    const Vec3 target = s.pos + dir;
    if (open(map, now, target)) {
      s.pos = target;
    } else if (map.climbable(target)) {
      // (3) Climb attach.
      s.climbing = true;
    }
  }
  if (s.climbing && !adjacent_climbable(map, s.pos)) s.climbing = false;

  // (4) Vertical.
  if (action == Action::Jump) {
    if (state.grounded || s.climbing) {
      s.jump_ticks = 2;
    } else if (s.double_jump_available) {
      s.jump_ticks = 2;
      s.double_jump_available = false;
    }
  }
  if (s.jump_ticks > 0 && open(map, now, s.pos + kUp)) {
    s.pos = s.pos + kUp;
    --s.jump_ticks;
  } else {
    s.jump_ticks = 0;
    if (!s.climbing && open(map, now, s.pos - kUp)) s.pos = s.pos - kUp;
  }

  // (5) Platform carry.
  if (riding >= 0 && platform_at(now, s.pos - kUp) == riding) {
    const Vec3 delta = platform_delta(map.platforms[riding], tick);
    if (delta != Vec3{} && open(map, next, s.pos + delta)) s.pos = s.pos + delta;
  }
  const int pushed_by = platform_at(next, s.pos);
  if (pushed_by >= 0) {
    const Vec3 delta = platform_delta(map.platforms[pushed_by], tick);
    if (auto p = nearest_open(map, next, s.pos, delta)) s.pos = *p;
  }

  // (6) Contact flags.
  const Vec3 below = s.pos - kUp;
  s.grounded = map.static_collides(below) || platform_at(next, below) >= 0;
  if (s.grounded) s.double_jump_available = true;
  if (map.in_glitch(s.pos)) s.double_jump_available = true;
  if (s.climbing && !adjacent_climbable(map, s.pos)) s.climbing = false;

  const Vec3 moved = s.pos - start;
  s.displacement = {clamp_unit(moved.x), clamp_unit(moved.y), clamp_unit(moved.z)};

  StepResult r;
  r.state = s;
  const int goal = map.active_goal_at(s.pos);
  if (goal >= 0) {
    r.extrinsic = kGoalReward;
    r.info.goals_touched.push_back(goal);
  }
  r.info.bug_mask = map.contact_bug_mask(s.pos, s.climbing);
  r.done = tick + 1 >= episode_length;
  return r;
}

Environment::Environment(const VoxelMap& map, int episode_length) : map_(&map), episode_length_(episode_length) {
  state_ = sim::reset(map);
}

const AgentState& Environment::reset(std::uint64_t seed) {
  state_ = sim::reset(*map_, seed);
  tick_ = 0;
  return state_;
}

StepResult Environment::step(Action action) {
  StepResult r = sim::step(*map_, state_, action, tick_, episode_length_);
  state_ = r.state;
  ++tick_;
  return r;
}

std::uint32_t Trajectory::bugs_entered() const {
  std::uint32_t mask = 0;
  for (std::uint32_t m : bug_masks) mask |= m;
  return mask;
}

Trajectory play_script(const VoxelMap& map, const std::vector<Action>& actions, int episode_length) {
  Trajectory t;
  Environment env(map, episode_length);
  t.states.push_back(env.reset());
  t.bug_masks.push_back(map.contact_bug_mask(env.state().pos, env.state().climbing));
  if (map.active_goal_at(env.state().pos) >= 0) {
    t.reached_goal = true;
    t.first_goal_step = 0;
  }
  for (Action a : actions) {
    if (env.done()) break;
    const StepResult r = env.step(a);
    t.actions.push_back(a);
    t.states.push_back(r.state);
    t.extrinsic.push_back(r.extrinsic);
    t.bug_masks.push_back(r.info.bug_mask);
    if (!r.info.goals_touched.empty() && !t.reached_goal) {
      t.reached_goal = true;
      t.first_goal_step = static_cast<int>(t.states.size()) - 1;
    }
  }
  return t;
}

}  // namespace ccpt::sim
