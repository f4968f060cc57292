#include <gtest/gtest.h>

#include <set>

#include "bfs_oracle.hpp"
#include "ccpt/errors.hpp"
#include "ccpt/rng.hpp"
#include "ccpt/sim/map_io.hpp"
#include "ccpt/sim/planner.hpp"

using namespace ccpt;
using namespace ccpt::sim;

namespace {

std::string data_path(const std::string& rel) { return std::string(CCPT_DATA_DIR) + "/" + rel; }

VoxelMap flat_map(Vec3 dims, Vec3 spawn) {
  VoxelMap m("flat", dims);
  for (int z = 0; z < dims.z; ++z) {
    for (int x = 0; x < dims.x; ++x) m.set({x, 0, z}, SemanticClass::Solid);
  }
  m.spawn = spawn;
  return m;
}

std::vector<VoxelMap> bundled_maps() {
  return {load_map_file(data_path("maps/testmap_area1.json")), load_map_file(data_path("maps/testmap_area2.json")),
          load_map_file(data_path("maps/corridor.json"))};
}

const char* kMinimalMap = R"({
  "format_version": 1,
  "name": "tiny",
  "dims": [3, 3, 3],
  "voxels": ["1*9", "0*9", "0*9"],
  "spawn": [1, 1, 1]
})";

}  // namespace

TEST(LoadMap, MinimalMapHasNineSolidVoxels) {
  const VoxelMap m = load_map(kMinimalMap);
  EXPECT_EQ(m.dims(), (Vec3{3, 3, 3}));
  int solid = 0;
  for (auto v : m.voxels()) solid += v == 1;
  EXPECT_EQ(solid, 9);
  EXPECT_EQ(m.spawn, (Vec3{1, 1, 1}));
}

TEST(LoadMap, GoalOutOfBoundsIsInvariantError) {
  std::string doc = kMinimalMap;
  doc.insert(doc.rfind('}'), R"(, "goals": [{"id": 0, "voxels": [[1, 1, 3]]}])");
  try {
    load_map(doc);
    FAIL() << "expected InvariantError";
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,1,3)"), std::string::npos) << e.what();
  }
}

TEST(LoadMap, MalformedJsonReportsLine) {
  const std::string doc = "{\n \"format_version\": 1,\n \"dims\": [3, 3, 3\n}";
  try {
    load_map(doc);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(LoadMap, BadLayerNamesField) {
  std::string doc = kMinimalMap;
  doc.replace(doc.find("\"0*9\""), 5, "\"0*8\"");
  try {
    load_map(doc);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "voxels[1]");
    EXPECT_EQ(e.line(), 5);
  }
  std::string doc2 = kMinimalMap;
  doc2.replace(doc2.find("\"0*9\""), 5, "\"3*9\"");
  EXPECT_THROW(load_map(doc2), ParseError);
}

TEST(LoadMap, MissingFieldAndVersion) {
  std::string doc = kMinimalMap;
  doc.replace(doc.find("\"spawn\""), 7, "\"spawm\"");
  EXPECT_THROW(load_map(doc), ParseError);
  std::string doc2 = kMinimalMap;
  doc2.replace(doc2.find("\"format_version\": 1"), 19, "\"format_version\": 2");
  EXPECT_THROW(load_map(doc2), ParseError);
}

TEST(LoadMap, InvariantViolations) {
  // Spawn without support.
  std::string floating = kMinimalMap;
  floating.replace(floating.find("[1, 1, 1]"), 9, "[1, 2, 1]");
  EXPECT_THROW(load_map(floating), InvariantError);

  VoxelMap m = flat_map({5, 4, 5}, {1, 1, 1});
  m.bugs.push_back({BugKind::MissingCollision, {{2, 1, 2}}});  // not semantically solid
  EXPECT_THROW(m.finalize(), InvariantError);

  VoxelMap g = flat_map({5, 4, 5}, {1, 1, 1});
  g.set({2, 1, 2}, SemanticClass::Solid);
  g.bugs.push_back({BugKind::InfiniteJumpGlitch, {{2, 1, 2}}});  // glitch volume must be empty
  EXPECT_THROW(g.finalize(), InvariantError);

  VoxelMap p = flat_map({5, 5, 5}, {1, 1, 1});
  p.set({3, 3, 3}, SemanticClass::Solid);
  p.platforms.push_back({{{3, 1, 3}}, Axis::Y, 2, 8});  // sweeps into the solid voxel
  EXPECT_THROW(p.finalize(), InvariantError);

  VoxelMap fast = flat_map({5, 5, 5}, {1, 1, 1});
  fast.platforms.push_back({{{3, 1, 3}}, Axis::Y, 3, 4});
  EXPECT_THROW(fast.finalize(), InvariantError);

  VoxelMap dup = flat_map({5, 4, 5}, {1, 1, 1});
  dup.goals.push_back({0, {{2, 1, 2}}, true});
  dup.goals.push_back({0, {{3, 1, 2}}, true});
  EXPECT_THROW(dup.finalize(), InvariantError);
}

TEST(LoadMap, BundledArea1) {
  const VoxelMap m = load_map_file(data_path("maps/testmap_area1.json"));
  EXPECT_EQ(m.goals.size(), 1u);
  EXPECT_EQ(m.bugs.size(), 2u);
  EXPECT_EQ(m.platforms.size(), 1u);
  const VoxelMap again = load_map(save_map(m));
  EXPECT_EQ(again.voxels(), m.voxels());
  EXPECT_EQ(again.spawn, m.spawn);
  EXPECT_EQ(again.goals[0].voxels, m.goals[0].voxels);
  EXPECT_EQ(again.bugs[1].voxels, m.bugs[1].voxels);
  EXPECT_EQ(again.intended_route, m.intended_route);
  EXPECT_EQ(save_map(again), save_map(m));
}

TEST(LoadMap, LayerEncodingRoundTrip) {
  VoxelMap m = flat_map({4, 2, 3}, {0, 1, 0});
  m.set({3, 1, 2}, SemanticClass::Climbable);
  m.finalize();
  EXPECT_EQ(encode_layer(m, 0), "1*12");
  EXPECT_EQ(encode_layer(m, 1), "0*11 2");
}

TEST(Reset, AgentAtSpawn) {
  for (const VoxelMap& m : bundled_maps()) {
    const AgentState a = reset(m, 3);
    EXPECT_EQ(a.pos, m.spawn);
    EXPECT_TRUE(a.grounded);
    EXPECT_TRUE(a.double_jump_available);
    EXPECT_EQ(a.jump_ticks, 0);
    EXPECT_EQ(a, reset(m, 3));
    const Trajectory t = play_script(m, {});
    ASSERT_EQ(t.states.size(), 1u);
    EXPECT_EQ(t.states[0].pos, m.spawn);
  }
}

TEST(Step, FreeMoveNorth) {
  VoxelMap m = flat_map({5, 4, 5}, {2, 1, 2});
  m.finalize();
  const StepResult r = step(m, reset(m), Action::MoveN, 0);
  EXPECT_EQ(r.state.pos, (Vec3{2, 1, 3}));
  EXPECT_TRUE(r.state.grounded);
  EXPECT_EQ(r.state.displacement, (Vec3{0, 0, 1}));
  EXPECT_EQ(r.state.last_move, (Vec3{0, 0, 1}));
  EXPECT_EQ(r.extrinsic, 0.0);
}

TEST(Step, BlockedMoveIsNoOp) {
  VoxelMap m = flat_map({5, 4, 5}, {2, 1, 2});
  m.set({3, 1, 2}, SemanticClass::Solid);
  m.finalize();
  const AgentState s0 = reset(m);
  const StepResult east = step(m, s0, Action::MoveE, 0);
  EXPECT_EQ(east.state.pos, s0.pos);
  EXPECT_FALSE(east.state.climbing);
  // Map edge blocks too.
  AgentState edge = s0;
  edge.pos = {0, 1, 0};
  EXPECT_EQ(step(m, edge, Action::MoveSW, 0).state.pos, edge.pos);
}

TEST(Step, JumpTrace) {
  // Jump sets two ascent ticks; gravity then lowers one voxel per tick.
  VoxelMap m = flat_map({3, 6, 3}, {1, 1, 1});
  m.finalize();
  AgentState s = reset(m);
  const std::vector<Action> script = {Action::Jump, Action::Wait, Action::Wait, Action::Wait, Action::Wait};
  const std::vector<int> heights = {2, 3, 2, 1, 1};
  const std::vector<bool> grounded = {false, false, false, true, true};
  for (std::size_t t = 0; t < script.size(); ++t) {
    s = step(m, s, script[t], static_cast<long>(t)).state;
    EXPECT_EQ(s.pos.y, heights[t]) << "tick " << t;
    EXPECT_EQ(s.grounded, grounded[t]) << "tick " << t;
  }
}

TEST(Step, DoubleJumpOnlyOnce) {
  VoxelMap m = flat_map({3, 10, 3}, {1, 1, 1});
  m.finalize();
  AgentState s = reset(m);
  int peak = 0;
  for (int t = 0; t < 12; ++t) {
    s = step(m, s, Action::Jump, t).state;
    peak = std::max(peak, s.pos.y);
  }
  // Ground jump (+1), double jump (+1), remaining ascent tick (+1).
  EXPECT_EQ(peak, 4);
  EXPECT_TRUE(s.grounded);
}

TEST(Step, InfiniteJumpGlitch) {
  VoxelMap m = flat_map({5, 16, 5}, {2, 1, 2});
  std::vector<Vec3> column;
  for (int y = 1; y < 15; ++y) column.push_back({2, y, 2});
  m.bugs.push_back({BugKind::InfiniteJumpGlitch, column});
  m.finalize();
  AgentState s = reset(m);
  for (int t = 0; t < 10; ++t) s = step(m, s, Action::Jump, t).state;
  EXPECT_GE(s.pos.y - m.spawn.y, 10);

  const VoxelMap fixed = m.with_bug_physics(false);
  s = reset(fixed);
  int peak = 0;
  for (int t = 0; t < 10; ++t) {
    s = step(fixed, s, Action::Jump, t).state;
    peak = std::max(peak, s.pos.y);
  }
  EXPECT_LE(peak, 4);
}

TEST(Step, MissingCollisionIsPassable) {
  VoxelMap m = flat_map({5, 4, 3}, {1, 1, 1});
  m.set({2, 1, 1}, SemanticClass::Solid);
  m.bugs.push_back({BugKind::MissingCollision, {{2, 1, 1}}});
  m.finalize();
  const StepResult r = step(m, reset(m), Action::MoveE, 0);
  EXPECT_EQ(r.state.pos, (Vec3{2, 1, 1}));
  EXPECT_EQ(m.semantic({2, 1, 1}), SemanticClass::Solid);
  EXPECT_EQ(r.info.bug_mask, 1u);
  const VoxelMap fixed = m.with_bug_physics(false);
  EXPECT_EQ(step(fixed, reset(fixed), Action::MoveE, 0).state.pos, (Vec3{1, 1, 1}));
}

TEST(Step, ClimbLadder) {
  VoxelMap m = flat_map({3, 8, 4}, {1, 1, 1});
  for (int y = 1; y <= 4; ++y) m.set({1, y, 2}, SemanticClass::Climbable);
  m.finalize();
  AgentState s = reset(m);
  s = step(m, s, Action::MoveN, 0).state;  // blocked by the ladder: attach
  EXPECT_EQ(s.pos, m.spawn);
  EXPECT_TRUE(s.climbing);
  long t = 1;
  s = step(m, s, Action::Wait, t++).state;  // holds altitude
  EXPECT_EQ(s.pos.y, 1);
  EXPECT_TRUE(s.climbing);
  for (int i = 0; i < 6 && s.pos.y < 5; ++i) s = step(m, s, Action::Jump, t++).state;
  EXPECT_EQ(s.pos.y, 5);
  EXPECT_FALSE(s.climbing);  // above the top rung
  EXPECT_EQ(s.jump_ticks, 1);
  s = step(m, s, Action::MoveN, t++).state;  // over the top, still rising
  EXPECT_EQ(s.pos, (Vec3{1, 6, 2}));
  s = step(m, s, Action::Wait, t++).state;
  EXPECT_EQ(s.pos, (Vec3{1, 5, 2}));
  EXPECT_TRUE(s.grounded);
}

TEST(Step, UnintendedClimbable) {
  VoxelMap m = flat_map({3, 8, 4}, {1, 1, 1});
  for (int y = 1; y <= 4; ++y) m.set({1, y, 2}, SemanticClass::Solid);
  m.bugs.push_back({BugKind::UnintendedClimbable, {{1, 1, 2}, {1, 2, 2}, {1, 3, 2}, {1, 4, 2}}});
  m.finalize();
  const StepResult r = step(m, reset(m), Action::MoveN, 0);
  EXPECT_TRUE(r.state.climbing);
  EXPECT_EQ(r.info.bug_mask, 1u);
  const VoxelMap fixed = m.with_bug_physics(false);
  EXPECT_FALSE(step(fixed, reset(fixed), Action::MoveN, 0).state.climbing);
}

TEST(Platform, OffsetExamples) {
  const MovingPlatform p{{{0, 0, 0}}, Axis::Y, 3, 12};
  EXPECT_EQ(platform_offset(p, 0), 0);
  EXPECT_EQ(platform_offset(p, 6), 3);
  EXPECT_EQ(platform_offset(p, 9), 1);
  EXPECT_EQ(platform_offset(p, 12), 0);
  EXPECT_EQ(platform_offset(p, 21), platform_offset(p, 9));
  const MovingPlatform down{{{0, 0, 0}}, Axis::Y, -3, 12};
  EXPECT_EQ(platform_offset(down, 9), -1);
  // Independent triangle-wave evaluation with truncation toward zero.
  for (long t = 0; t < 40; ++t) {
    const double phase = static_cast<double>(t % 12) / 12.0;
    const double tri = phase <= 0.5 ? 2.0 * phase : 2.0 - 2.0 * phase;
    EXPECT_EQ(platform_offset(p, t), static_cast<int>(std::trunc(3.0 * tri + 1e-12))) << t;
  }
}

TEST(Platform, ElevatorCarriesRider) {
  VoxelMap m = flat_map({5, 8, 5}, {0, 1, 0});
  m.platforms.push_back({{{2, 1, 2}}, Axis::Y, 2, 8});
  m.finalize();
  AgentState s = reset(m);
  s.pos = {2, 2, 2};
  for (long t = 0; t < 16; ++t) {
    s = step(m, s, Action::Wait, t).state;
    EXPECT_EQ(s.pos.y, 2 + platform_offset(m.platforms[0], t + 1)) << "tick " << t;
    EXPECT_TRUE(s.grounded);
  }
}

TEST(Platform, SlidingPlatformCarriesRider) {
  VoxelMap m = flat_map({8, 5, 3}, {0, 1, 0});
  for (int x = 0; x < 8; ++x) m.set({x, 0, 1}, SemanticClass::Empty);
  m.platforms.push_back({{{1, 0, 1}}, Axis::X, 4, 8});
  m.finalize();
  AgentState s = reset(m);
  s.pos = {1, 1, 1};
  for (long t = 0; t < 8; ++t) {
    s = step(m, s, Action::Wait, t).state;
    EXPECT_EQ(s.pos, (Vec3{1 + platform_offset(m.platforms[0], t + 1), 1, 1})) << "tick " << t;
  }
}

TEST(PlayScript, DeterministicAndRewardSum) {
  const VoxelMap m = load_map_file(data_path("maps/testmap_area1.json"));
  Rng rng(11);
  std::vector<Action> actions;
  for (int i = 0; i < 128; ++i) actions.push_back(static_cast<Action>(rng.index(kActionCount)));
  const Trajectory a = play_script(m, actions);
  const Trajectory b = play_script(m, actions);
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
  EXPECT_EQ(a.extrinsic, b.extrinsic);
}

TEST(PlayScript, RewardIsTenPerTickInGoal) {
  const VoxelMap m = load_map_file(data_path("maps/testmap_area1.json"));
  DemoScript demo = load_demo_file(data_path("demos/testmap_area1_demo1.txt"));
  for (int i = 0; i < 20; ++i) demo.actions.push_back(i % 3 == 0 ? Action::MoveE : Action::Wait);
  const Trajectory t = play_script(m, demo.actions);
  double total = 0.0;
  for (double r : t.extrinsic) total += r;
  int inside = 0;
  for (std::size_t i = 1; i < t.states.size(); ++i) inside += m.active_goal_at(t.states[i].pos) >= 0;
  EXPECT_GT(inside, 0);
  EXPECT_EQ(total, 10.0 * inside);
}

TEST(PlayScript, BundledDemosReachGoalWithoutBugs) {
  for (const std::string area : {"testmap_area1", "testmap_area2"}) {
    const VoxelMap m = load_map_file(data_path("maps/" + area + ".json"));
    for (int i = 1; i <= 6; ++i) {
      const DemoScript d = load_demo_file(data_path("demos/" + area + "_demo" + std::to_string(i) + ".txt"));
      EXPECT_EQ(d.map_name, area);
      const Trajectory t = play_script(m, d.actions);
      EXPECT_TRUE(t.reached_goal) << area << " demo " << i;
      EXPECT_EQ(t.bugs_entered(), 0u) << area << " demo " << i;
    }
  }
}

TEST(PlayScript, StopsAtEpisodeLength) {
  const VoxelMap m = load_map_file(data_path("maps/corridor.json"));
  const Trajectory t = play_script(m, std::vector<Action>(50, Action::Wait), 20);
  EXPECT_EQ(t.actions.size(), 20u);
  Environment env(m, 20);
  env.reset();
  StepResult r;
  for (int i = 0; i < 20; ++i) r = env.step(Action::Wait);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(env.done());
}

TEST(Properties, ContainmentAndStateInvariants) {
  for (const VoxelMap& base : bundled_maps()) {
    for (bool bugs : {true, false}) {
      const VoxelMap m = base.with_bug_physics(bugs);
      Rng rng(7);
      for (int episode = 0; episode < 40; ++episode) {
        AgentState s = reset(m);
        for (long t = 0; t < 300; ++t) {
          const auto a = static_cast<Action>(rng.index(kActionCount));
          s = step(m, s, a, t, 300).state;
          ASSERT_TRUE(m.in_bounds(s.pos));
          ASSERT_TRUE(passable(m, s.pos, t + 1)) << m.name() << " tick " << t;
          if (s.grounded) {
            const Vec3 below = s.pos - kUp;
            bool platform = false;
            for (const auto& [v, k] : m.platform_voxels(t + 1)) platform |= v == below;
            ASSERT_TRUE(m.static_collides(below) || platform);
          }
          if (s.climbing) ASSERT_TRUE(adjacent_climbable(m, s.pos));
          ASSERT_GE(s.jump_ticks, 0);
        }
      }
    }
  }
}

TEST(Properties, GravityTotality) {
  for (const VoxelMap& m : bundled_maps()) {
    int checked = 0;
    for (const auto& node : oracle::explore(m)) {
      const AgentState& s0 = node.state;
      if (s0.grounded || s0.jump_ticks != 0 || adjacent_climbable(m, s0.pos)) continue;
      AgentState s = s0;
      s.climbing = false;
      int ticks = 0;
      while (!s.grounded && ticks <= m.dims().y) s = step(m, s, Action::Wait, node.tick + ticks++).state;
      EXPECT_TRUE(s.grounded) << m.name();
      ++checked;
    }
    EXPECT_GT(checked, 0) << m.name();
  }
}

TEST(Properties, BugShortcutOnlyWithBugPhysics) {
  for (const std::string area : {"testmap_area1", "testmap_area2"}) {
    const VoxelMap m = load_map_file(data_path("maps/" + area + ".json"));
    ASSERT_FALSE(m.intended_route.empty());
    const VoxelMap fixed = m.with_bug_physics(false);
    EXPECT_TRUE(oracle::goal_reachable(m, oracle::avoid_intended(m))) << area;
    EXPECT_FALSE(oracle::goal_reachable(fixed, oracle::avoid_intended(fixed))) << area;
    EXPECT_TRUE(oracle::goal_reachable(fixed)) << area;
  }
}

TEST(Planner, AgreesWithOracleOnShortcuts) {
  const VoxelMap m = load_map_file(data_path("maps/testmap_area1.json"));
  PlanRequest req;
  req.start = reset(m);
  req.target = [&](const Vec3& p) { return m.active_goal_at(p) >= 0; };
  req.allowed = [&](const Vec3& p) { return !oracle::avoid_intended(m)(p); };
  const auto route = plan_route(m, req);
  ASSERT_TRUE(route.has_value());
  const Trajectory t = play_script(m, *route);
  EXPECT_TRUE(t.reached_goal);
  EXPECT_NE(t.bugs_entered(), 0u);

  const auto demo = plan_demo(m, 0);
  ASSERT_TRUE(demo.has_value());
  const Trajectory d = play_script(m, *demo);
  EXPECT_TRUE(d.reached_goal);
  EXPECT_EQ(d.bugs_entered(), 0u);
}

TEST(DemoScript, ParseAndRoundTrip) {
  const std::string text =
      "# scripted\nformat_version 1\nmap testmap_area1\ngoal 0\nactions:\nMoveN\n  Jump  # up\n\nWait\n";
  const DemoScript d = parse_demo(text);
  EXPECT_EQ(d.map_name, "testmap_area1");
  EXPECT_EQ(d.goal_id, 0);
  ASSERT_EQ(d.actions.size(), 3u);
  EXPECT_EQ(d.actions[1], Action::Jump);
  const DemoScript again = parse_demo(format_demo(d));
  EXPECT_EQ(again.actions, d.actions);
}

TEST(DemoScript, Errors) {
  EXPECT_THROW(parse_demo(""), ParseError);
  try {
    parse_demo("format_version 1\nmap a\ngoal 0\nactions:\nMoveN\nFly\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6);
  }
  EXPECT_THROW(parse_demo("format_version 2\nmap a\ngoal 0\nactions:\n"), ParseError);
  EXPECT_THROW(parse_demo("format_version 1\nmap a\ngoal x\nactions:\n"), ParseError);
}

TEST(Actions, TenNamedActions) {
  std::set<std::string_view> names;
  for (int i = 0; i < kActionCount; ++i) {
    const auto a = static_cast<Action>(i);
    names.insert(action_name(a));
    EXPECT_EQ(parse_action(action_name(a)), a);
    const Vec3 d = action_direction(a);
    EXPECT_EQ(d.y, 0);
  }
  EXPECT_EQ(names.size(), 10u);
  EXPECT_FALSE(parse_action("Fly").has_value());
}
