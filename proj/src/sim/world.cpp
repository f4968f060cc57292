#include "ccpt/sim/world.hpp"

#include <numeric>
#include <set>

#include "ccpt/errors.hpp"

namespace ccpt::sim {

namespace {

std::string voxel_string(const Vec3& p) {
  return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.z) + ")";
}

}  // namespace

std::string_view bug_kind_name(BugKind kind) {
  switch (kind) {
    case BugKind::MissingCollision: return "missing_collision";
    case BugKind::InfiniteJumpGlitch: return "infinite_jump_glitch";
    case BugKind::UnintendedClimbable: return "unintended_climbable";
  }
  return "unknown";
}

std::optional<BugKind> parse_bug_kind(std::string_view name) {
  for (BugKind k : {BugKind::MissingCollision, BugKind::InfiniteJumpGlitch, BugKind::UnintendedClimbable}) {
    if (bug_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

int platform_offset(const MovingPlatform& platform, long tick) {
  const long period = platform.period;
  long phase = tick % period;
  if (phase < 0) phase += period;
  const long rising = phase * 2 <= period ? phase : period - phase;
  // amplitude * rising / (period / 2), truncated toward zero.
  return static_cast<int>((2L * platform.amplitude * rising) / period);
}

Vec3 platform_delta(const MovingPlatform& platform, long tick) {
  const int d = platform_offset(platform, tick + 1) - platform_offset(platform, tick);
  switch (platform.axis) {
    case Axis::X: return {d, 0, 0};
    case Axis::Y: return {0, d, 0};
    case Axis::Z: return {0, 0, d};
  }
  return {};
}

namespace {

Vec3 axis_offset(Axis axis, int d) {
  switch (axis) {
    case Axis::X: return {d, 0, 0};
    case Axis::Y: return {0, d, 0};
    case Axis::Z: return {0, 0, d};
  }
  return {};
}

}  // namespace

VoxelMap::VoxelMap(std::string name, Vec3 dims)
    : name_(std::move(name)), dims_(dims), voxels_(static_cast<std::size_t>(dims.x) * dims.y * dims.z, 0) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) throw InvariantError("map dims must be positive");
}

void VoxelMap::finalize() {
  const std::size_t n = voxels_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (voxels_[i] > static_cast<std::uint8_t>(SemanticClass::Climbable)) {
      throw InvariantError("voxel code " + std::to_string(voxels_[i]) + " is not a semantic class");
    }
  }
  if (bugs.size() > 32) throw InvariantError("at most 32 bug regions are supported");

  auto check_in_bounds = [&](const Vec3& p, const std::string& what) {
    if (!in_bounds(p)) throw InvariantError(what + " voxel " + voxel_string(p) + " is out of bounds");
  };

  std::set<int> ids;
  goal_ids_.assign(n, -1);
  for (const GoalRegion& g : goals) {
    if (g.voxels.empty()) throw InvariantError("goal " + std::to_string(g.id) + " has no voxels");
    if (!ids.insert(g.id).second) throw InvariantError("duplicate goal id " + std::to_string(g.id));
    for (const Vec3& p : g.voxels) {
      check_in_bounds(p, "goal " + std::to_string(g.id));
      if (g.active) goal_ids_[index(p)] = g.id;
    }
  }

  physics_.assign(n, 0);
  bug_masks_.assign(n, 0);
  climb_bug_masks_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<SemanticClass>(voxels_[i]);
    if (c != SemanticClass::Empty) physics_[i] |= kCollides;
    if (c == SemanticClass::Climbable) physics_[i] |= kClimbable;
  }
  for (std::size_t b = 0; b < bugs.size(); ++b) {
    const BugRegion& bug = bugs[b];
    if (bug.voxels.empty()) throw InvariantError("bug region " + std::to_string(b) + " has no voxels");
    for (const Vec3& p : bug.voxels) {
      check_in_bounds(p, std::string(bug_kind_name(bug.kind)));
      const std::size_t i = index(p);
      const SemanticClass c = semantic(p);
      bug_masks_[i] |= 1u << b;
      switch (bug.kind) {
        case BugKind::MissingCollision:
          if (c != SemanticClass::Solid) {
            throw InvariantError("missing_collision voxel " + voxel_string(p) + " must be semantically solid");
          }
          if (bug_physics_) physics_[i] &= static_cast<std::uint8_t>(~kCollides);
          break;
        case BugKind::UnintendedClimbable:
          if (c != SemanticClass::Solid) {
            throw InvariantError("unintended_climbable voxel " + voxel_string(p) + " must be semantically solid");
          }
          if (bug_physics_) physics_[i] |= kClimbable;
          for (int dx = -1; dx <= 1; ++dx) {
            for (int dz = -1; dz <= 1; ++dz) {
              const Vec3 q{p.x + dx, p.y, p.z + dz};
              if ((dx != 0 || dz != 0) && in_bounds(q)) climb_bug_masks_[index(q)] |= 1u << b;
            }
          }
          break;
        case BugKind::InfiniteJumpGlitch:
          if (c != SemanticClass::Empty) {
            throw InvariantError("infinite_jump voxel " + voxel_string(p) + " must be empty");
          }
          if (bug_physics_) physics_[i] |= kGlitch;
          break;
      }
    }
  }

  for (const Vec3& p : intended_route) check_in_bounds(p, "intended route");

  for (std::size_t k = 0; k < platforms.size(); ++k) {
    const MovingPlatform& pl = platforms[k];
    const std::string tag = "platform " + std::to_string(k);
    if (pl.period < 2) throw InvariantError(tag + " period must be at least 2");
    if (std::abs(pl.amplitude) * 2 > pl.period) {
      throw InvariantError(tag + " moves more than one voxel per tick (|amplitude|*2 > period)");
    }
    if (pl.footprint.empty()) throw InvariantError(tag + " has an empty footprint");
    for (long t = 0; t < pl.period; ++t) {
      const Vec3 off = axis_offset(pl.axis, platform_offset(pl, t));
      for (const Vec3& f : pl.footprint) {
        const Vec3 p = f + off;
        check_in_bounds(p, tag);
        if (voxels_[index(p)] != 0) {
          throw InvariantError(tag + " overlaps static geometry at " + voxel_string(p) + " (tick " +
                               std::to_string(t) + ")");
        }
        if (p == spawn) throw InvariantError(tag + " sweeps through the spawn voxel " + voxel_string(p));
      }
    }
  }

  check_in_bounds(spawn, "spawn");
  if (semantic(spawn) != SemanticClass::Empty) throw InvariantError("spawn " + voxel_string(spawn) + " is not empty");
  const Vec3 below = spawn - kUp;
  bool supported = !in_bounds(below) || (physics_[index(below)] & kCollides);
  if (!supported) {
    for (const auto& [v, k] : platform_voxels(0)) {
      (void)k;
      if (v == below) supported = true;
    }
  }
  if (!supported) throw InvariantError("spawn " + voxel_string(spawn) + " has no support below");
}

VoxelMap VoxelMap::with_bug_physics(bool enabled) const {
  VoxelMap copy = *this;
  copy.bug_physics_ = enabled;
  copy.physics_.clear();
  copy.finalize();
  return copy;
}

bool VoxelMap::static_collides(const Vec3& p) const {
  return !in_bounds(p) || (physics_[index(p)] & kCollides);
}

bool VoxelMap::climbable(const Vec3& p) const { return in_bounds(p) && (physics_[index(p)] & kClimbable); }

bool VoxelMap::in_glitch(const Vec3& p) const { return in_bounds(p) && (physics_[index(p)] & kGlitch); }

std::uint32_t VoxelMap::bug_mask(const Vec3& p) const { return in_bounds(p) ? bug_masks_[index(p)] : 0u; }

std::uint32_t VoxelMap::contact_bug_mask(const Vec3& p, bool climbing) const {
  if (!in_bounds(p)) return 0u;
  const std::size_t i = index(p);
  return bug_masks_[i] | (climbing ? climb_bug_masks_[i] : 0u);
}

int VoxelMap::active_goal_at(const Vec3& p) const { return in_bounds(p) ? goal_ids_[index(p)] : -1; }

long VoxelMap::platform_cycle() const {
  long cycle = 1;
  for (const MovingPlatform& pl : platforms) cycle = std::lcm(cycle, static_cast<long>(pl.period));
  return cycle;
}

std::vector<std::pair<Vec3, int>> VoxelMap::platform_voxels(long tick) const {
  std::vector<std::pair<Vec3, int>> out;
  for (std::size_t k = 0; k < platforms.size(); ++k) {
    const MovingPlatform& pl = platforms[k];
    const Vec3 off = axis_offset(pl.axis, platform_offset(pl, tick));
    for (const Vec3& f : pl.footprint) out.emplace_back(f + off, static_cast<int>(k));
  }
  return out;
}

}  // namespace ccpt::sim
