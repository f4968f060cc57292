#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccpt::sim {

// Voxel coordinates. y is up; north is +z and east is +x.
struct Vec3 {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
  friend auto operator<=>(const Vec3&, const Vec3&) = default;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
};

inline constexpr Vec3 kUp{0, 1, 0};

enum class SemanticClass : std::uint8_t { Empty = 0, Solid = 1, Climbable = 2 };

// Observation code for the agent's own voxel; never stored in a map.
inline constexpr int kAgentCode = 3;

enum class BugKind : std::uint8_t { MissingCollision, InfiniteJumpGlitch, UnintendedClimbable };

std::string_view bug_kind_name(BugKind kind);
std::optional<BugKind> parse_bug_kind(std::string_view name);

struct GoalRegion {
  int id = 0;
  std::vector<Vec3> voxels;
  bool active = true;
};

// Evaluation-only ground truth: the physics inside the region diverges from
// what the semantic voxels show.
struct BugRegion {
  BugKind kind = BugKind::MissingCollision;
  std::vector<Vec3> voxels;
};

enum class Axis : std::uint8_t { X, Y, Z };

struct MovingPlatform {
  std::vector<Vec3> footprint;  // at phase 0
  Axis axis = Axis::Y;
  int amplitude = 1;
  int period = 2;
};

// Triangle-wave displacement of a platform along its axis: 0 at tick 0,
// `amplitude` at period/2, back to 0 at `period`; rounded toward zero.
int platform_offset(const MovingPlatform& platform, long tick);
Vec3 platform_delta(const MovingPlatform& platform, long tick);

class VoxelMap {
 public:
  VoxelMap() = default;
  VoxelMap(std::string name, Vec3 dims);

  const std::string& name() const { return name_; }
  const Vec3& dims() const { return dims_; }
  bool in_bounds(const Vec3& p) const {
    return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < dims_.x && p.y < dims_.y && p.z < dims_.z;
  }
  std::size_t index(const Vec3& p) const {
    return (static_cast<std::size_t>(p.y) * dims_.z + p.z) * dims_.x + p.x;
  }
  std::size_t cell_count() const { return voxels_.size(); }

  SemanticClass semantic(const Vec3& p) const { return static_cast<SemanticClass>(voxels_[index(p)]); }
  void set(const Vec3& p, SemanticClass c) { voxels_[index(p)] = static_cast<std::uint8_t>(c); }
  const std::vector<std::uint8_t>& voxels() const { return voxels_; }

  Vec3 spawn;
  std::vector<GoalRegion> goals;
  std::vector<BugRegion> bugs;
  std::vector<MovingPlatform> platforms;
  // Voxels every bug-free route to the goal must pass through. Evaluation only.
  std::vector<Vec3> intended_route;

  // Builds the lookup tables used by the physics and validates every map
  // invariant. Throws InvariantError naming the offending voxel.
  void finalize();
  bool finalized() const { return !physics_.empty(); }

  // When false, bug regions behave exactly as their semantic class says.
  bool bug_physics() const { return bug_physics_; }
  VoxelMap with_bug_physics(bool enabled) const;

  // Static physics queries (platforms excluded).
  bool static_collides(const Vec3& p) const;
  bool climbable(const Vec3& p) const;
  bool in_glitch(const Vec3& p) const;
  // Bitmask over bug region indices containing p.
  std::uint32_t bug_mask(const Vec3& p) const;
  // Bug regions an agent at p is in contact with: the ones containing p, plus
  // unintended-climbable regions next to p while climbing.
  std::uint32_t contact_bug_mask(const Vec3& p, bool climbing) const;
  // Id of the active goal containing p, or -1.
  int active_goal_at(const Vec3& p) const;

  // Period after which all platforms repeat (1 when there are none).
  long platform_cycle() const;
  // Platform voxels at `tick`, with the index of their platform.
  std::vector<std::pair<Vec3, int>> platform_voxels(long tick) const;

 private:
  enum : std::uint8_t { kCollides = 1, kClimbable = 2, kGlitch = 4 };

  std::string name_;
  Vec3 dims_;
  std::vector<std::uint8_t> voxels_;
  bool bug_physics_ = true;
  std::vector<std::uint8_t> physics_;
  std::vector<std::uint32_t> bug_masks_;
  std::vector<std::uint32_t> climb_bug_masks_;
  std::vector<int> goal_ids_;
};

}  // namespace ccpt::sim
