#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccpt/sim/physics.hpp"

namespace ccpt::encode {

struct PEConfig {
  int d = 32;
  double base = 10000.0;

  void validate() const;
};

// Sinusoidal embedding of one integer coordinate: element 2i is
// sin(pos / base^(2i/d)) and element 2i+1 the matching cosine.
std::vector<double> positional_embedding(int pos, const PEConfig& cfg = {});
// X, Y and Z embeddings concatenated (length 3d).
std::vector<double> encode_position(const sim::Vec3& pos, const PEConfig& cfg = {});

enum class PositionMode { Sinusoidal, Normalized, Learned };
std::string_view position_mode_name(PositionMode m);
std::optional<PositionMode> parse_position_mode(std::string_view name);

// Input row for the position branch. Sinusoidal gives encode_position;
// normalized gives pos / dims; learned gives the raw integer coordinates,
// which index a trainable table inside the network.
std::vector<double> encode_position_ablation(const sim::Vec3& pos, PositionMode mode, const sim::Vec3& dims,
                                             const PEConfig& cfg = {});
int position_width(PositionMode mode, const PEConfig& cfg = {});

// grounded, climbing, double jump (0/1); last displacement (3); unit
// direction of the last move intent (3).
inline constexpr int kAgentInfoSize = 9;
std::array<double, kAgentInfoSize> agent_info(const sim::AgentState& s);

inline constexpr int kDeskOccupancy = 7;
inline constexpr int kPaperOccupancy = 21;

// L^3 semantic codes centred on the agent, laid out [y][z][x]. Out-of-bounds
// cells are Solid, platform voxels at `tick` are Solid and the centre is the
// agent code. Bug regions show their semantic class only.
std::vector<double> local_occupancy(const sim::VoxelMap& map, const sim::AgentState& s, int L, long tick = 0);

// 24 rays: 8 compass headings (N, NE, E, SE, S, SW, W, NW) at elevations
// -30, 0 and +30 degrees, heading-major. Each ray adds (distance / range,
// semantic code of the hit), or (1, 0) when nothing is hit within range.
// Range 0 means the map diagonal.
inline constexpr int kRayCount = 24;
inline constexpr int kRaycastSize = 2 * kRayCount;
std::vector<double> raycast_observation(const sim::VoxelMap& map, const sim::AgentState& s, long tick = 0,
                                        double range = 0.0);

// What the local branch of the policy sees.
enum class LocalMode { Occupancy, Raycast, None };
std::string_view local_mode_name(LocalMode m);

struct ObservationConfig {
  int occupancy = kDeskOccupancy;
  PEConfig pe;
  PositionMode position = PositionMode::Sinusoidal;
  LocalMode local = LocalMode::Occupancy;

  void validate() const;
};

struct Observation {
  std::vector<double> position;  // per ObservationConfig::position
  std::array<double, kAgentInfoSize> info{};
  std::vector<double> local;     // occupancy codes or ray features; empty for None
  sim::Vec3 global_pos;
  double alpha = 0.0;
};

// `tick` is the tick at which the state holds (platform phase).
Observation observe(const sim::VoxelMap& map, const sim::AgentState& s, long tick, double alpha,
                    const ObservationConfig& cfg);

}  // namespace ccpt::encode
