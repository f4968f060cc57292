#include "ccpt/encode/encode.hpp"

#include <cmath>
#include <numbers>

#include "ccpt/errors.hpp"

namespace ccpt::encode {

void PEConfig::validate() const {
  if (d <= 0 || d % 2 != 0) throw ConfigError("positional embedding size must be a positive even integer");
  if (!(base > 1.0)) throw ConfigError("positional embedding base must exceed 1");
}

std::vector<double> positional_embedding(int pos, const PEConfig& cfg) {
  std::vector<double> out(static_cast<std::size_t>(cfg.d));
  for (int i = 0; i < cfg.d / 2; ++i) {
    const double angle = pos / std::pow(cfg.base, 2.0 * i / cfg.d);
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
  return out;
}

std::vector<double> encode_position(const sim::Vec3& pos, const PEConfig& cfg) {
  std::vector<double> out;
  out.reserve(3 * static_cast<std::size_t>(cfg.d));
  for (int c : {pos.x, pos.y, pos.z}) {
    const auto e = positional_embedding(c, cfg);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

std::string_view position_mode_name(PositionMode m) {
  switch (m) {
    case PositionMode::Sinusoidal: return "sinusoidal";
    case PositionMode::Normalized: return "normalized";
    case PositionMode::Learned: return "learned";
  }
  return "unknown";
}

std::optional<PositionMode> parse_position_mode(std::string_view name) {
  for (auto m : {PositionMode::Sinusoidal, PositionMode::Normalized, PositionMode::Learned}) {
    if (position_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<double> encode_position_ablation(const sim::Vec3& pos, PositionMode mode, const sim::Vec3& dims,
                                             const PEConfig& cfg) {
  switch (mode) {
    case PositionMode::Sinusoidal:
      return encode_position(pos, cfg);
    case PositionMode::Normalized:
      return {static_cast<double>(pos.x) / dims.x, static_cast<double>(pos.y) / dims.y,
              static_cast<double>(pos.z) / dims.z};
    case PositionMode::Learned:
      return {static_cast<double>(pos.x), static_cast<double>(pos.y), static_cast<double>(pos.z)};
  }
  throw ConfigError("unknown position mode");
}

int position_width(PositionMode mode, const PEConfig& cfg) { return mode == PositionMode::Sinusoidal ? 3 * cfg.d : 3; }

std::array<double, kAgentInfoSize> agent_info(const sim::AgentState& s) {
  std::array<double, kAgentInfoSize> out{};
  out[0] = s.grounded ? 1.0 : 0.0;
  out[1] = s.climbing ? 1.0 : 0.0;
  out[2] = s.double_jump_available ? 1.0 : 0.0;
  out[3] = s.displacement.x;
  out[4] = s.displacement.y;
  out[5] = s.displacement.z;
  const double len = std::sqrt(static_cast<double>(s.last_move.x * s.last_move.x + s.last_move.y * s.last_move.y +
                                                   s.last_move.z * s.last_move.z));
  if (len > 0.0) {
    out[6] = s.last_move.x / len;
    out[7] = s.last_move.y / len;
    out[8] = s.last_move.z / len;
  }
  return out;
}

namespace {

// Semantic code seen at p: out of bounds and platforms read as Solid.
int observed_code(const sim::VoxelMap& map, const std::vector<std::pair<sim::Vec3, int>>& platforms,
                  const sim::Vec3& p) {
  if (!map.in_bounds(p)) return static_cast<int>(sim::SemanticClass::Solid);
  const int c = static_cast<int>(map.semantic(p));
  if (c != 0) return c;
  for (const auto& [v, k] : platforms) {
    if (v == p) return static_cast<int>(sim::SemanticClass::Solid);
  }
  return 0;
}

}  // namespace

std::vector<double> local_occupancy(const sim::VoxelMap& map, const sim::AgentState& s, int L, long tick) {
  if (L <= 0 || L % 2 == 0) throw ConfigError("occupancy size must be a positive odd integer");
  const auto platforms = map.platform_voxels(tick);
  const int h = L / 2;
  std::vector<double> out(static_cast<std::size_t>(L) * L * L);
  std::size_t i = 0;
  for (int dy = -h; dy <= h; ++dy) {
    for (int dz = -h; dz <= h; ++dz) {
      for (int dx = -h; dx <= h; ++dx) {
        out[i++] = observed_code(map, platforms, {s.pos.x + dx, s.pos.y + dy, s.pos.z + dz});
      }
    }
  }
  out[out.size() / 2] = sim::kAgentCode;
  return out;
}

std::vector<double> raycast_observation(const sim::VoxelMap& map, const sim::AgentState& s, long tick, double range) {
  const sim::Vec3 d = map.dims();
  if (range <= 0.0) range = std::sqrt(static_cast<double>(d.x * d.x + d.y * d.y + d.z * d.z));
  const auto platforms = map.platform_voxels(tick);
  const int steps = static_cast<int>(std::floor(range));
  std::vector<double> out;
  out.reserve(kRaycastSize);
  for (int heading = 0; heading < 8; ++heading) {
    // Heading 0 is north (+z), turning clockwise towards east (+x).
    const double yaw = heading * std::numbers::pi / 4.0;
    for (double elevation : {-30.0, 0.0, 30.0}) {
      const double pitch = elevation * std::numbers::pi / 180.0;
      const double dx = std::cos(pitch) * std::sin(yaw);
      const double dy = std::sin(pitch);
      const double dz = std::cos(pitch) * std::cos(yaw);
      double dist = 1.0;
      int code = 0;
      for (int k = 1; k <= steps; ++k) {
        const sim::Vec3 p{s.pos.x + static_cast<int>(std::lround(k * dx)), s.pos.y + static_cast<int>(std::lround(k * dy)),
                          s.pos.z + static_cast<int>(std::lround(k * dz))};
        if (p == s.pos) continue;
        const int c = observed_code(map, platforms, p);
        if (c != 0) {
          dist = k / range;
          code = c;
          break;
        }
      }
      out.push_back(dist);
      out.push_back(code);
    }
  }
  return out;
}

std::string_view local_mode_name(LocalMode m) {
  switch (m) {
    case LocalMode::Occupancy: return "occupancy";
    case LocalMode::Raycast: return "raycast";
    case LocalMode::None: return "none";
  }
  return "unknown";
}

void ObservationConfig::validate() const {
  pe.validate();
  if (occupancy <= 0 || occupancy % 2 == 0) throw ConfigError("occupancy size must be a positive odd integer");
}

Observation observe(const sim::VoxelMap& map, const sim::AgentState& s, long tick, double alpha,
                    const ObservationConfig& cfg) {
  Observation o;
  o.position = encode_position_ablation(s.pos, cfg.position, map.dims(), cfg.pe);
  o.info = agent_info(s);
  switch (cfg.local) {
    case LocalMode::Occupancy: o.local = local_occupancy(map, s, cfg.occupancy, tick); break;
    case LocalMode::Raycast: o.local = raycast_observation(map, s, tick); break;
    case LocalMode::None: break;
  }
  o.global_pos = s.pos;
  o.alpha = alpha;
  return o;
}

}  // namespace ccpt::encode
