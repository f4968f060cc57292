#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ccpt/sim/physics.hpp"
#include "ccpt/sim/world.hpp"

namespace ccpt::sim {

inline constexpr int kMapFormatVersion = 1;
inline constexpr int kDemoFormatVersion = 1;

// JSON map document. `voxels` holds one run-length-encoded string per
// y-layer, bottom first; each layer lists cells in z-major order
// (index z * nx + x) as space-separated `class*count` or `class` tokens.
// Goals and bugs accept `voxels` (list of [x,y,z]) and/or `boxes`
// (list of [[x0,y0,z0],[x1,y1,z1]], inclusive corners).
// Throws ParseError (with line and field) or InvariantError.
VoxelMap load_map(const std::string& text);
VoxelMap load_map_file(const std::filesystem::path& path);
std::string save_map(const VoxelMap& map);

std::string encode_layer(const VoxelMap& map, int y);

struct DemoScript {
  std::string map_name;
  int goal_id = 0;
  std::vector<Action> actions;
};

// Plain text: `format_version 1`, `map <name>`, `goal <id>`, `actions:`,
// then one action name per line. `#` starts a comment.
DemoScript parse_demo(const std::string& text);
DemoScript load_demo_file(const std::filesystem::path& path);
std::string format_demo(const DemoScript& demo);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ccpt::sim
