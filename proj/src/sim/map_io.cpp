#include "ccpt/sim/map_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ccpt/errors.hpp"

namespace ccpt::sim {

namespace {

using nlohmann::json;

int line_at_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Best-effort line of the first occurrence of "key" in the document.
int line_of_key(const std::string& text, const std::string& key) {
  const std::size_t pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_at_byte(text, pos);
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& what, const std::string& field, const std::string& key) const {
    throw ParseError(what, line_of_key(text_, key), field);
  }

  const json& member(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object()) fail("expected an object", path, key);
    auto it = obj.find(key);
    if (it == obj.end()) fail("missing required field", path.empty() ? key : path + "." + key, key);
    return *it;
  }

  int integer(const json& v, const std::string& field, const std::string& key) const {
    if (!v.is_number_integer()) fail("expected an integer", field, key);
    return v.get<int>();
  }

  Vec3 vec3(const json& v, const std::string& field, const std::string& key) const {
    if (!v.is_array() || v.size() != 3) fail("expected [x, y, z]", field, key);
    return {integer(v[0], field, key), integer(v[1], field, key), integer(v[2], field, key)};
  }

  std::vector<Vec3> region(const json& obj, const std::string& field) const {
    std::vector<Vec3> out;
    if (auto it = obj.find("voxels"); it != obj.end()) {
      if (!it->is_array()) fail("expected a list of voxels", field + ".voxels", "voxels");
      for (const json& v : *it) out.push_back(vec3(v, field + ".voxels", "voxels"));
    }
    if (auto it = obj.find("boxes"); it != obj.end()) {
      if (!it->is_array()) fail("expected a list of boxes", field + ".boxes", "boxes");
      for (const json& b : *it) {
        if (!b.is_array() || b.size() != 2) fail("expected [[x0,y0,z0],[x1,y1,z1]]", field + ".boxes", "boxes");
        const Vec3 lo = vec3(b[0], field + ".boxes", "boxes");
        const Vec3 hi = vec3(b[1], field + ".boxes", "boxes");
        for (int y = std::min(lo.y, hi.y); y <= std::max(lo.y, hi.y); ++y) {
          for (int z = std::min(lo.z, hi.z); z <= std::max(lo.z, hi.z); ++z) {
            for (int x = std::min(lo.x, hi.x); x <= std::max(lo.x, hi.x); ++x) out.push_back({x, y, z});
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  const std::string& text_;
};

void decode_layer(const Reader& r, const std::string& layer, int y, VoxelMap& map) {
  const std::string field = "voxels[" + std::to_string(y) + "]";
  const int nx = map.dims().x;
  const long cells = static_cast<long>(nx) * map.dims().z;
  long cursor = 0;
  std::istringstream in(layer);
  std::string token;
  while (in >> token) {
    const std::size_t star = token.find('*');
    long code = 0;
    long count = 1;
    try {
      std::size_t used = 0;
      code = std::stol(token.substr(0, star), &used);
      if (used != (star == std::string::npos ? token.size() : star)) throw std::invalid_argument(token);
      if (star != std::string::npos) {
        count = std::stol(token.substr(star + 1), &used);
        if (used != token.size() - star - 1) throw std::invalid_argument(token);
      }
    } catch (const std::logic_error&) {
      r.fail("bad run-length token '" + token + "'", field, "voxels");
    }
    if (code < 0 || code > 2) {
      r.fail("voxel class " + std::to_string(code) + " is not Empty(0), Solid(1) or Climbable(2)", field, "voxels");
    }
    if (count <= 0) r.fail("run length must be positive in '" + token + "'", field, "voxels");
    if (cursor + count > cells) r.fail("layer has more than " + std::to_string(cells) + " cells", field, "voxels");
    for (long i = 0; i < count; ++i, ++cursor) {
      map.set({static_cast<int>(cursor % nx), y, static_cast<int>(cursor / nx)}, static_cast<SemanticClass>(code));
    }
  }
  if (cursor != cells) {
    r.fail("layer has " + std::to_string(cursor) + " cells, expected " + std::to_string(cells), field, "voxels");
  }
}

json vec_json(const Vec3& p) { return json::array({p.x, p.y, p.z}); }

json region_json(const std::vector<Vec3>& voxels) {
  json out = json::array();
  for (const Vec3& p : voxels) out.push_back(vec_json(p));
  return out;
}

char axis_char(Axis a) { return a == Axis::X ? 'x' : a == Axis::Y ? 'y' : 'z'; }

}  // namespace

VoxelMap load_map(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed map document: ") + e.what(), line_at_byte(text, e.byte));
  }
  const Reader r(text);
  if (!doc.is_object()) r.fail("map document must be an object", "", "");

  const int version = r.integer(r.member(doc, "format_version", ""), "format_version", "format_version");
  if (version != kMapFormatVersion) {
    r.fail("unsupported map format_version " + std::to_string(version), "format_version", "format_version");
  }
  std::string name = "unnamed";
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) r.fail("expected a string", "name", "name");
    name = it->get<std::string>();
  }
  const Vec3 dims = r.vec3(r.member(doc, "dims", ""), "dims", "dims");
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) r.fail("dims must be positive", "dims", "dims");
  if (static_cast<long>(dims.x) * dims.y * dims.z > 64L * 1024 * 1024) r.fail("map too large", "dims", "dims");
  VoxelMap map(name, dims);

  const json& layers = r.member(doc, "voxels", "");
  if (!layers.is_array() || static_cast<int>(layers.size()) != dims.y) {
    r.fail("expected " + std::to_string(dims.y) + " layer strings", "voxels", "voxels");
  }
  for (int y = 0; y < dims.y; ++y) {
    if (!layers[y].is_string()) r.fail("expected a string", "voxels[" + std::to_string(y) + "]", "voxels");
    decode_layer(r, layers[y].get<std::string>(), y, map);
  }

  map.spawn = r.vec3(r.member(doc, "spawn", ""), "spawn", "spawn");

  if (auto it = doc.find("goals"); it != doc.end()) {
    if (!it->is_array()) r.fail("expected a list", "goals", "goals");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& g = (*it)[i];
      const std::string field = "goals[" + std::to_string(i) + "]";
      GoalRegion goal;
      goal.id = r.integer(r.member(g, "id", field), field + ".id", "id");
      if (auto a = g.find("active"); a != g.end()) {
        if (!a->is_boolean()) r.fail("expected a boolean", field + ".active", "active");
        goal.active = a->get<bool>();
      }
      goal.voxels = r.region(g, field);
      map.goals.push_back(std::move(goal));
    }
  }
  if (auto it = doc.find("bugs"); it != doc.end()) {
    if (!it->is_array()) r.fail("expected a list", "bugs", "bugs");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& b = (*it)[i];
      const std::string field = "bugs[" + std::to_string(i) + "]";
      const json& kind = r.member(b, "kind", field);
      const auto parsed = kind.is_string() ? parse_bug_kind(kind.get<std::string>()) : std::nullopt;
      if (!parsed) r.fail("unknown bug kind", field + ".kind", "kind");
      map.bugs.push_back({*parsed, r.region(b, field)});
    }
  }
  if (auto it = doc.find("platforms"); it != doc.end()) {
    if (!it->is_array()) r.fail("expected a list", "platforms", "platforms");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& p = (*it)[i];
      const std::string field = "platforms[" + std::to_string(i) + "]";
      MovingPlatform pl;
      const json& fp = r.member(p, "footprint", field);
      if (!fp.is_array()) r.fail("expected a list of voxels", field + ".footprint", "footprint");
      for (const json& v : fp) pl.footprint.push_back(r.vec3(v, field + ".footprint", "footprint"));
      const json& axis = r.member(p, "axis", field);
      const std::string a = axis.is_string() ? axis.get<std::string>() : "";
      if (a == "x") pl.axis = Axis::X;
      else if (a == "y") pl.axis = Axis::Y;
      else if (a == "z") pl.axis = Axis::Z;
      else r.fail("axis must be \"x\", \"y\" or \"z\"", field + ".axis", "axis");
      pl.amplitude = r.integer(r.member(p, "amplitude", field), field + ".amplitude", "amplitude");
      pl.period = r.integer(r.member(p, "period", field), field + ".period", "period");
      map.platforms.push_back(std::move(pl));
    }
  }
  if (auto it = doc.find("intended"); it != doc.end()) {
    if (!it->is_array()) r.fail("expected a list of voxels", "intended", "intended");
    for (const json& v : *it) map.intended_route.push_back(r.vec3(v, "intended", "intended"));
  }

  map.finalize();
  return map;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VoxelMap load_map_file(const std::filesystem::path& path) { return load_map(read_text_file(path)); }

std::string encode_layer(const VoxelMap& map, int y) {
  std::string out;
  int current = -1;
  long run = 0;
  auto flush = [&] {
    if (run == 0) return;
    if (!out.empty()) out += ' ';
    out += std::to_string(current);
    if (run > 1) out += "*" + std::to_string(run);
  };
  for (int z = 0; z < map.dims().z; ++z) {
    for (int x = 0; x < map.dims().x; ++x) {
      const int c = static_cast<int>(map.semantic({x, y, z}));
      if (c != current) {
        flush();
        current = c;
        run = 0;
      }
      ++run;
    }
  }
  flush();
  return out;
}

std::string save_map(const VoxelMap& map) {
  json doc;
  doc["format_version"] = kMapFormatVersion;
  doc["name"] = map.name();
  doc["dims"] = vec_json(map.dims());
  json layers = json::array();
  for (int y = 0; y < map.dims().y; ++y) layers.push_back(encode_layer(map, y));
  doc["voxels"] = layers;
  doc["spawn"] = vec_json(map.spawn);
  doc["goals"] = json::array();
  for (const GoalRegion& g : map.goals) {
    doc["goals"].push_back({{"id", g.id}, {"active", g.active}, {"voxels", region_json(g.voxels)}});
  }
  doc["bugs"] = json::array();
  for (const BugRegion& b : map.bugs) {
    doc["bugs"].push_back({{"kind", std::string(bug_kind_name(b.kind))}, {"voxels", region_json(b.voxels)}});
  }
  doc["platforms"] = json::array();
  for (const MovingPlatform& p : map.platforms) {
    doc["platforms"].push_back({{"footprint", region_json(p.footprint)},
                                {"axis", std::string(1, axis_char(p.axis))},
                                {"amplitude", p.amplitude},
                                {"period", p.period}});
  }
  if (!map.intended_route.empty()) doc["intended"] = region_json(map.intended_route);
  return doc.dump(1) + "\n";
}

DemoScript parse_demo(const std::string& text) {
  DemoScript demo;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool have_version = false;
  bool have_map = false;
  bool have_goal = false;
  bool in_actions = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw.substr(0, raw.find('#'));
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    s = s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    if (in_actions) {
      const auto a = parse_action(s);
      if (!a) throw ParseError("unknown action '" + s + "'", line, "actions");
      demo.actions.push_back(*a);
      continue;
    }
    std::istringstream ls(s);
    std::string key;
    ls >> key;
    std::string value;
    std::getline(ls >> std::ws, value);
    if (key == "format_version") {
      if (value != std::to_string(kDemoFormatVersion)) {
        throw ParseError("unsupported demo format_version '" + value + "'", line, "format_version");
      }
      have_version = true;
    } else if (key == "map") {
      if (value.empty()) throw ParseError("map name missing", line, "map");
      demo.map_name = value;
      have_map = true;
    } else if (key == "goal") {
      try {
        std::size_t used = 0;
        demo.goal_id = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::logic_error&) {
        throw ParseError("goal id must be an integer", line, "goal");
      }
      have_goal = true;
    } else if (key == "actions:") {
      in_actions = true;
    } else {
      throw ParseError("unexpected header line '" + s + "'", line);
    }
  }
  if (!have_version) throw ParseError("missing format_version header", line, "format_version");
  if (!have_map) throw ParseError("missing map header", line, "map");
  if (!have_goal) throw ParseError("missing goal header", line, "goal");
  if (!in_actions) throw ParseError("missing actions: section", line, "actions");
  return demo;
}

DemoScript load_demo_file(const std::filesystem::path& path) { return parse_demo(read_text_file(path)); }

std::string format_demo(const DemoScript& demo) {
  std::string out = "format_version " + std::to_string(kDemoFormatVersion) + "\n";
  out += "map " + demo.map_name + "\n";
  out += "goal " + std::to_string(demo.goal_id) + "\n";
  out += "actions:\n";
  for (Action a : demo.actions) {
    out += action_name(a);
    out += '\n';
  }
  return out;
}

}  // namespace ccpt::sim
