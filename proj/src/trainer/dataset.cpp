#include "ccpt/trainer/dataset.hpp"

#include <array>
#include <set>

#include "ccpt/errors.hpp"
#include "json.hpp"

namespace ccpt::trainer {

using nlohmann::json;

std::uint32_t TrajectoryRecord::bugs_entered() const {
  std::uint32_t m = 0;
  for (std::uint32_t b : bug_masks) m |= b;
  return m;
}

namespace {

json state_row(const sim::AgentState& s) {
  return json::array({s.pos.x, s.pos.y, s.pos.z, s.jump_ticks, s.grounded ? 1 : 0, s.climbing ? 1 : 0,
                      s.double_jump_available ? 1 : 0, s.last_move.x, s.last_move.y, s.last_move.z,
                      s.displacement.x, s.displacement.y, s.displacement.z});
}

sim::AgentState parse_state(const json& j) {
  if (!j.is_array() || j.size() != 13) throw ParseError("dataset state row must have 13 entries", 0, "states");
  sim::AgentState s;
  s.pos = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  s.jump_ticks = j[3].get<int>();
  s.grounded = j[4].get<int>() != 0;
  s.climbing = j[5].get<int>() != 0;
  s.double_jump_available = j[6].get<int>() != 0;
  s.last_move = {j[7].get<int>(), j[8].get<int>(), j[9].get<int>()};
  s.displacement = {j[10].get<int>(), j[11].get<int>(), j[12].get<int>()};
  return s;
}

}  // namespace

std::string to_json_line(const TrajectoryRecord& r) {
  json j;
  j["format_version"] = kDatasetFormatVersion;
  j["id"] = r.id;
  j["iteration"] = r.iteration;
  j["episode"] = r.episode;
  j["alpha"] = r.alpha;
  j["intrinsic_scale"] = r.intrinsic_scale;
  j["reached_goal"] = r.reached_goal;
  j["first_goal_step"] = r.first_goal_step;
  json states = json::array();
  for (const auto& s : r.states) states.push_back(state_row(s));
  j["states"] = std::move(states);
  json actions = json::array();
  for (auto a : r.actions) actions.push_back(std::string(sim::action_name(a)));
  j["actions"] = std::move(actions);
  j["r_c"] = r.r_c;
  j["r_c_norm"] = r.r_c_norm;
  j["r_i"] = r.r_i;
  j["r_e"] = r.r_e;
  j["reward"] = r.reward;
  j["bug_masks"] = r.bug_masks;
  return j.dump();
}

TrajectoryRecord from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("dataset record: ") + e.what(), 0, "");
  }
  try {
    if (j.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw ParseError("unsupported dataset format version", 0, "format_version");
    }
    TrajectoryRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.iteration = j.at("iteration").get<int>();
    r.episode = j.at("episode").get<int>();
    r.alpha = j.at("alpha").get<double>();
    r.intrinsic_scale = j.at("intrinsic_scale").get<double>();
    r.reached_goal = j.at("reached_goal").get<bool>();
    r.first_goal_step = j.at("first_goal_step").get<int>();
    for (const auto& s : j.at("states")) r.states.push_back(parse_state(s));
    for (const auto& a : j.at("actions")) {
      const auto parsed = sim::parse_action(a.get<std::string>());
      if (!parsed) throw ParseError("unknown action " + a.get<std::string>(), 0, "actions");
      r.actions.push_back(*parsed);
    }
    r.r_c = j.at("r_c").get<std::vector<double>>();
    r.r_c_norm = j.at("r_c_norm").get<std::vector<double>>();
    r.r_i = j.at("r_i").get<std::vector<double>>();
    r.r_e = j.at("r_e").get<std::vector<double>>();
    r.reward = j.at("reward").get<std::vector<double>>();
    r.bug_masks = j.at("bug_masks").get<std::vector<std::uint32_t>>();
    const std::size_t n = r.actions.size();
    if (r.states.size() != n + 1 || r.r_c.size() != n || r.r_c_norm.size() != n || r.r_i.size() != n ||
        r.r_e.size() != n || r.reward.size() != n || r.bug_masks.size() != n + 1) {
      throw ParseError("dataset record has inconsistent lengths", 0, "states");
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset record: ") + e.what(), 0, "");
  }
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw InvariantError("cannot open dataset " + path.string() + " for writing");
}

void DatasetWriter::append(const TrajectoryRecord& r) {
  out_ << to_json_line(r) << '\n';
  out_.flush();
  if (!out_) throw InvariantError("dataset write failed");
  ++count_;
}

std::vector<TrajectoryRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvariantError("cannot open dataset " + path.string());
  std::vector<TrajectoryRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno, e.field());
    }
  }
  return out;
}

std::size_t coverage(std::span<const TrajectoryRecord> g) {
  std::set<std::array<int, 3>> seen;
  for (const auto& r : g) {
    for (const auto& s : r.states) seen.insert({s.pos.x, s.pos.y, s.pos.z});
  }
  return seen.size();
}

}  // namespace ccpt::trainer
