#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ccpt/sim/physics.hpp"

namespace ccpt::trainer {

inline constexpr int kDatasetFormatVersion = 1;

// One training episode as stored in the external dataset G. Per-step vectors
// have one entry per action; states has one more (states[0] is the reset).
struct TrajectoryRecord {
  std::uint64_t id = 0;
  int iteration = 0;
  int episode = 0;
  double alpha = 0.0;
  double intrinsic_scale = 1.0;  // 0 in the extrinsic-only diagnostic mode
  bool reached_goal = false;
  int first_goal_step = -1;
  std::vector<sim::AgentState> states;
  std::vector<sim::Action> actions;
  std::vector<double> r_c;       // raw curiosity of states[t+1]
  std::vector<double> r_c_norm;  // as used in the combined reward
  std::vector<double> r_i;
  std::vector<double> r_e;
  std::vector<double> reward;
  std::vector<std::uint32_t> bug_masks;  // per state

  std::size_t steps() const { return actions.size(); }
  std::uint32_t bugs_entered() const;
};

std::string to_json_line(const TrajectoryRecord& r);
TrajectoryRecord from_json_line(const std::string& line);

// Append-only JSON-lines writer; each record is flushed as written.
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::filesystem::path& path);
  void append(const TrajectoryRecord& r);
  std::size_t count() const { return count_; }

 private:
  std::ofstream out_;
  std::size_t count_ = 0;
};

std::vector<TrajectoryRecord> load_dataset(const std::filesystem::path& path);

// Number of distinct voxel positions visited across all records.
std::size_t coverage(std::span<const TrajectoryRecord> g);

}  // namespace ccpt::trainer
