#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccpt/curiosity/curiosity.hpp"
#include "ccpt/sim/world.hpp"
#include "ccpt/trainer/dataset.hpp"
#include "json.hpp"

namespace ccpt::triage {

inline constexpr int kReportFormatVersion = 1;
inline constexpr int kExportFormatVersion = 1;
inline constexpr double kAlphaCutoff = 0.5;
inline constexpr double kDefaultQuantile = 0.9;

// Average raw curiosity from the start to the first goal entry:
// sum_{t=0..T} r_c(s_t) / T with T = first_goal_step. The sum has T+1 terms
// and is divided by T, as written. Empty when the goal is never reached or
// T is 0.
std::optional<double> average_curiosity(std::span<const double> r_c_per_state, int first_goal_step);
std::optional<double> score_trajectory(std::span<const sim::AgentState> states, int first_goal_step,
                                       const curiosity::RNDPair& rnd);

struct TrajectoryScore {
  std::uint64_t id = 0;
  double alpha = 0.0;
  bool reached_goal = false;
  int T = -1;
  std::optional<double> score;
  std::uint32_t bugs_entered = 0;
};

std::vector<TrajectoryScore> score_dataset(std::span<const trainer::TrajectoryRecord> g,
                                           const curiosity::RNDPair& rnd);

enum class EpsilonMode { Absolute, Quantile };
std::string epsilon_mode_name(EpsilonMode m);
std::optional<EpsilonMode> parse_epsilon_mode(const std::string& s);

// Linear-interpolation quantile (type 7) of the values; q in [0, 1].
double quantile(std::vector<double> values, double q);

// Default threshold: the q-quantile of the demo scores together with the
// scores of goal-reaching trajectories collected with alpha < 0.5.
double quantile_epsilon(std::span<const double> demo_scores, std::span<const TrajectoryScore> scores,
                        double q = kDefaultQuantile);

// Members: alpha >= 0.5, goal reached and score > epsilon. Throws
// InvariantError on an empty input.
std::vector<TrajectoryScore> filter_theta(std::span<const TrajectoryScore> scores, double epsilon);

struct BugTally {
  std::string kind;
  int planted = 0;
  int found = 0;
  int highlighted = 0;
};

struct BugReport {
  int planted = 0;
  int found = 0;        // regions entered by any trajectory
  int highlighted = 0;  // regions entered by a member of theta
  std::uint32_t found_mask = 0;
  std::uint32_t highlighted_mask = 0;
  std::vector<BugTally> by_kind;
};

BugReport evaluate_bugs(std::span<const TrajectoryScore> all, std::span<const TrajectoryScore> theta,
                        const sim::VoxelMap& map);

struct TriageReport {
  EpsilonMode mode = EpsilonMode::Quantile;
  double epsilon = 0.0;
  double quantile = kDefaultQuantile;
  std::vector<TrajectoryScore> scores;
  std::vector<double> demo_scores;
  std::vector<TrajectoryScore> theta;
  BugReport bugs;
  std::size_t coverage = 0;
  std::size_t trajectories = 0;
};

nlohmann::json report_to_json(const TriageReport& r);

// Scores a finished run from its persisted artifacts only (config.json,
// G.jsonl, checkpoints/). `epsilon` is used in absolute mode.
TriageReport triage_run(const std::filesystem::path& run_dir, EpsilonMode mode, double epsilon = 0.0,
                        double q = kDefaultQuantile);

// Columnar text export. Layout:
//   # ccpt-trajectories <version>
//   T <id> <tag> <alpha> <score|nan> <reached 0/1> <bug_mask> <rows>
//   P <step> <x> <y> <z> <bug_mask>      (one per state, <rows> of them)
struct ExportRecord {
  std::uint64_t id = 0;
  std::string tag;  // "train", "theta" or "demo"
  double alpha = 0.0;
  std::optional<double> score;
  bool reached_goal = false;
  std::uint32_t bugs = 0;
  std::vector<sim::Vec3> positions;
  std::vector<std::uint32_t> bug_masks;

  friend bool operator==(const ExportRecord&, const ExportRecord&) = default;
};

std::string format_export(std::span<const ExportRecord> records);
std::vector<ExportRecord> parse_export(const std::string& text);
void write_export(const std::filesystem::path& path, std::span<const ExportRecord> records);

ExportRecord export_record(const trainer::TrajectoryRecord& r, const std::string& tag,
                           std::optional<double> score);

}  // namespace ccpt::triage
