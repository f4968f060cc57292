#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ccpt/trainer/trainer.hpp"
#include "ccpt/triage/triage.hpp"

namespace ccpt::cli {

using Progress = std::function<void(const std::string& label, const trainer::IterationMetrics&)>;

struct RunSpec {
  std::string label;
  std::string slug;  // directory name under the output root
  trainer::TrainConfig cfg;
};

struct RunOutcome {
  std::filesystem::path dir;
  bool reused = false;
};

// Trains into `dir`. An existing directory is reused only when it holds a
// completed run of an identical config; anything else is a ConfigError.
RunOutcome ensure_run(const trainer::TrainConfig& cfg, const std::filesystem::path& dir,
                      const std::function<void(const trainer::IterationMetrics&)>& progress = {});

struct MetricsPoint {
  int iteration = 0;
  long env_steps = 0;
  std::size_t coverage = 0;
};
std::vector<MetricsPoint> load_metrics(const std::filesystem::path& run_dir);

// CCPT with sampled alpha against fixed alpha 0.5, 0 and 1, all on one seed.
std::vector<RunSpec> reward_ablation_specs(const trainer::TrainConfig& base);

struct RewardRow {
  std::string label;
  std::string alpha;  // "U(0,1)" or the fixed value
  std::size_t coverage = 0;
  int bugs_found = 0;
  int bugs_highlighted = 0;
  std::size_t theta = 0;
  double epsilon = 0.0;
  std::filesystem::path run_dir;
};
std::vector<RewardRow> ablate_reward(const trainer::TrainConfig& base, const std::filesystem::path& out_root,
                                     double q = triage::kDefaultQuantile, const Progress& progress = {});
std::string format_reward_table(const std::vector<RewardRow>& rows);

// Full model, normalized position, learned position, no local view and the
// ray-cast local view.
std::vector<RunSpec> encoding_ablation_specs(const trainer::TrainConfig& base);

struct Series {
  std::string label;
  std::vector<MetricsPoint> points;
  std::filesystem::path run_dir;
};
std::vector<Series> ablate_encoding(const trainer::TrainConfig& base, const std::filesystem::path& out_root,
                                    const Progress& progress = {});
// Columnar text: header "series iteration env_steps coverage", one row per point.
std::string format_series(const std::vector<Series>& series);

}  // namespace ccpt::cli
