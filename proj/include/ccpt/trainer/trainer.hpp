#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ccpt/curiosity/curiosity.hpp"
#include "ccpt/imitation/imitation.hpp"
#include "ccpt/policy/policy.hpp"
#include "ccpt/trainer/config.hpp"
#include "ccpt/trainer/dataset.hpp"

namespace ccpt::trainer {

double sample_alpha(Rng& rng);
// R = alpha * r_c + (1 - alpha) * r_i + r_e.
double combine_reward(double r_c, double r_i, double r_e, double alpha);

struct IterationMetrics {
  int iteration = 0;
  long env_steps = 0;  // cumulative
  double mean_reward = 0.0;
  double mean_r_i = 0.0;
  double mean_r_c = 0.0;  // raw
  double mean_r_e = 0.0;
  double goal_rate = 0.0;  // fraction of this iteration's episodes reaching a goal
  std::size_t coverage = 0;  // cumulative distinct positions
  double disc_loss = 0.0;
  double rnd_loss = 0.0;
  policy::PPOStats ppo;
  std::optional<double> eval_goal_rate;
};

struct EvalResult {
  int episodes = 0;
  int reached = 0;
  double goal_rate() const { return episodes ? static_cast<double>(reached) / episodes : 0.0; }
};

// Holds every network and optimizer for one run and advances it one CCPT
// iteration at a time.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  // Collects cfg.rollouts episodes, scores them, then updates D, the RND
  // predictor and the policy. The new trajectories are appended to `out` in
  // episode order.
  IterationMetrics iterate(std::vector<TrajectoryRecord>* out = nullptr);

  // Sampled-policy evaluation from the spawn with the given alpha.
  EvalResult evaluate(int episodes, double alpha, std::uint64_t seed) const;

  void save_checkpoints(const std::filesystem::path& dir);
  void load_checkpoints(const std::filesystem::path& dir);

  const TrainConfig& config() const { return cfg_; }
  const sim::VoxelMap& map() const { return map_; }
  const std::vector<imitation::Demo>& demos() const { return demos_; }
  nn::BranchNet& actor() { return actor_; }
  nn::BranchNet& critic() { return critic_; }
  imitation::Discriminator& discriminator() { return disc_; }
  curiosity::RNDPair& rnd() { return rnd_; }
  const policy::PolicySpec& spec() const { return spec_; }
  int iteration() const { return iteration_; }
  long env_steps() const { return env_steps_; }

 private:
  struct Episode;
  void run_episodes(std::span<Episode> episodes) const;
  void run_parallel(std::vector<Episode>& episodes) const;

  TrainConfig cfg_;
  sim::VoxelMap map_;
  std::vector<imitation::Demo> demos_;
  std::vector<imitation::Sample> expert_;
  policy::PolicySpec spec_;
  int episode_length_;
  nn::BranchNet actor_;
  nn::BranchNet critic_;
  imitation::Discriminator disc_;
  curiosity::RNDPair rnd_;
  std::unique_ptr<imitation::ReplayBuffer> replay_;
  std::unique_ptr<imitation::ImitationTrainer> disc_trainer_;
  policy::PPOLearner ppo_;
  curiosity::RunningStd rc_stats_;
  std::vector<char> visited_;
  std::size_t coverage_ = 0;
  int iteration_ = 0;
  long env_steps_ = 0;
};

struct RunResult {
  std::filesystem::path run_dir;
  std::vector<IterationMetrics> metrics;
  std::size_t trajectories = 0;
  std::size_t coverage = 0;
  std::optional<double> final_eval_goal_rate;
};

// Runs cfg.iterations iterations and persists config.json, manifest.json,
// G.jsonl, metrics.jsonl and checkpoints/ under run_dir, which must not
// exist yet. On a numeric failure the current parameters are checkpointed
// before the error propagates.
RunResult run_training(const TrainConfig& cfg, const std::filesystem::path& run_dir,
                       const std::function<void(const IterationMetrics&)>& progress = {});

}  // namespace ccpt::trainer
