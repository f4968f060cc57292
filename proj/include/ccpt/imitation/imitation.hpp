#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <span>
#include <vector>

#include "ccpt/nn/optim.hpp"
#include "ccpt/policy/arch.hpp"
#include "ccpt/rng.hpp"
#include "ccpt/sim/map_io.hpp"
#include "ccpt/sim/physics.hpp"

namespace ccpt::imitation {

// One (local occupancy, action) pair as seen by the discriminator.
struct Sample {
  std::vector<double> occupancy;  // L^3 codes, [y][z][x]
  int action = 0;
};

Sample make_sample(const sim::VoxelMap& map, const sim::AgentState& s, long tick, sim::Action a, int L);

struct Demo {
  sim::DemoScript script;
  sim::Trajectory trajectory;
};

// Replays the script and throws InvariantError unless it reaches the goal.
Demo record_demo(const sim::VoxelMap& map, const sim::DemoScript& script);
// Throws ConfigError when a demo names another map, ParseError on bad files
// and InvariantError when a replay no longer reaches its goal.
std::vector<Demo> load_demos(const sim::VoxelMap& map, std::span<const std::filesystem::path> paths);

// Every (state, action) pair of every demo.
std::vector<Sample> expert_samples(const sim::VoxelMap& map, std::span<const Demo> demos, int L);

// Fixed-capacity ring buffer of policy samples with uniform sampling. add()
// is serialized internally so rollout workers may append concurrently.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void add(Sample s);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return added_; }
  const Sample& at(std::size_t i) const { return items_.at(i); }
  std::vector<const Sample*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Sample> items_;
  std::size_t next_ = 0;
  std::uint64_t added_ = 0;
  std::mutex mu_;
};

struct ImitationConfig {
  double lr = 7e-5;
  int batch = 32;
  double gp_coef = 5.0;
  std::size_t replay_capacity = 100000;
  int updates_per_iteration = 10;
  double max_grad_norm = 10.0;

  void validate() const;
};

struct LossResult {
  double adversarial = 0.0;  // mean (D-1)^2 over expert + mean (D+1)^2 over policy
  double penalty = 0.0;      // gp_coef * mean ||grad D||^2 over expert
  double total() const { return adversarial + penalty; }
  double expert_mean = 0.0;
  double policy_mean = 0.0;
  nn::Gradients grads;  // aligned with Discriminator::params()
};

// D(s, a): code embedding + tanh stem, then a convolution branch over the
// embedded occupancy and a dense branch over the one-hot action, merged by a
// trunk with a single linear output.
class Discriminator {
 public:
  Discriminator(const policy::ArchProfile& profile, int L);

  int occupancy_size() const { return L_; }
  const std::string& descriptor() const { return descriptor_; }

  // Embedded occupancy [B, dim, L, L, L] and one-hot actions [B, 10].
  nn::Tensor embed(std::span<const Sample* const> batch) const;
  static nn::Tensor one_hot(std::span<const Sample* const> batch);

  std::vector<double> forward(std::span<const Sample* const> batch) const;
  double forward(const Sample& s) const;

  // Gradient of D with respect to the embedded occupancy and the one-hot
  // action, row by row.
  struct InputGradients {
    nn::Tensor embedded;
    nn::Tensor action;
  };
  InputGradients input_gradients(std::span<const Sample* const> batch);

  LossResult loss(std::span<const Sample* const> expert, std::span<const Sample* const> policy, double gp_coef);

  std::vector<nn::NamedParam> params();
  void init(Rng& rng);
  void touch() { body_.touch(); }

  // Exposed for tests that need layer-level access.
  nn::BranchNet& body() { return body_; }
  nn::Sequential& stem() { return stem_; }

 private:
  int L_;
  std::string descriptor_;
  nn::Sequential stem_;  // CodeEmbedding -> Tanh
  nn::BranchNet body_;
};

double imitation_reward(double d);

class ImitationTrainer {
 public:
  ImitationTrainer(Discriminator& disc, ImitationConfig cfg);

  // One Adam step on a fresh expert and policy batch.
  LossResult update(std::span<const Sample> expert, const ReplayBuffer& replay, Rng& rng);

  const ImitationConfig& config() const { return cfg_; }

 private:
  Discriminator* disc_;
  ImitationConfig cfg_;
  nn::Adam opt_;
};

}  // namespace ccpt::imitation
