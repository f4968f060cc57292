#pragma once

#include <span>
#include <vector>

#include "ccpt/encode/encode.hpp"
#include "ccpt/nn/optim.hpp"
#include "ccpt/policy/arch.hpp"
#include "ccpt/rng.hpp"

namespace ccpt::policy {

// Everything needed to build actor and critic for one map.
struct PolicySpec {
  ArchProfile profile;
  encode::ObservationConfig obs;
  sim::Vec3 map_dims;
};

encode::ObservationConfig observation_config(const ArchProfile& profile, encode::PositionMode position,
                                             encode::LocalMode local);

// Branches: position, agent info, local perception (absent for LocalMode::None),
// then the exploration weight alpha joined at the concatenation.
nn::BranchNet build_actor(const PolicySpec& spec);
nn::BranchNet build_critic(const PolicySpec& spec);

// One input tensor per branch, rows in observation order.
std::vector<nn::Tensor> batch_inputs(std::span<const encode::Observation> obs, const PolicySpec& spec);

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  std::vector<double> probs;
};

// Samples one action per row, drawing from rngs[row]. Greedy mode takes the
// argmax instead. Throws NumericError on non-finite logits.
std::vector<ActResult> act(const nn::BranchNet& actor, const nn::BranchNet& critic, std::span<const nn::Tensor> inputs,
                           std::span<Rng* const> rngs, bool greedy = false);
std::vector<double> action_probs(const nn::BranchNet& actor, std::span<const nn::Tensor> inputs, int row);

struct PPOConfig {
  double lr = 7e-5;
  double gamma = 0.90;
  double lambda = 0.95;
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 256;
  double entropy_coef = 0.1;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over concatenated episodes. episode_end[t]
// marks the last step of an episode; bootstrap[t] is then the value of the
// state after it (0 for a true terminal, V(s_T) for a time-limit cut).
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const char> episode_end, std::span<const double> bootstrap, double gamma,
                      double lambda);

struct RolloutBatch {
  std::vector<nn::Tensor> inputs;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<char> episode_end;
  std::vector<double> bootstrap;
  std::vector<double> alphas;
  std::vector<double> advantages;
  std::vector<double> returns;

  int size() const { return static_cast<int>(actions.size()); }
};

struct SurrogateResult {
  double policy_loss = 0.0;  // clipped surrogate, without the entropy term
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  nn::Gradients grads;
};

// Loss -mean(min(r A, clip(r) A)) - entropy_coef * mean(H) and its gradient
// for one minibatch.
SurrogateResult surrogate_loss(nn::BranchNet& actor, std::span<const nn::Tensor> inputs, std::span<const int> actions,
                               std::span<const double> old_log_probs, std::span<const double> advantages,
                               const PPOConfig& cfg);

struct ValueResult {
  double loss = 0.0;  // 0.5 * mean squared error
  nn::Gradients grads;
};
ValueResult value_loss(nn::BranchNet& critic, std::span<const nn::Tensor> inputs, std::span<const double> returns);

struct PPOStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
};

class PPOLearner {
 public:
  explicit PPOLearner(PPOConfig cfg);

  // Fills advantages/returns when missing, then runs the epochs.
  PPOStats update(nn::BranchNet& actor, nn::BranchNet& critic, RolloutBatch& batch, Rng& rng);

  const PPOConfig& config() const { return cfg_; }

 private:
  PPOConfig cfg_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
};

}  // namespace ccpt::policy
