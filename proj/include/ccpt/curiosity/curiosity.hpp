#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccpt/encode/encode.hpp"
#include "ccpt/nn/optim.hpp"
#include "ccpt/policy/arch.hpp"
#include "ccpt/rng.hpp"

namespace ccpt::curiosity {

struct CuriosityConfig {
  double lr = 7e-5;
  int batch = 128;
  bool normalize = true;
  // Weight kept by past reward statistics at each update; 1 keeps all history.
  double norm_decay = 0.5;
  double max_grad_norm = 0.0;

  void validate() const;
};

// Running mean and variance of a scalar stream (parallel merge of batch
// moments). Used to put the intrinsic reward on a unit scale. With decay < 1
// the accumulated moments are down-weighted by `decay` before each merge.
class RunningStd {
 public:
  explicit RunningStd(double decay = 1.0);
  void update(std::span<const double> xs);
  double mean() const { return mean_; }
  double variance() const { return count_ > 0 ? m2_ / count_ : 0.0; }
  double stddev() const;
  double count() const { return count_; }
  // x / stddev, or x unchanged before any data arrives.
  double normalize(double x) const;

 private:
  double decay_ = 1.0;
  double count_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Inputs to both networks: sinusoidal position embedding and agent info.
std::vector<nn::Tensor> features(std::span<const sim::AgentState> states, const encode::PEConfig& pe = {});

// Frozen random target and trainable predictor with identical architecture,
// both mapping features to rnd_output values.
class RNDPair {
 public:
  RNDPair(const policy::ArchProfile& profile, std::uint64_t seed, CuriosityConfig cfg = {},
          encode::PEConfig pe = {});

  // Raw intrinsic reward: mean squared difference over the outputs.
  std::vector<double> rewards(std::span<const sim::AgentState> states) const;
  double reward(const sim::AgentState& s) const;

  // One pass over `states` in shuffled minibatches of cfg.batch, one Adam step
  // each. Returns the mean minibatch loss.
  double train(std::span<const sim::AgentState> states, Rng& rng);
  // One Adam step on exactly these states. Returns the loss before the step.
  double train_step(std::span<const sim::AgentState> states);

  // Mean squared prediction error over the batch and its predictor gradient.
  struct PredictorLoss {
    double loss = 0.0;
    nn::Gradients grads;
  };
  PredictorLoss predictor_loss(std::span<const sim::AgentState> states);

  std::uint64_t target_hash();
  void copy_target_into_predictor();

  nn::BranchNet& target() { return target_; }
  nn::BranchNet& predictor() { return predictor_; }
  const CuriosityConfig& config() const { return cfg_; }
  const encode::PEConfig& pe() const { return pe_; }

  void save(const std::string& target_path, const std::string& predictor_path);
  void load(const std::string& target_path, const std::string& predictor_path);

 private:
  CuriosityConfig cfg_;
  encode::PEConfig pe_;
  nn::BranchNet target_;
  nn::BranchNet predictor_;
  nn::Adam opt_;
  std::uint64_t target_hash_ = 0;
};

}  // namespace ccpt::curiosity
