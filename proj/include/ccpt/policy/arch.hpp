#pragma once

#include <string>
#include <vector>

#include "ccpt/encode/encode.hpp"
#include "ccpt/nn/network.hpp"

namespace ccpt::policy {

// Layer sizes shared by every network. `paper` keeps the published sizes;
// `desk` shrinks them so from-scratch training fits a laptop budget.
struct ArchProfile {
  std::string name = "desk";
  int branch_width = 64;
  std::vector<int> trunk = {128, 64, 64};
  int code_embedding = 16;
  std::vector<int> conv_channels = {8, 16};
  int conv_padding = 0;
  int occupancy = encode::kDeskOccupancy;
  std::vector<int> rnd_trunk = {128, 64};
  int rnd_output = 128;
  int episode_length = sim::kDeskEpisodeLength;
  // Learning rates for the discriminator and RND predictor, and for PPO.
  double module_lr = 1e-3;
  double policy_lr = 3e-4;

  static ArchProfile desk();
  static ArchProfile paper();
  static ArchProfile by_name(const std::string& name);

  // Flattened size of the convolution stack output for an L^3 input.
  int conv_output_size(int L) const;
  void validate() const;
};

inline constexpr int kOccupancyCodes = 4;

// Appends Conv3d+ReLU layers after an input with `in_channels` channels. When
// `fused` the first layer also embeds the raw codes.
void add_conv_stack(nn::Sequential& seq, const ArchProfile& p, bool fused);
// ReLU MLP ending in a linear layer of width `out`.
void add_mlp(nn::Sequential& seq, int in, const std::vector<int>& hidden, int out, double out_gain = 1.0);

}  // namespace ccpt::policy
