#include "ccpt/policy/arch.hpp"

#include "ccpt/errors.hpp"

namespace ccpt::policy {

ArchProfile ArchProfile::desk() { return {}; }

ArchProfile ArchProfile::paper() {
  ArchProfile p;
  p.name = "paper";
  p.branch_width = 512;
  p.trunk = {1024, 512, 512};
  p.conv_channels = {32, 32, 64, 64};
  p.conv_padding = 1;
  p.occupancy = encode::kPaperOccupancy;
  p.rnd_trunk = {1024, 512};
  p.episode_length = sim::kPaperEpisodeLength;
  p.module_lr = 7e-5;
  p.policy_lr = 7e-5;
  return p;
}

ArchProfile ArchProfile::by_name(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

int ArchProfile::conv_output_size(int L) const {
  int extent = L;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    extent = nn::Conv3dSpec{1, 1, 3, 2, conv_padding}.out_extent(extent);
  }
  return conv_channels.empty() ? 0 : conv_channels.back() * extent * extent * extent;
}

void ArchProfile::validate() const {
  if (branch_width <= 0 || code_embedding <= 0 || rnd_output <= 0) throw ConfigError("layer widths must be positive");
  for (int w : trunk) {
    if (w <= 0) throw ConfigError("trunk widths must be positive");
  }
  if (conv_channels.empty()) throw ConfigError("at least one convolution layer is required");
  if (occupancy <= 0 || occupancy % 2 == 0) throw ConfigError("occupancy size must be a positive odd integer");
  int extent = occupancy;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    extent = nn::Conv3dSpec{1, 1, 3, 2, conv_padding}.out_extent(extent);
    if (extent < 1) {
      throw ConfigError("occupancy size " + std::to_string(occupancy) + " is too small for " +
                        std::to_string(conv_channels.size()) + " stride-2 convolutions");
    }
  }
  if (!(module_lr > 0.0) || !(policy_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (episode_length <= 0) throw ConfigError("episode length must be positive");
}

void add_conv_stack(nn::Sequential& seq, const ArchProfile& p, bool fused) {
  int in = p.code_embedding;
  for (std::size_t i = 0; i < p.conv_channels.size(); ++i) {
    const nn::Conv3dSpec spec{in, p.conv_channels[i], 3, 2, p.conv_padding};
    if (i == 0 && fused) {
      seq.add<nn::CodeConv3d>(kOccupancyCodes, p.code_embedding, spec);
    } else {
      seq.add<nn::Conv3d>(spec);
    }
    seq.add<nn::Relu>();
    in = p.conv_channels[i];
  }
}

void add_mlp(nn::Sequential& seq, int in, const std::vector<int>& hidden, int out, double out_gain) {
  for (int w : hidden) {
    seq.add<nn::Dense>(in, w);
    seq.add<nn::Relu>();
    in = w;
  }
  seq.add<nn::Dense>(in, out, out_gain);
}

}  // namespace ccpt::policy
