#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccpt/nn/network.hpp"

namespace ccpt::nn {

struct AdamConfig {
  double lr = 7e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm clipping threshold; 0 disables clipping.
  double max_grad_norm = 0.0;
};

// Adam with bias correction. Moments are created lazily on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<const NamedParam> params, const Gradients& grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t step_ = 0;
};

// Versioned little-endian parameter file:
//   magic "CCPTPARM", u32 version, descriptor, u32 count,
//   per tensor: name, u32 rank, u32 dims[rank], f64 data[]
// Strings are u32 length + bytes.
inline constexpr std::uint32_t kParamFormatVersion = 1;

void save_params(const std::string& path, const std::string& descriptor, std::span<const NamedParam> params);
// Loads into `params` in place. Throws ParseError on truncation or bad magic
// and InvariantError on version, descriptor or layer mismatch.
void load_params(const std::string& path, const std::string& descriptor, std::span<const NamedParam> params);

// FNV-1a over the raw bytes of every parameter; used to prove frozen nets stay frozen.
std::uint64_t param_hash(std::span<const NamedParam> params);

}  // namespace ccpt::nn
