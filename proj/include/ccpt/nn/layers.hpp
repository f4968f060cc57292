#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccpt/nn/tensor.hpp"
#include "ccpt/rng.hpp"

namespace ccpt::nn {

struct NamedParam {
  std::string name;
  Tensor* value;
};

// A stateless transform over batch-first tensors. Parameters live inside the
// layer; activations are kept by the caller (see Sequential).
//
// Gradient accumulation convention: backward() and tangent_param_grads() add
// into `grads`, which is aligned with params().
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string descriptor() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x) const = 0;
  // Returns the input gradient, or an empty tensor when the input is
  // categorical.
  virtual Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const = 0;

  // Second-order support for piecewise-linear layers. tangent() is the
  // Jacobian-vector product J(x)·sx. tangent_param_grads() adds the derivative
  // of <s, J^T gy> with respect to the parameters, for the bilinear layers.
  virtual bool piecewise_linear() const { return false; }
  virtual Tensor tangent(const Tensor& x, const Tensor& sx) const;
  virtual void tangent_param_grads(const Tensor& gy, const Tensor& sx, std::span<Tensor> grads) const;

  virtual std::vector<NamedParam> params() { return {}; }
  virtual void init(Rng& rng) { (void)rng; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

// y = W x + b over flattened rows. W is [out, in].
class Dense final : public Layer {
 public:
  Dense(int in, int out, double init_gain = 1.0);

  std::string descriptor() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  bool piecewise_linear() const override { return true; }
  Tensor tangent(const Tensor& x, const Tensor& sx) const override;
  void tangent_param_grads(const Tensor& gy, const Tensor& sx, std::span<Tensor> grads) const override;
  std::vector<NamedParam> params() override;
  void init(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  int in() const { return in_; }
  int out() const { return out_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  int in_;
  int out_;
  double init_gain_;
  Tensor weight_;
  Tensor bias_;
};

class Relu final : public Layer {
 public:
  std::string descriptor() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  bool piecewise_linear() const override { return true; }
  Tensor tangent(const Tensor& x, const Tensor& sx) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

class Tanh final : public Layer {
 public:
  std::string descriptor() const override { return "tanh"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Tanh>(*this); }
};

// Categorical codes [B, D, H, W] (stored as doubles) -> [B, dim, D, H, W].
class CodeEmbedding final : public Layer {
 public:
  CodeEmbedding(int codes, int dim);

  std::string descriptor() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  std::vector<NamedParam> params() override;
  void init(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<CodeEmbedding>(*this); }

  Tensor& table() { return table_; }

 private:
  int codes_;
  int dim_;
  Tensor table_;  // [codes, dim]
};

struct Conv3dSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int padding = 0;

  int out_extent(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
};

// Cross-correlation over [B, C, D, H, W] with cubic kernel, zero padding.
class Conv3d final : public Layer {
 public:
  explicit Conv3d(Conv3dSpec spec);

  std::string descriptor() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  bool piecewise_linear() const override { return true; }
  Tensor tangent(const Tensor& x, const Tensor& sx) const override;
  void tangent_param_grads(const Tensor& gy, const Tensor& sx, std::span<Tensor> grads) const override;
  std::vector<NamedParam> params() override;
  void init(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv3d>(*this); }

  const Conv3dSpec& spec() const { return spec_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  // Shared by forward and tangent; bias is optional.
  Tensor correlate(const Tensor& x, bool with_bias) const;
  void accumulate_weight_grad(const Tensor& x, const Tensor& gy, Tensor& gw) const;

  Conv3dSpec spec_;
  Tensor weight_;  // [out, in, k, k, k]
  Tensor bias_;    // [out]
};

// Code embedding, tanh and the first convolution fused into one layer.
// Mathematically identical to CodeEmbedding -> Tanh -> Conv3d, but the
// convolution is evaluated through a per-code lookup table, which is far
// cheaper for small code alphabets.
class CodeConv3d final : public Layer {
 public:
  CodeConv3d(int codes, int embed_dim, Conv3dSpec spec);

  std::string descriptor() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  std::vector<NamedParam> params() override;
  void init(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<CodeConv3d>(*this); }

  Tensor& table() { return table_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  // lut[code][offset][out] = sum_c W[out][c][offset] * tanh(table[code][c])
  std::vector<double> lookup() const;

  int codes_;
  int dim_;
  Conv3dSpec spec_;
  Tensor table_;   // [codes, dim]
  Tensor weight_;  // [out, dim, k, k, k]
  Tensor bias_;    // [out]
};

// Learned per-axis position rows: integer (X, Y, Z) [B, 3] -> [B, 3*dim].
class CoordinateEmbedding final : public Layer {
 public:
  CoordinateEmbedding(std::array<int, 3> extents, int dim);

  std::string descriptor() const override;
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x) const override;
  Tensor backward(const Tensor& x, const Tensor& y, const Tensor& gy, std::span<Tensor> grads) const override;
  std::vector<NamedParam> params() override;
  void init(Rng& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<CoordinateEmbedding>(*this); }

 private:
  std::array<int, 3> extents_;
  int dim_;
  std::array<Tensor, 3> tables_;
};

}  // namespace ccpt::nn
