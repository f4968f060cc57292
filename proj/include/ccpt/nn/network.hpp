#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccpt/nn/layers.hpp"

namespace ccpt::nn {

// Gradients aligned with a network's params().
using Gradients = std::vector<Tensor>;

Gradients zero_gradients(std::span<const NamedParam> params);
void add_into(Gradients& acc, const Gradients& g, double scale = 1.0);
void scale_gradients(Gradients& g, double scale);
double gradient_norm(const Gradients& g);

// Ordered stack of layers. An empty stack is the identity.
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <class L, class... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  Shape output_shape(Shape in) const;
  std::string descriptor() const;

  // acts receives layer inputs followed by the final output (size()+1 entries).
  Tensor forward(const Tensor& x, std::vector<Tensor>* acts) const;
  // `grads` spans this stack's parameters. When layer_grads is given it
  // receives the gradient at each layer output (size() entries).
  Tensor backward(const std::vector<Tensor>& acts, const Tensor& gy, std::span<Tensor> grads,
                  std::vector<Tensor>* layer_grads = nullptr) const;
  // Pushes an input tangent through the stack, accumulating the parameter
  // derivative of <s, input-gradient>. Needs layer_grads from backward().
  Tensor tangent(const std::vector<Tensor>& acts, const std::vector<Tensor>& layer_grads, const Tensor& s,
                 std::span<Tensor> grads) const;

  std::vector<NamedParam> params(const std::string& prefix);
  std::size_t param_count();
  void init(Rng& rng);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Several input branches whose flattened outputs are concatenated and fed to
// a trunk. A branch with no layers passes its input through unchanged, which
// is how scalar side inputs (the exploration weight) join the trunk.
class BranchNet {
 public:
  struct Cache {
    std::uint64_t generation = 0;
    int batch = 0;
    std::vector<std::vector<Tensor>> branch_acts;
    std::vector<Tensor> trunk_acts;
    // Filled by backward() when second-order passes are requested.
    std::vector<std::vector<Tensor>> branch_layer_grads;
    std::vector<Tensor> trunk_layer_grads;
    bool has_layer_grads = false;
  };

  BranchNet() = default;
  BranchNet(std::string descriptor, std::vector<Shape> input_shapes, std::vector<Sequential> branches,
            Sequential trunk);

  const std::string& descriptor() const { return descriptor_; }
  std::size_t input_count() const { return branches_.size(); }
  const std::vector<Shape>& input_shapes() const { return input_shapes_; }
  int output_width() const;

  Tensor forward(std::span<const Tensor> inputs, Cache* cache = nullptr) const;
  // Parameter gradients for an output gradient. input_grads, when given,
  // receives one entry per input (empty for categorical inputs). With
  // keep_layer_grads the cache is extended for tangent_param_grads().
  Gradients backward(Cache& cache, const Tensor& gout, std::vector<Tensor>* input_grads = nullptr,
                     bool keep_layer_grads = false);
  Gradients backward(const Cache& cache, const Tensor& gout, std::vector<Tensor>* input_grads = nullptr) const;
  // Parameter derivative of sum_inputs <seed_i, dOut/dInput_i> for a
  // piecewise-linear network, given a cache whose backward() kept layer
  // gradients. Empty seeds are treated as zero.
  Gradients tangent_param_grads(const Cache& cache, std::span<const Tensor> seeds);

  std::vector<NamedParam> params();
  std::size_t param_count();
  void init(Rng& rng);

  // Bumped by every parameter write; caches from older generations are stale.
  std::uint64_t generation() const { return generation_; }
  void touch() { ++generation_; }

 private:
  Gradients backward_impl(const Cache& cache, const Tensor& gout, std::vector<Tensor>* input_grads,
                          std::vector<std::vector<Tensor>>* branch_layer_grads,
                          std::vector<Tensor>* trunk_layer_grads) const;
  std::vector<std::size_t> param_offsets();

  std::string descriptor_;
  std::vector<Shape> input_shapes_;
  std::vector<Sequential> branches_;
  Sequential trunk_;
  std::vector<std::size_t> offsets_;
  std::vector<Shape> param_shapes_;
  std::uint64_t generation_ = 0;
};

}  // namespace ccpt::nn
