#include "ccpt/nn/network.hpp"

#include <cmath>

namespace ccpt::nn {

Gradients zero_gradients(std::span<const NamedParam> params) {
  Gradients g;
  g.reserve(params.size());
  for (const NamedParam& p : params) g.push_back(p.value->zeros_like());
  return g;
}

void add_into(Gradients& acc, const Gradients& g, double scale) {
  if (acc.size() != g.size()) throw ShapeError("gradient sets differ in length");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += scale * g[i][j];
  }
}

void scale_gradients(Gradients& g, double scale) {
  for (Tensor& t : g) {
    for (double& v : t.data) v *= scale;
  }
}

double gradient_norm(const Gradients& g) {
  double s = 0.0;
  for (const Tensor& t : g) {
    for (double v : t.data) s += v * v;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------- Sequential

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Shape Sequential::output_shape(Shape in) const {
  for (const auto& l : layers_) in = l->output_shape(in);
  return in;
}

std::string Sequential::descriptor() const {
  std::string out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i) out += ">";
    out += layers_[i]->descriptor();
  }
  return out.empty() ? "identity" : out;
}

Tensor Sequential::forward(const Tensor& x, std::vector<Tensor>* acts) const {
  if (acts) {
    acts->clear();
    acts->reserve(layers_.size() + 1);
    acts->push_back(x);
    for (const auto& l : layers_) acts->push_back(l->forward(acts->back()));
    return acts->back();
  }
  Tensor cur = x;
  for (const auto& l : layers_) cur = l->forward(cur);
  return cur;
}

namespace {

std::size_t layer_param_count(Layer& l) { return l.params().size(); }

}  // namespace

Tensor Sequential::backward(const std::vector<Tensor>& acts, const Tensor& gy, std::span<Tensor> grads,
                            std::vector<Tensor>* layer_grads) const {
  if (acts.size() != layers_.size() + 1) throw ShapeError("sequential backward: activation cache size mismatch");
  std::vector<std::size_t> offsets(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) offsets[i + 1] = offsets[i] + layer_param_count(*layers_[i]);
  if (layer_grads) layer_grads->assign(layers_.size(), Tensor{});

  Tensor g = gy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (layer_grads) (*layer_grads)[i] = g;
    std::span<Tensor> lg = grads.subspan(offsets[i], offsets[i + 1] - offsets[i]);
    g = layers_[i]->backward(acts[i], acts[i + 1], g, lg);
    if (g.empty()) break;
  }
  return g;
}

Tensor Sequential::tangent(const std::vector<Tensor>& acts, const std::vector<Tensor>& layer_grads, const Tensor& s,
                           std::span<Tensor> grads) const {
  std::vector<std::size_t> offsets(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) offsets[i + 1] = offsets[i] + layer_param_count(*layers_[i]);
  Tensor cur = s;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = *layers_[i];
    if (!l.piecewise_linear()) throw ShapeError("second-order pass through non piecewise-linear layer " + l.descriptor());
    std::span<Tensor> lg = grads.subspan(offsets[i], offsets[i + 1] - offsets[i]);
    l.tangent_param_grads(layer_grads[i], cur, lg);
    cur = l.tangent(acts[i], cur);
  }
  return cur;
}

std::vector<NamedParam> Sequential::params(const std::string& prefix) {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (NamedParam p : layers_[i]->params()) {
      p.name = prefix + std::to_string(i) + "." + p.name;
      out.push_back(p);
    }
  }
  return out;
}

std::size_t Sequential::param_count() {
  std::size_t n = 0;
  for (auto& l : layers_) n += l->params().size();
  return n;
}

void Sequential::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

// ---------------------------------------------------------------- BranchNet

BranchNet::BranchNet(std::string descriptor, std::vector<Shape> input_shapes, std::vector<Sequential> branches,
                     Sequential trunk)
    : descriptor_(std::move(descriptor)),
      input_shapes_(std::move(input_shapes)),
      branches_(std::move(branches)),
      trunk_(std::move(trunk)) {
  if (input_shapes_.size() != branches_.size()) throw ShapeError("branch net: one input shape per branch required");
  std::size_t width = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) width += shape_size(branches_[i].output_shape(input_shapes_[i]));
  trunk_.output_shape({static_cast<int>(width)});
  offsets_ = param_offsets();
  for (const NamedParam& p : params()) param_shapes_.push_back(p.value->shape);
}

int BranchNet::output_width() const {
  std::size_t width = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) width += shape_size(branches_[i].output_shape(input_shapes_[i]));
  return static_cast<int>(shape_size(trunk_.output_shape({static_cast<int>(width)})));
}

Tensor BranchNet::forward(std::span<const Tensor> inputs, Cache* cache) const {
  if (inputs.size() != branches_.size()) {
    throw ShapeError(descriptor_ + ": expected " + std::to_string(branches_.size()) + " inputs");
  }
  const int batch = inputs.front().batch();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].batch() != batch || inputs[i].sample_shape() != input_shapes_[i]) {
      throw ShapeError(descriptor_ + ": input " + std::to_string(i) + " has shape " + shape_string(inputs[i].shape) +
                       ", expected batch x " + shape_string(input_shapes_[i]));
    }
  }
  std::vector<Tensor> outs(branches_.size());
  if (cache) {
    cache->generation = generation_;
    cache->batch = batch;
    cache->branch_acts.assign(branches_.size(), {});
    cache->branch_layer_grads.clear();
    cache->trunk_layer_grads.clear();
    cache->has_layer_grads = false;
  }
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    outs[i] = branches_[i].forward(inputs[i], cache ? &cache->branch_acts[i] : nullptr);
  }
  std::vector<const Tensor*> parts;
  for (const Tensor& t : outs) parts.push_back(&t);
  Tensor joined = concat_rows(parts);
  Tensor y = trunk_.forward(joined, cache ? &cache->trunk_acts : nullptr);
  y.check_finite(descriptor_ + " output");
  return y;
}

std::vector<std::size_t> BranchNet::param_offsets() {
  std::vector<std::size_t> offsets{0};
  for (auto& b : branches_) offsets.push_back(offsets.back() + b.param_count());
  offsets.push_back(offsets.back() + trunk_.param_count());
  return offsets;
}

Gradients BranchNet::backward_impl(const Cache& cache, const Tensor& gout, std::vector<Tensor>* input_grads,
                                   std::vector<std::vector<Tensor>>* branch_layer_grads,
                                   std::vector<Tensor>* trunk_layer_grads) const {
  if (cache.generation != generation_) {
    throw InvariantError(descriptor_ + ": stale cache (parameters changed since forward)");
  }
  if (cache.branch_acts.size() != branches_.size() || cache.trunk_acts.empty()) {
    throw InvariantError(descriptor_ + ": backward without a forward cache");
  }
  const std::vector<std::size_t>& offsets = offsets_;
  Gradients grads;
  for (const Shape& s : param_shapes_) grads.emplace_back(s);

  std::span<Tensor> all(grads);
  Tensor gjoined = trunk_.backward(cache.trunk_acts, gout, all.subspan(offsets[branches_.size()]), trunk_layer_grads);

  std::vector<Shape> widths;
  for (const auto& acts : cache.branch_acts) widths.push_back(acts.back().sample_shape());
  std::vector<Tensor> gparts = split_rows(gjoined, widths);
  if (input_grads) input_grads->assign(branches_.size(), Tensor{});
  if (branch_layer_grads) branch_layer_grads->assign(branches_.size(), {});
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    std::span<Tensor> bg = all.subspan(offsets[i], offsets[i + 1] - offsets[i]);
    Tensor gx = branches_[i].backward(cache.branch_acts[i], gparts[i], bg,
                                      branch_layer_grads ? &(*branch_layer_grads)[i] : nullptr);
    if (input_grads) (*input_grads)[i] = std::move(gx);
  }
  return grads;
}

Gradients BranchNet::backward(Cache& cache, const Tensor& gout, std::vector<Tensor>* input_grads,
                              bool keep_layer_grads) {
  if (keep_layer_grads) {
    cache.has_layer_grads = true;
    return backward_impl(cache, gout, input_grads, &cache.branch_layer_grads, &cache.trunk_layer_grads);
  }
  return backward_impl(cache, gout, input_grads, nullptr, nullptr);
}

Gradients BranchNet::backward(const Cache& cache, const Tensor& gout, std::vector<Tensor>* input_grads) const {
  return backward_impl(cache, gout, input_grads, nullptr, nullptr);
}

Gradients BranchNet::tangent_param_grads(const Cache& cache, std::span<const Tensor> seeds) {
  if (cache.generation != generation_) throw InvariantError(descriptor_ + ": stale cache");
  if (!cache.has_layer_grads) {
    throw InvariantError(descriptor_ + ": second-order pass needs backward(..., keep_layer_grads=true)");
  }
  std::vector<std::size_t> offsets = param_offsets();
  Gradients grads = zero_gradients(params());
  std::span<Tensor> all(grads);

  std::vector<Tensor> branch_out(branches_.size());
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Tensor& out = cache.branch_acts[i].back();
    Tensor seed = (i < seeds.size() && !seeds[i].empty()) ? seeds[i] : cache.branch_acts[i].front().zeros_like();
    std::span<Tensor> bg = all.subspan(offsets[i], offsets[i + 1] - offsets[i]);
    branch_out[i] = branches_[i].tangent(cache.branch_acts[i], cache.branch_layer_grads[i], seed, bg);
    if (branch_out[i].shape != out.shape) branch_out[i].shape = out.shape;
  }
  std::vector<const Tensor*> parts;
  for (const Tensor& t : branch_out) parts.push_back(&t);
  Tensor joined = concat_rows(parts);
  trunk_.tangent(cache.trunk_acts, cache.trunk_layer_grads, joined, all.subspan(offsets[branches_.size()]));
  return grads;
}

std::vector<NamedParam> BranchNet::params() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto p = branches_[i].params("branch" + std::to_string(i) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  auto t = trunk_.params("trunk.");
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::size_t BranchNet::param_count() { return params().size(); }

void BranchNet::init(Rng& rng) {
  for (auto& b : branches_) b.init(rng);
  trunk_.init(rng);
  touch();
}

}  // namespace ccpt::nn
