#include "ccpt/imitation/imitation.hpp"

#include <algorithm>
#include <cmath>

#include "ccpt/encode/encode.hpp"
#include "ccpt/errors.hpp"
#include "ccpt/nn/layers.hpp"

namespace ccpt::imitation {

Sample make_sample(const sim::VoxelMap& map, const sim::AgentState& s, long tick, sim::Action a, int L) {
  return Sample{encode::local_occupancy(map, s, L, tick), static_cast<int>(a)};
}

Demo record_demo(const sim::VoxelMap& map, const sim::DemoScript& script) {
  if (script.map_name != map.name()) {
    throw ConfigError("demo is for map '" + script.map_name + "' but the loaded map is '" + map.name() + "'");
  }
  if (script.actions.empty()) throw InvariantError("demo has no actions");
  const int len = std::max<int>(sim::kDeskEpisodeLength, static_cast<int>(script.actions.size()));
  Demo d{script, sim::play_script(map, script.actions, len)};
  if (!d.trajectory.reached_goal) {
    throw InvariantError("demo replay on map '" + map.name() + "' does not reach goal " +
                         std::to_string(script.goal_id));
  }
  const sim::AgentState& last = d.trajectory.states[static_cast<std::size_t>(d.trajectory.first_goal_step)];
  if (map.active_goal_at(last.pos) != script.goal_id) {
    throw InvariantError("demo replay reaches a goal other than " + std::to_string(script.goal_id));
  }
  return d;
}

std::vector<Demo> load_demos(const sim::VoxelMap& map, std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw ConfigError("at least one demonstration is required");
  std::vector<Demo> out;
  for (const auto& p : paths) {
    try {
      out.push_back(record_demo(map, sim::load_demo_file(p)));
    } catch (const ConfigError& e) {
      throw ConfigError(p.string() + ": " + e.what());
    } catch (const InvariantError& e) {
      throw InvariantError(p.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sample> expert_samples(const sim::VoxelMap& map, std::span<const Demo> demos, int L) {
  std::vector<Sample> out;
  for (const Demo& d : demos) {
    const auto& tr = d.trajectory;
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      out.push_back(make_sample(map, tr.states[t], static_cast<long>(t), tr.actions[t], L));
    }
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::add(Sample s) {
  std::lock_guard<std::mutex> lock(mu_);
  if (items_.size() < capacity_) {
    items_.push_back(std::move(s));
  } else {
    items_[next_] = std::move(s);
  }
  next_ = (next_ + 1) % capacity_;
  ++added_;
}

std::vector<const Sample*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw InvariantError("cannot sample from an empty replay buffer");
  std::vector<const Sample*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[rng.index(items_.size())]);
  return out;
}

void ImitationConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("imitation.lr must be positive");
  if (batch < 1) throw ConfigError("imitation.batch must be at least 1");
  if (!(gp_coef >= 0.0)) throw ConfigError("imitation.gp_coef must be non-negative");
  if (replay_capacity < 1) throw ConfigError("imitation.replay_capacity must be positive");
  if (updates_per_iteration < 0) throw ConfigError("imitation.updates_per_iteration must be non-negative");
}

Discriminator::Discriminator(const policy::ArchProfile& profile, int L) : L_(L) {
  policy::ArchProfile p = profile;
  p.occupancy = L;
  p.validate();
  descriptor_ = "discriminator/" + p.name + "/L" + std::to_string(L);
  stem_.add<nn::CodeEmbedding>(policy::kOccupancyCodes, p.code_embedding);
  stem_.add<nn::Tanh>();

  std::vector<nn::Sequential> branches(2);
  policy::add_conv_stack(branches[0], p, false);
  branches[1].add<nn::Dense>(sim::kActionCount, p.branch_width);
  branches[1].add<nn::Relu>();
  nn::Sequential trunk;
  policy::add_mlp(trunk, p.conv_output_size(L) + p.branch_width, p.trunk, 1);
  body_ = nn::BranchNet(descriptor_, {{p.code_embedding, L, L, L}, {sim::kActionCount}}, std::move(branches),
                        std::move(trunk));
}

nn::Tensor Discriminator::embed(std::span<const Sample* const> batch) const {
  const int B = static_cast<int>(batch.size());
  nn::Tensor codes({B, L_, L_, L_});
  const std::size_t cells = codes.row_size();
  for (int b = 0; b < B; ++b) {
    if (batch[b]->occupancy.size() != cells) throw ShapeError("discriminator sample has the wrong occupancy size");
    std::copy(batch[b]->occupancy.begin(), batch[b]->occupancy.end(), codes.row(b));
  }
  return stem_.forward(codes, nullptr);
}

nn::Tensor Discriminator::one_hot(std::span<const Sample* const> batch) {
  nn::Tensor t({static_cast<int>(batch.size()), sim::kActionCount});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int a = batch[b]->action;
    if (a < 0 || a >= sim::kActionCount) throw ShapeError("action index out of range");
    t.row(static_cast<int>(b))[a] = 1.0;
  }
  return t;
}

std::vector<double> Discriminator::forward(std::span<const Sample* const> batch) const {
  if (batch.empty()) return {};
  const nn::Tensor in[] = {embed(batch), one_hot(batch)};
  const nn::Tensor out = body_.forward(in);
  return out.data;
}

double Discriminator::forward(const Sample& s) const {
  const Sample* p[] = {&s};
  return forward(p)[0];
}

Discriminator::InputGradients Discriminator::input_gradients(std::span<const Sample* const> batch) {
  const nn::Tensor in[] = {embed(batch), one_hot(batch)};
  nn::BranchNet::Cache cache;
  const nn::Tensor out = body_.forward(in, &cache);
  std::vector<nn::Tensor> g;
  body_.backward(cache, nn::Tensor(out.shape, 1.0), &g);
  return {g[0], g[1]};
}

LossResult Discriminator::loss(std::span<const Sample* const> expert, std::span<const Sample* const> policy,
                               double gp_coef) {
  if (expert.empty() || policy.empty()) throw InvariantError("discriminator batches must be non-empty");
  const int ne = static_cast<int>(expert.size());
  const int np = static_cast<int>(policy.size());
  const auto stem_params = stem_.params("stem.");
  const auto body_params = body_.params();
  std::vector<nn::NamedParam> all = stem_params;
  all.insert(all.end(), body_params.begin(), body_params.end());
  LossResult r;
  r.grads = nn::zero_gradients(all);
  const std::span<nn::Tensor> stem_grads(r.grads.data(), stem_params.size());
  const std::span<nn::Tensor> body_grads(r.grads.data() + stem_params.size(), body_params.size());

  // Adversarial term over the concatenated batch.
  std::vector<const Sample*> both(expert.begin(), expert.end());
  both.insert(both.end(), policy.begin(), policy.end());
  nn::Tensor codes({ne + np, L_, L_, L_});
  for (int b = 0; b < ne + np; ++b) {
    if (both[b]->occupancy.size() != codes.row_size()) throw ShapeError("discriminator sample has the wrong occupancy size");
    std::copy(both[b]->occupancy.begin(), both[b]->occupancy.end(), codes.row(b));
  }
  std::vector<nn::Tensor> stem_acts;
  const nn::Tensor embedded = stem_.forward(codes, &stem_acts);
  const nn::Tensor in[] = {embedded, one_hot(both)};
  nn::BranchNet::Cache cache;
  const nn::Tensor d = body_.forward(in, &cache);
  nn::Tensor gout(d.shape);
  for (int b = 0; b < ne + np; ++b) {
    if (b < ne) {
      const double e = d[b] - 1.0;
      r.adversarial += e * e / ne;
      r.expert_mean += d[b] / ne;
      gout[b] = 2.0 * e / ne;
    } else {
      const double e = d[b] + 1.0;
      r.adversarial += e * e / np;
      r.policy_mean += d[b] / np;
      gout[b] = 2.0 * e / np;
    }
  }
  std::vector<nn::Tensor> in_grads;
  {
    const nn::Gradients g = body_.backward(cache, gout, &in_grads);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t k = 0; k < g[i].size(); ++k) body_grads[i][k] += g[i][k];
    }
    stem_.backward(stem_acts, in_grads[0], stem_grads);
  }

  // Gradient penalty on expert samples at the embedded inputs. The body is
  // piecewise linear, so the penalty does not depend on the embedding table.
  if (gp_coef > 0.0) {
    const nn::Tensor ein[] = {nn::slice_batch(embedded, 0, ne), nn::slice_batch(in[1], 0, ne)};
    nn::BranchNet::Cache ecache;
    const nn::Tensor de = body_.forward(ein, &ecache);
    std::vector<nn::Tensor> eg;
    body_.backward(ecache, nn::Tensor(de.shape, 1.0), &eg, true);
    double sq = 0.0;
    for (const nn::Tensor& t : eg) {
      for (double v : t.data) sq += v * v;
    }
    r.penalty = gp_coef * sq / ne;
    std::vector<nn::Tensor> seeds = eg;
    for (nn::Tensor& t : seeds) {
      for (double& v : t.data) v *= 2.0 * gp_coef / ne;
    }
    const nn::Gradients g = body_.tangent_param_grads(ecache, seeds);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (std::size_t k = 0; k < g[i].size(); ++k) body_grads[i][k] += g[i][k];
    }
  }
  if (!std::isfinite(r.total())) throw NumericError("non-finite discriminator loss");
  return r;
}

std::vector<nn::NamedParam> Discriminator::params() {
  std::vector<nn::NamedParam> out = stem_.params("stem.");
  const auto b = body_.params();
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void Discriminator::init(Rng& rng) {
  stem_.init(rng);
  body_.init(rng);
}

double imitation_reward(double d) { return std::max(0.0, 1.0 - 0.25 * (d - 1.0) * (d - 1.0)); }

ImitationTrainer::ImitationTrainer(Discriminator& disc, ImitationConfig cfg)
    : disc_(&disc), cfg_(cfg), opt_({cfg.lr, 0.9, 0.999, 1e-8, cfg.max_grad_norm}) {
  cfg_.validate();
}

LossResult ImitationTrainer::update(std::span<const Sample> expert, const ReplayBuffer& replay, Rng& rng) {
  if (expert.empty()) throw InvariantError("no expert samples");
  std::vector<const Sample*> eb;
  for (int i = 0; i < cfg_.batch; ++i) eb.push_back(&expert[rng.index(expert.size())]);
  const std::vector<const Sample*> pb = replay.sample(static_cast<std::size_t>(cfg_.batch), rng);
  LossResult r = disc_->loss(eb, pb, cfg_.gp_coef);
  opt_.step(disc_->params(), r.grads);
  disc_->touch();
  return r;
}

}  // namespace ccpt::imitation
