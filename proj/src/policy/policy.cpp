#include "ccpt/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccpt/errors.hpp"
#include "ccpt/nn/softmax.hpp"

namespace ccpt::policy {

namespace {

std::string net_descriptor(const std::string& role, const PolicySpec& spec) {
  return role + "/" + spec.profile.name + "/" + std::string(encode::position_mode_name(spec.obs.position)) + "/" +
         std::string(encode::local_mode_name(spec.obs.local)) + "/L" + std::to_string(spec.obs.occupancy);
}

nn::BranchNet build_net(const std::string& role, const PolicySpec& spec, int outputs, double out_gain) {
  const ArchProfile& p = spec.profile;
  const int w = p.branch_width;
  std::vector<nn::Shape> shapes;
  std::vector<nn::Sequential> branches;

  nn::Sequential pos;
  switch (spec.obs.position) {
    case encode::PositionMode::Sinusoidal:
      pos.add<nn::Dense>(3 * spec.obs.pe.d, w);
      shapes.push_back({3 * spec.obs.pe.d});
      break;
    case encode::PositionMode::Normalized:
      pos.add<nn::Dense>(3, w);
      shapes.push_back({3});
      break;
    case encode::PositionMode::Learned:
      pos.add<nn::CoordinateEmbedding>(std::array<int, 3>{spec.map_dims.x, spec.map_dims.y, spec.map_dims.z},
                                       spec.obs.pe.d);
      pos.add<nn::Dense>(3 * spec.obs.pe.d, w);
      shapes.push_back({3});
      break;
  }
  pos.add<nn::Relu>();
  branches.push_back(std::move(pos));

  nn::Sequential info;
  info.add<nn::Dense>(encode::kAgentInfoSize, w);
  info.add<nn::Relu>();
  info.add<nn::Dense>(w, w);
  info.add<nn::Relu>();
  shapes.push_back({encode::kAgentInfoSize});
  branches.push_back(std::move(info));

  int local_width = 0;
  if (spec.obs.local == encode::LocalMode::Occupancy) {
    nn::Sequential conv;
    ArchProfile cp = p;
    cp.occupancy = spec.obs.occupancy;
    cp.validate();
    add_conv_stack(conv, cp, true);
    const int L = spec.obs.occupancy;
    shapes.push_back({L, L, L});
    local_width = cp.conv_output_size(L);
    branches.push_back(std::move(conv));
  } else if (spec.obs.local == encode::LocalMode::Raycast) {
    nn::Sequential rays;
    rays.add<nn::Dense>(encode::kRaycastSize, w);
    rays.add<nn::Relu>();
    shapes.push_back({encode::kRaycastSize});
    local_width = w;
    branches.push_back(std::move(rays));
  }

  shapes.push_back({1});
  branches.emplace_back();  // alpha joins the trunk unchanged

  nn::Sequential trunk;
  add_mlp(trunk, 2 * w + local_width + 1, p.trunk, outputs, out_gain);
  return nn::BranchNet(net_descriptor(role, spec), std::move(shapes), std::move(branches), std::move(trunk));
}

}  // namespace

encode::ObservationConfig observation_config(const ArchProfile& profile, encode::PositionMode position,
                                             encode::LocalMode local) {
  encode::ObservationConfig cfg;
  cfg.occupancy = profile.occupancy;
  cfg.position = position;
  cfg.local = local;
  return cfg;
}

// Small output gain keeps the initial policy close to uniform.
nn::BranchNet build_actor(const PolicySpec& spec) { return build_net("actor", spec, sim::kActionCount, 0.01); }

nn::BranchNet build_critic(const PolicySpec& spec) { return build_net("critic", spec, 1, 0.1); }

std::vector<nn::Tensor> batch_inputs(std::span<const encode::Observation> obs, const PolicySpec& spec) {
  const int B = static_cast<int>(obs.size());
  const int pw = encode::position_width(spec.obs.position, spec.obs.pe);
  std::vector<nn::Tensor> out;
  out.emplace_back(nn::Shape{B, pw});
  out.emplace_back(nn::Shape{B, encode::kAgentInfoSize});
  const bool has_local = spec.obs.local != encode::LocalMode::None;
  if (spec.obs.local == encode::LocalMode::Occupancy) {
    const int L = spec.obs.occupancy;
    out.emplace_back(nn::Shape{B, L, L, L});
  } else if (spec.obs.local == encode::LocalMode::Raycast) {
    out.emplace_back(nn::Shape{B, encode::kRaycastSize});
  }
  out.emplace_back(nn::Shape{B, 1});
  for (int b = 0; b < B; ++b) {
    const encode::Observation& o = obs[b];
    if (static_cast<int>(o.position.size()) != pw) throw ShapeError("observation position width mismatch");
    std::copy(o.position.begin(), o.position.end(), out[0].row(b));
    std::copy(o.info.begin(), o.info.end(), out[1].row(b));
    if (has_local) {
      if (o.local.size() != out[2].row_size()) throw ShapeError("observation local width mismatch");
      std::copy(o.local.begin(), o.local.end(), out[2].row(b));
    }
    out.back().row(b)[0] = o.alpha;
  }
  return out;
}

std::vector<double> action_probs(const nn::BranchNet& actor, std::span<const nn::Tensor> inputs, int row) {
  std::vector<nn::Tensor> one;
  for (const nn::Tensor& t : inputs) one.push_back(nn::slice_batch(t, row, 1));
  const nn::Tensor logits = actor.forward(one);
  return nn::softmax({logits.row(0), logits.row_size()});
}

std::vector<ActResult> act(const nn::BranchNet& actor, const nn::BranchNet& critic, std::span<const nn::Tensor> inputs,
                           std::span<Rng* const> rngs, bool greedy) {
  const nn::Tensor logits = actor.forward(inputs);
  const nn::Tensor values = critic.forward(inputs);
  const int B = logits.batch();
  if (!greedy && static_cast<int>(rngs.size()) != B) throw ShapeError("act needs one rng per row");
  std::vector<ActResult> out(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const std::span<const double> row(logits.row(b), logits.row_size());
    ActResult& r = out[b];
    r.probs = nn::softmax(row);
    if (greedy) {
      r.action = static_cast<int>(std::max_element(r.probs.begin(), r.probs.end()) - r.probs.begin());
    } else {
      r.action = static_cast<int>(rngs[b]->categorical(r.probs));
    }
    r.log_prob = nn::log_softmax(row)[r.action];
    r.value = values.row(b)[0];
  }
  return out;
}

void PPOConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("ppo.lr must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must lie in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("ppo.lambda must lie in [0, 1]");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip must lie in (0, 1)");
  if (epochs < 1) throw ConfigError("ppo.epochs must be at least 1");
  if (minibatch < 1) throw ConfigError("ppo.minibatch must be at least 1");
  if (!(entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef must be non-negative");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const char> episode_end, std::span<const double> bootstrap, double gamma,
                      double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || episode_end.size() != n || bootstrap.size() != n) {
    throw ShapeError("compute_gae inputs must have equal length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const bool last = episode_end[k] != 0 || k + 1 == n;
    const double next_value = last ? bootstrap[k] : values[k + 1];
    const double delta = rewards[k] + gamma * next_value - values[k];
    running = delta + (last ? 0.0 : gamma * lambda * running);
    out.advantages[k] = running;
    out.returns[k] = running + values[k];
  }
  return out;
}

SurrogateResult surrogate_loss(nn::BranchNet& actor, std::span<const nn::Tensor> inputs, std::span<const int> actions,
                               std::span<const double> old_log_probs, std::span<const double> advantages,
                               const PPOConfig& cfg) {
  nn::BranchNet::Cache cache;
  const nn::Tensor logits = actor.forward(inputs, &cache);
  const int n = logits.batch();
  const int A = static_cast<int>(logits.row_size());
  nn::Tensor gout(logits.shape);
  SurrogateResult r;
  for (int b = 0; b < n; ++b) {
    const std::span<const double> row(logits.row(b), static_cast<std::size_t>(A));
    const auto p = nn::softmax(row);
    const auto logp = nn::log_softmax(row);
    const int a = actions[b];
    const double ratio = std::exp(logp[a] - old_log_probs[b]);
    const double adv = advantages[b];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
    r.policy_loss -= std::min(unclipped, clipped) / n;
    const bool clip_active = (adv > 0.0 && ratio > 1.0 + cfg.clip) || (adv < 0.0 && ratio < 1.0 - cfg.clip);
    if (clip_active) r.clip_fraction += 1.0 / n;
    r.approx_kl += (old_log_probs[b] - logp[a]) / n;
    double h = 0.0;
    for (int j = 0; j < A; ++j) h -= p[j] * logp[j];
    r.entropy += h / n;
    double* g = gout.row(b);
    // d(-ratio*A)/dlogit_j = -ratio*A*(1[j=a] - p_j) when the clip is inactive.
    const double coef = clip_active ? 0.0 : -unclipped;
    for (int j = 0; j < A; ++j) {
      g[j] = coef * ((j == a ? 1.0 : 0.0) - p[j]) / n;
      // d(-c*H)/dlogit_j = c * p_j * (log p_j + H)
      g[j] += cfg.entropy_coef * p[j] * (logp[j] + h) / n;
    }
  }
  if (!std::isfinite(r.policy_loss) || !std::isfinite(r.entropy)) throw NumericError("non-finite PPO policy loss");
  r.grads = actor.backward(cache, gout);
  return r;
}

ValueResult value_loss(nn::BranchNet& critic, std::span<const nn::Tensor> inputs, std::span<const double> returns) {
  nn::BranchNet::Cache cache;
  const nn::Tensor v = critic.forward(inputs, &cache);
  const int n = v.batch();
  nn::Tensor gout(v.shape);
  ValueResult r;
  for (int b = 0; b < n; ++b) {
    const double err = v[b] - returns[b];
    r.loss += 0.5 * err * err / n;
    gout[b] = err / n;
  }
  if (!std::isfinite(r.loss)) throw NumericError("non-finite value loss");
  r.grads = critic.backward(cache, gout);
  return r;
}

PPOLearner::PPOLearner(PPOConfig cfg)
    : cfg_(cfg),
      actor_opt_({cfg.lr, 0.9, 0.999, 1e-8, cfg.max_grad_norm}),
      critic_opt_({cfg.lr, 0.9, 0.999, 1e-8, cfg.max_grad_norm}) {
  cfg_.validate();
}

PPOStats PPOLearner::update(nn::BranchNet& actor, nn::BranchNet& critic, RolloutBatch& batch, Rng& rng) {
  const int n = batch.size();
  PPOStats stats;
  if (n == 0) return stats;
  if (static_cast<int>(batch.advantages.size()) != n) {
    GaeResult gae = compute_gae(batch.rewards, batch.values, batch.episode_end, batch.bootstrap, cfg_.gamma, cfg_.lambda);
    batch.advantages = std::move(gae.advantages);
    batch.returns = std::move(gae.returns);
  }
  std::vector<double> adv = batch.advantages;
  if (cfg_.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const auto actor_params = actor.params();
  const auto critic_params = critic.params();
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(static_cast<std::size_t>(i) + 1)]);
    for (int start = 0; start < n; start += cfg_.minibatch) {
      const int count = std::min(cfg_.minibatch, n - start);
      const std::span<const int> rows(order.data() + start, static_cast<std::size_t>(count));
      std::vector<nn::Tensor> mb;
      for (const nn::Tensor& t : batch.inputs) mb.push_back(nn::gather_batch(t, rows));
      std::vector<int> actions;
      std::vector<double> old_lp, mb_adv, mb_ret;
      for (int r : rows) {
        actions.push_back(batch.actions[r]);
        old_lp.push_back(batch.log_probs[r]);
        mb_adv.push_back(adv[r]);
        mb_ret.push_back(batch.returns[r]);
      }
      SurrogateResult s = surrogate_loss(actor, mb, actions, old_lp, mb_adv, cfg_);
      ValueResult v = value_loss(critic, mb, mb_ret);
      actor_opt_.step(actor_params, s.grads);
      actor.touch();
      critic_opt_.step(critic_params, v.grads);
      critic.touch();
      stats.policy_loss += s.policy_loss;
      stats.value_loss += v.loss;
      stats.entropy += s.entropy;
      stats.approx_kl += s.approx_kl;
      stats.clip_fraction += s.clip_fraction;
      ++stats.minibatches;
    }
  }
  const double k = stats.minibatches;
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.approx_kl /= k;
  stats.clip_fraction /= k;
  return stats;
}

}  // namespace ccpt::policy
