#include "ccpt/curiosity/curiosity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccpt/errors.hpp"
#include "ccpt/nn/layers.hpp"

namespace ccpt::curiosity {

void CuriosityConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("curiosity.lr must be positive");
  if (batch < 1) throw ConfigError("curiosity.batch must be at least 1");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("curiosity.max_grad_norm must be non-negative");
  if (!(norm_decay > 0.0 && norm_decay <= 1.0)) throw ConfigError("curiosity.norm_decay must be in (0, 1]");
}

RunningStd::RunningStd(double decay) : decay_(decay) {
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("running std decay must be in (0, 1]");
}

void RunningStd::update(std::span<const double> xs) {
  if (xs.empty()) return;
  count_ *= decay_;
  m2_ *= decay_;
  const double n = static_cast<double>(xs.size());
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0;
  for (double x : xs) m2 += (x - m) * (x - m);
  const double total = count_ + n;
  const double delta = m - mean_;
  mean_ += delta * n / total;
  m2_ += m2 + delta * delta * count_ * n / total;
  count_ = total;
}

double RunningStd::stddev() const { return std::sqrt(variance()); }

double RunningStd::normalize(double x) const {
  if (count_ < 2.0) return x;
  return x / (stddev() + 1e-8);
}

std::vector<nn::Tensor> features(std::span<const sim::AgentState> states, const encode::PEConfig& pe) {
  const int B = static_cast<int>(states.size());
  std::vector<nn::Tensor> out;
  out.emplace_back(nn::Shape{B, 3 * pe.d});
  out.emplace_back(nn::Shape{B, encode::kAgentInfoSize});
  for (int b = 0; b < B; ++b) {
    const auto p = encode::encode_position(states[b].pos, pe);
    std::copy(p.begin(), p.end(), out[0].row(b));
    const auto info = encode::agent_info(states[b]);
    std::copy(info.begin(), info.end(), out[1].row(b));
  }
  return out;
}

namespace {

nn::BranchNet build_rnd(const std::string& role, const policy::ArchProfile& p, const encode::PEConfig& pe) {
  const int w = p.branch_width;
  std::vector<nn::Sequential> branches(2);
  branches[0].add<nn::Dense>(3 * pe.d, w);
  branches[0].add<nn::Relu>();
  branches[1].add<nn::Dense>(encode::kAgentInfoSize, w);
  branches[1].add<nn::Relu>();
  branches[1].add<nn::Dense>(w, w);
  branches[1].add<nn::Relu>();
  nn::Sequential trunk;
  policy::add_mlp(trunk, 2 * w, p.rnd_trunk, p.rnd_output);
  return nn::BranchNet("rnd-" + role + "/" + p.name, {{3 * pe.d}, {encode::kAgentInfoSize}}, std::move(branches),
                       std::move(trunk));
}

}  // namespace

RNDPair::RNDPair(const policy::ArchProfile& profile, std::uint64_t seed, CuriosityConfig cfg, encode::PEConfig pe)
    : cfg_(cfg),
      pe_(pe),
      target_(build_rnd("target", profile, pe)),
      predictor_(build_rnd("predictor", profile, pe)),
      opt_({cfg.lr, 0.9, 0.999, 1e-8, cfg.max_grad_norm}) {
  cfg_.validate();
  pe_.validate();
  Rng rng(seed);
  target_.init(rng);
  predictor_.init(rng);
  target_hash_ = nn::param_hash(target_.params());
}

std::vector<double> RNDPair::rewards(std::span<const sim::AgentState> states) const {
  if (states.empty()) return {};
  const auto in = features(states, pe_);
  const nn::Tensor t = target_.forward(in);
  const nn::Tensor p = predictor_.forward(in);
  const std::size_t k = t.row_size();
  std::vector<double> out(states.size(), 0.0);
  for (std::size_t b = 0; b < states.size(); ++b) {
    const double* tr = t.row(static_cast<int>(b));
    const double* pr = p.row(static_cast<int>(b));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (tr[j] - pr[j]) * (tr[j] - pr[j]);
    out[b] = s / static_cast<double>(k);
  }
  return out;
}

double RNDPair::reward(const sim::AgentState& s) const { return rewards({&s, 1})[0]; }

RNDPair::PredictorLoss RNDPair::predictor_loss(std::span<const sim::AgentState> states) {
  if (states.empty()) throw InvariantError("predictor update needs at least one state");
  const auto in = features(states, pe_);
  const nn::Tensor t = target_.forward(in);
  nn::BranchNet::Cache cache;
  const nn::Tensor p = predictor_.forward(in, &cache);
  const double n = static_cast<double>(p.size());
  nn::Tensor gout(p.shape);
  PredictorLoss r;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - t[i];
    r.loss += e * e / n;
    gout[i] = 2.0 * e / n;
  }
  if (!std::isfinite(r.loss)) throw NumericError("non-finite predictor loss");
  r.grads = predictor_.backward(cache, gout);
  return r;
}

double RNDPair::train_step(std::span<const sim::AgentState> states) {
  const PredictorLoss r = predictor_loss(states);
  opt_.step(predictor_.params(), r.grads);
  predictor_.touch();
  return r.loss;
}

double RNDPair::train(std::span<const sim::AgentState> states, Rng& rng) {
  if (states.empty()) return 0.0;
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  double total = 0.0;
  int batches = 0;
  std::vector<sim::AgentState> mb;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg_.batch)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg_.batch));
    mb.clear();
    for (std::size_t i = start; i < end; ++i) mb.push_back(states[order[i]]);
    total += train_step(mb);
    ++batches;
  }
  if (nn::param_hash(target_.params()) != target_hash_) throw InvariantError("RND target parameters changed");
  return total / batches;
}

std::uint64_t RNDPair::target_hash() { return nn::param_hash(target_.params()); }

void RNDPair::copy_target_into_predictor() {
  auto t = target_.params();
  auto p = predictor_.params();
  for (std::size_t i = 0; i < t.size(); ++i) *p[i].value = *t[i].value;
  predictor_.touch();
}

void RNDPair::save(const std::string& target_path, const std::string& predictor_path) {
  nn::save_params(target_path, target_.descriptor(), target_.params());
  nn::save_params(predictor_path, predictor_.descriptor(), predictor_.params());
}

void RNDPair::load(const std::string& target_path, const std::string& predictor_path) {
  nn::load_params(target_path, target_.descriptor(), target_.params());
  nn::load_params(predictor_path, predictor_.descriptor(), predictor_.params());
  target_.touch();
  predictor_.touch();
  target_hash_ = nn::param_hash(target_.params());
}

}  // namespace ccpt::curiosity
