// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "bfs_oracle.hpp"
#include "ccpt/cli/app.hpp"
#include "ccpt/cli/experiments.hpp"
#include "ccpt/encode/encode.hpp"
#include "ccpt/errors.hpp"
#include "ccpt/imitation/imitation.hpp"
#include "ccpt/nn/softmax.hpp"
#include "ccpt/policy/policy.hpp"
#include "ccpt/sim/map_io.hpp"
#include "ccpt/trainer/trainer.hpp"
#include "ccpt/triage/triage.hpp"
#include "gradcheck.hpp"

using namespace ccpt;
namespace fs = std::filesystem;
using oracle::check_gradient;
using oracle::Evaluation;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr int kGradProbes = 100;
constexpr double kGradBudgetSec = 120.0;
constexpr double kFormulaTol = 1e-12;
constexpr double kRndBudgetSec = 300.0;
constexpr double kAmpAccuracy = 0.9;
constexpr int kAmpUpdates = 500;
constexpr double kPpoGoalRate = 0.9;
constexpr long kPpoStepBudget = 200000;
constexpr double kPpoBudgetSec = 900.0;
constexpr int kPpoEvalEpisodes = 50;
constexpr double kEndToEndBudgetSec = 7200.0;

std::string data_path(const std::string& rel) { return std::string(CCPT_DATA_DIR) + "/" + rel; }
std::string config_path(const std::string& name) { return std::string(CCPT_CONFIG_DIR) + "/" + name; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

sim::AgentState at(int x, int y, int z) {
  sim::AgentState s;
  s.pos = {x, y, z};
  return s;
}

nn::Tensor random_tensor(nn::Shape s, Rng& rng) {
  nn::Tensor t(std::move(s));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

nn::Tensor random_codes(nn::Shape s, Rng& rng, int codes) {
  nn::Tensor t(std::move(s));
  for (double& v : t.data) v = static_cast<double>(rng.index(static_cast<std::size_t>(codes)));
  return t;
}

std::vector<imitation::Sample> random_rollouts(const sim::VoxelMap& map, int episodes, int length, Rng& rng, int L) {
  std::vector<imitation::Sample> out;
  for (int e = 0; e < episodes; ++e) {
    sim::AgentState s = sim::reset(map);
    for (int t = 0; t < length; ++t) {
      const auto a = static_cast<sim::Action>(rng.index(sim::kActionCount));
      out.push_back(imitation::make_sample(map, s, t, a, L));
      s = sim::step(map, s, a, t, length).state;
    }
  }
  return out;
}

std::vector<const imitation::Sample*> pointers(const std::vector<imitation::Sample>& v) {
  std::vector<const imitation::Sample*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

// ---------------------------------------------------------------- 1

struct GradTally {
  int checks = 0;
  int min_probes = 1 << 30;
  double worst = 0.0;
  std::string worst_name;
  std::vector<std::string> failures;

  void add(const std::string& name, const oracle::GradCheckResult& r) {
    ++checks;
    min_probes = std::min(min_probes, r.probes);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = name;
    }
    if (r.probes < kGradProbes || !(r.max_rel_error < kGradTol)) {
      failures.push_back(name + fmt(" (probes %d, err %.2e)", r.probes, r.max_rel_error));
    }
  }
};

// Parameter and (optionally) input gradients of <w, net(x)> for a one-branch net.
void check_layer_net(GradTally& tally, const std::string& name, nn::Sequential stack, nn::Shape in_shape,
                     nn::Tensor input, bool check_input, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<nn::Sequential> branches;
  branches.push_back(std::move(stack));
  nn::BranchNet net(name, {std::move(in_shape)}, std::move(branches), nn::Sequential{});
  net.init(rng);
  std::vector<nn::Tensor> inputs{std::move(input)};
  nn::BranchNet::Cache cache;
  const nn::Tensor y = net.forward(inputs, &cache);
  const nn::Tensor w = oracle::random_like(y, rng);
  std::vector<nn::Tensor> input_grads;
  const nn::Gradients grads = net.backward(cache, w, &input_grads);
  auto evaluate = [&] {
    nn::BranchNet::Cache c;
    const nn::Tensor out = net.forward(inputs, &c);
    return Evaluation{oracle::dot(out, w), oracle::sign_signature(c)};
  };
  std::vector<nn::Tensor*> values;
  for (const auto& p : net.params()) values.push_back(p.value);
  tally.add(name + " params", check_gradient(values, grads, evaluate, kGradProbes, rng));
  if (check_input) {
    std::vector<nn::Tensor*> in{&inputs[0]};
    const std::vector<nn::Tensor> gin{input_grads[0]};
    tally.add(name + " inputs", check_gradient(in, gin, evaluate, kGradProbes, rng));
  }
}

// PPO objective straight from logits.
double ppo_objective(const nn::Tensor& logits, std::span<const int> actions, std::span<const double> old_lp,
                     std::span<const double> adv, const policy::PPOConfig& cfg) {
  const int n = logits.batch();
  const int A = static_cast<int>(logits.row_size());
  double total = 0.0;
  for (int b = 0; b < n; ++b) {
    const double* z = logits.row(b);
    double mx = z[0];
    for (int j = 1; j < A; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < A; ++j) sum += std::exp(z[j] - mx);
    const double lse = mx + std::log(sum);
    double h = 0.0;
    for (int j = 0; j < A; ++j) h -= std::exp(z[j] - lse) * (z[j] - lse);
    const double ratio = std::exp(z[actions[b]] - lse - old_lp[b]);
    const double surr = std::min(ratio * adv[b], std::clamp(ratio, 1 - cfg.clip, 1 + cfg.clip) * adv[b]);
    total += -surr - cfg.entropy_coef * h;
  }
  return total / n;
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradTally tally;
  Rng rng(1);
  {
    nn::Sequential s;
    s.add<nn::Dense>(7, 5);
    check_layer_net(tally, "dense", std::move(s), {7}, random_tensor({4, 7}, rng), true, 11);
  }
  {
    nn::Sequential s;
    s.add<nn::Dense>(6, 8);
    s.add<nn::Relu>();
    s.add<nn::Dense>(8, 3);
    check_layer_net(tally, "relu", std::move(s), {6}, random_tensor({4, 6}, rng), true, 12);
  }
  {
    nn::Sequential s;
    s.add<nn::Dense>(6, 8);
    s.add<nn::Tanh>();
    s.add<nn::Dense>(8, 3);
    check_layer_net(tally, "tanh", std::move(s), {6}, random_tensor({4, 6}, rng), true, 13);
  }
  {
    nn::Sequential s;
    s.add<nn::Conv3d>(nn::Conv3dSpec{2, 3, 3, 2, 1});
    s.add<nn::Relu>();
    s.add<nn::Conv3d>(nn::Conv3dSpec{3, 2, 3, 1, 0});
    s.add<nn::Dense>(2 * 2 * 1 * 1, 2);
    check_layer_net(tally, "conv3d", std::move(s), {2, 7, 6, 6}, random_tensor({2, 2, 7, 6, 6}, rng), true, 14);
  }
  {
    nn::Sequential s;
    s.add<nn::CodeEmbedding>(4, 3);
    s.add<nn::Tanh>();
    s.add<nn::Conv3d>(nn::Conv3dSpec{3, 2, 3, 2, 0});
    s.add<nn::Dense>(2 * 8, 2);
    check_layer_net(tally, "code-embedding", std::move(s), {5, 5, 5}, random_codes({3, 5, 5, 5}, rng, 4), false, 15);
  }
  {
    nn::Sequential s;
    s.add<nn::CodeConv3d>(4, 5, nn::Conv3dSpec{5, 3, 3, 2, 0});
    s.add<nn::Relu>();
    s.add<nn::Dense>(3 * 8, 2);
    check_layer_net(tally, "code-conv3d", std::move(s), {5, 5, 5}, random_codes({3, 5, 5, 5}, rng, 4), false, 16);
  }
  {
    nn::Sequential s;
    s.add<nn::CoordinateEmbedding>(std::array<int, 3>{4, 5, 6}, 3);
    s.add<nn::Dense>(9, 2);
    nn::Tensor coords({2, 3}, std::vector<double>{1, 2, 3, 3, 4, 5});
    check_layer_net(tally, "coordinate-embedding", std::move(s), {3}, coords, false, 17);
  }

  const auto map = sim::load_map_file(data_path("maps/testmap_area1.json"));
  policy::PolicySpec spec;
  spec.profile = policy::ArchProfile::desk();
  spec.obs = policy::observation_config(spec.profile, encode::PositionMode::Sinusoidal, encode::LocalMode::Occupancy);
  spec.map_dims = map.dims();
  std::vector<encode::Observation> obs;
  {
    sim::AgentState s = sim::reset(map);
    const sim::Action cycle[] = {sim::Action::MoveN, sim::Action::MoveE, sim::Action::Jump, sim::Action::MoveW,
                                 sim::Action::MoveNE};
    for (int t = 0; t < 12; ++t) {
      obs.push_back(encode::observe(map, s, t, 0.1 * t, spec.obs));
      s = sim::step(map, s, cycle[t % 5], t, 1000).state;
    }
  }
  const auto in = policy::batch_inputs(obs, spec);
  {
    nn::BranchNet actor = policy::build_actor(spec);
    Rng r(21);
    actor.init(r);
    auto params = actor.params();
    for (double& w : params[params.size() - 2].value->data) w *= 50.0;
    const nn::Tensor logits = actor.forward(in);
    std::vector<int> actions;
    std::vector<double> old_lp, adv;
    for (int b = 0; b < logits.batch(); ++b) {
      actions.push_back(static_cast<int>(r.index(sim::kActionCount)));
      old_lp.push_back(nn::log_softmax({logits.row(b), logits.row_size()})[actions.back()] + r.uniform(-0.05, 0.05));
      adv.push_back(r.uniform(-2, 2));
    }
    const policy::PPOConfig cfg;
    const auto s = policy::surrogate_loss(actor, in, actions, old_lp, adv, cfg);
    auto evaluate = [&] {
      nn::BranchNet::Cache c;
      const nn::Tensor l = actor.forward(in, &c);
      return Evaluation{ppo_objective(l, actions, old_lp, adv, cfg), oracle::sign_signature(c)};
    };
    std::vector<nn::Tensor*> values;
    for (const auto& p : params) values.push_back(p.value);
    tally.add("actor", check_gradient(values, s.grads, evaluate, kGradProbes, r));
  }
  {
    nn::BranchNet critic = policy::build_critic(spec);
    Rng r(22);
    critic.init(r);
    std::vector<double> ret;
    for (std::size_t b = 0; b < obs.size(); ++b) ret.push_back(r.uniform(-3, 3));
    const auto v = policy::value_loss(critic, in, ret);
    auto evaluate = [&] {
      nn::BranchNet::Cache c;
      const nn::Tensor out = critic.forward(in, &c);
      double loss = 0.0;
      for (std::size_t b = 0; b < ret.size(); ++b) loss += 0.5 * std::pow(out[b] - ret[b], 2) / double(ret.size());
      return Evaluation{loss, oracle::sign_signature(c)};
    };
    std::vector<nn::Tensor*> values;
    for (const auto& p : critic.params()) values.push_back(p.value);
    tally.add("critic", check_gradient(values, v.grads, evaluate, kGradProbes, r));
  }
  {
    Rng r(23);
    const int L = encode::kDeskOccupancy;
    const auto ex = random_rollouts(map, 1, 8, r, L);
    const auto po = random_rollouts(map, 1, 8, r, L);
    imitation::Discriminator d(policy::ArchProfile::desk(), L);
    d.init(r);
    const auto loss = d.loss(pointers(ex), pointers(po), 5.0);
    auto evaluate = [&] {
      d.touch();
      const auto l = d.loss(pointers(ex), pointers(po), 5.0);
      std::vector<const imitation::Sample*> both = pointers(ex);
      for (const auto& s : po) both.push_back(&s);
      nn::BranchNet::Cache c;
      const nn::Tensor din[] = {d.embed(both), imitation::Discriminator::one_hot(both)};
      d.body().forward(din, &c);
      return Evaluation{l.total(), oracle::sign_signature(c)};
    };
    std::vector<nn::Tensor*> values;
    for (const auto& p : d.params()) values.push_back(p.value);
    tally.add("discriminator params", check_gradient(values, loss.grads, evaluate, kGradProbes, r));

    const auto batch = pointers(ex);
    const auto g = d.input_gradients(batch);
    nn::Tensor emb = d.embed(batch);
    nn::Tensor act = imitation::Discriminator::one_hot(batch);
    auto eval_in = [&] {
      nn::BranchNet::Cache c;
      const nn::Tensor din[] = {emb, act};
      const nn::Tensor out = d.body().forward(din, &c);
      return Evaluation{std::accumulate(out.data.begin(), out.data.end(), 0.0), oracle::sign_signature(c)};
    };
    std::vector<nn::Tensor*> inputs{&emb, &act};
    const std::vector<nn::Tensor> analytic{g.embedded, g.action};
    tally.add("discriminator inputs", check_gradient(inputs, analytic, eval_in, kGradProbes, r));
  }
  {
    curiosity::RNDPair rnd(policy::ArchProfile::desk(), 24);
    std::vector<sim::AgentState> states;
    Rng r(25);
    for (int i = 0; i < 16; ++i) {
      auto s = at(static_cast<int>(r.index(13)), 1 + static_cast<int>(r.index(6)), static_cast<int>(r.index(17)));
      s.climbing = r.index(2) == 1;
      states.push_back(s);
    }
    const auto pl = rnd.predictor_loss(states);
    const auto feats = curiosity::features(states, rnd.pe());
    const nn::Tensor target = rnd.target().forward(feats);
    auto evaluate = [&] {
      nn::BranchNet::Cache c;
      const nn::Tensor p = rnd.predictor().forward(feats, &c);
      double loss = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) loss += std::pow(p[i] - target[i], 2) / double(p.size());
      return Evaluation{loss, oracle::sign_signature(c)};
    };
    std::vector<nn::Tensor*> values;
    for (const auto& p : rnd.predictor().params()) values.push_back(p.value);
    tally.add("rnd predictor", check_gradient(values, pl.grads, evaluate, kGradProbes, r));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = tally.failures.empty() && secs < kGradBudgetSec;
  o.detail = fmt("%d checks, min probes %d, worst rel err %.2e (%s), %.1f s", tally.checks, tally.min_probes,
                 tally.worst, tally.worst_name.c_str(), secs);
  for (const auto& f : tally.failures) o.detail += "; failed " + f;
  return o;
}

// ---------------------------------------------------------------- 2

struct MaxErr {
  double worst = 0.0;
  int compared = 0;
  void add(double a, double b) {
    worst = std::max(worst, std::abs(a - b));
    ++compared;
  }
};

Outcome criterion_formulas(const fs::path& work) {
  std::vector<std::string> notes;
  bool ok = true;

  // Positional embedding via exp/log.
  MaxErr pe;
  for (int pos = 0; pos < 64; ++pos) {
    const auto e = encode::positional_embedding(pos, {32, 10000.0});
    for (int k = 0; k < 32; ++k) {
      const int i = k / 2;
      const double angle = pos * std::exp(-(2.0 * i / 32.0) * std::log(10000.0));
      pe.add(e[k], k % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  ok &= pe.worst <= kFormulaTol;
  notes.push_back(fmt("PE %.1e", pe.worst));

  // Imitation reward with its clamps.
  MaxErr ri;
  const double clamp_d[] = {-1.0, 0.0, 1.0, 3.0};
  const double clamp_r[] = {0.0, 0.75, 1.0, 0.0};
  for (int k = 0; k < 4; ++k) ri.add(imitation::imitation_reward(clamp_d[k]), clamp_r[k]);
  Rng rng(2);
  for (int k = 0; k < 10000; ++k) {
    const double d = rng.uniform(-5, 5);
    const double lin = 1.0 - 0.25 * (d - 1.0) * (d - 1.0);
    ri.add(imitation::imitation_reward(d), lin > 0.0 ? lin : 0.0);
  }
  ok &= ri.worst <= kFormulaTol;
  notes.push_back(fmt("r_i %.1e", ri.worst));

  // Curiosity reward elementwise.
  MaxErr rc;
  {
    curiosity::RNDPair rnd(policy::ArchProfile::desk(), 3);
    std::vector<sim::AgentState> states;
    for (int i = 0; i < 20; ++i) states.push_back(at(i % 13, 1 + i % 5, (3 * i) % 17));
    const auto feats = curiosity::features(states, rnd.pe());
    const nn::Tensor t = rnd.target().forward(feats);
    const nn::Tensor p = rnd.predictor().forward(feats);
    const auto r = rnd.rewards(states);
    for (int b = 0; b < 20; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < t.row_size(); ++j) s += std::pow(t.row(b)[j] - p.row(b)[j], 2);
      rc.add(r[b], s / double(t.row_size()));
    }
  }
  ok &= rc.worst <= kFormulaTol;
  notes.push_back(fmt("r_c %.1e", rc.worst));

  // Reward audit over every logged step of a short run. Each iteration's
  // networks are snapshotted before it runs and rescored independently.
  MaxErr audit;
  {
    const auto cfg = trainer::load_config(
        config_path("quickstart.json"), {"iterations=3", "rollouts=4", "episode_length=32", "ppo.minibatch=32"});
    trainer::Trainer t(cfg);
    trainer::Trainer shadow(cfg);
    const int L = t.discriminator().occupancy_size();
    std::vector<std::vector<double>> history;
    for (int it = 0; it < cfg.iterations; ++it) {
      const fs::path snap = work / ("audit-" + std::to_string(it));
      fs::create_directories(snap);
      t.save_checkpoints(snap);
      shadow.load_checkpoints(snap);
      std::vector<trainer::TrajectoryRecord> recs;
      t.iterate(&recs);
      history.emplace_back();
      for (const auto& r : recs) history.back().insert(history.back().end(), r.r_c.begin(), r.r_c.end());
      // Batch k of K carries weight decay^(K-1-k).
      double w_sum = 0.0, wx = 0.0;
      for (std::size_t b = 0; b < history.size(); ++b) {
        const double w = std::pow(cfg.curiosity.norm_decay, double(history.size() - 1 - b));
        for (double x : history[b]) {
          w_sum += w;
          wx += w * x;
        }
      }
      const double m = wx / w_sum;
      double ss = 0.0;
      for (std::size_t b = 0; b < history.size(); ++b) {
        const double w = std::pow(cfg.curiosity.norm_decay, double(history.size() - 1 - b));
        for (double x : history[b]) ss += w * (x - m) * (x - m);
      }
      const double sd = std::sqrt(ss / w_sum);
      for (const auto& r : recs) {
        const std::vector<sim::AgentState> next(r.states.begin() + 1, r.states.end());
        const auto rc_now = shadow.rnd().rewards(next);
        for (std::size_t k = 0; k < r.steps(); ++k) {
          const auto sample = imitation::make_sample(t.map(), r.states[k], static_cast<long>(k), r.actions[k], L);
          const double d = shadow.discriminator().forward(sample);
          const double lin = 1.0 - 0.25 * (d - 1.0) * (d - 1.0);
          const double r_i = lin > 0.0 ? lin : 0.0;
          const double r_c_norm = rc_now[k] / (sd + 1e-8);
          audit.add(r.r_c[k], rc_now[k]);
          audit.add(r.r_i[k], r_i);
          audit.add(r.r_c_norm[k], r_c_norm);
          audit.add(r.reward[k], r.alpha * r_c_norm + (1.0 - r.alpha) * r_i + r.r_e[k]);
        }
      }
    }
  }
  ok &= audit.worst <= kFormulaTol;
  notes.push_back(fmt("reward audit %.1e over %d values", audit.worst, audit.compared));

  // Average curiosity and the filter against enumeration.
  MaxErr avg;
  bool theta_ok = true;
  Rng r2(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(r2.index(40));
    std::vector<double> vals;
    for (int i = 0; i < n; ++i) vals.push_back(r2.uniform(0, 1));
    const int T = 1 + static_cast<int>(r2.index(static_cast<std::size_t>(n - 1)));
    double s = 0.0;
    for (int i = 0; i <= T; ++i) s += vals[i];
    avg.add(*triage::average_curiosity(vals, T), s / T);

    std::vector<triage::TrajectoryScore> scores;
    for (int i = 0; i < 30; ++i) {
      triage::TrajectoryScore sc;
      sc.id = static_cast<std::uint64_t>(i);
      sc.alpha = r2.uniform(0, 1);
      sc.reached_goal = r2.index(4) != 0;
      if (sc.reached_goal) sc.score = r2.uniform(0, 1);
      scores.push_back(sc);
    }
    const double eps = r2.uniform(-0.2, 1.0);
    std::set<std::uint64_t> expect;
    for (const auto& sc : scores) {
      if (sc.alpha >= 0.5 && sc.reached_goal && sc.score && *sc.score > eps) expect.insert(sc.id);
    }
    std::set<std::uint64_t> got;
    for (const auto& sc : triage::filter_theta(scores, eps)) got.insert(sc.id);
    theta_ok &= got == expect;
  }
  ok &= avg.worst <= kFormulaTol && theta_ok;
  notes.push_back(fmt("avg curiosity %.1e, theta sets %s", avg.worst, theta_ok ? "equal" : "differ"));

  Outcome o;
  o.pass = ok;
  for (std::size_t i = 0; i < notes.size(); ++i) o.detail += (i ? ", " : "") + notes[i];
  return o;
}

// ---------------------------------------------------------------- 3

Outcome criterion_simulator() {
  bool ok = true;
  std::vector<std::string> notes;
  int maps = 0;
  for (const auto& entry : fs::directory_iterator(data_path("maps"))) {
    const sim::VoxelMap on = sim::load_map_file(entry.path());
    if (on.bugs.empty()) continue;
    ++maps;
    const sim::VoxelMap off = on.with_bug_physics(false);
    const bool shortcut_on = oracle::goal_reachable(on, oracle::avoid_intended(on));
    const bool shortcut_off = oracle::goal_reachable(off, oracle::avoid_intended(off));
    const bool intended_off = oracle::goal_reachable(off);
    bool identical = true;
    encode::ObservationConfig occ;
    encode::ObservationConfig ray;
    ray.local = encode::LocalMode::Raycast;
    Rng rng(5);
    for (int episode = 0; episode < 20 && identical; ++episode) {
      sim::AgentState s = sim::reset(on);
      for (long t = 0; t < 128; ++t) {
        s = sim::step(on, s, static_cast<sim::Action>(rng.index(sim::kActionCount)), t).state;
        for (const auto* c : {&occ, &ray}) {
          const auto a = encode::observe(on, s, t + 1, 0.3, *c);
          const auto b = encode::observe(off, s, t + 1, 0.3, *c);
          identical &= a.local == b.local && a.position == b.position && a.info == b.info;
        }
      }
    }
    const bool map_ok = shortcut_on && !shortcut_off && intended_off && identical;
    ok &= map_ok;
    notes.push_back(on.name() + fmt(": shortcut with bugs %s, without %s, observations %s", shortcut_on ? "yes" : "no",
                                    shortcut_off ? "yes" : "no", identical ? "identical" : "differ"));
  }
  Outcome o;
  o.pass = ok && maps >= 2;
  for (std::size_t i = 0; i < notes.size(); ++i) o.detail += (i ? "; " : "") + notes[i];
  return o;
}

// ---------------------------------------------------------------- 4

Outcome criterion_rnd() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto map = sim::load_map_file(data_path("maps/testmap_area1.json"));
  auto slab = [&](int x0, int x1) {
    std::vector<sim::AgentState> out;
    for (int x = x0; x <= x1; ++x) {
      for (int z = 0; z <= 12; ++z) {
        if (!map.static_collides({x, 1, z})) out.push_back(at(x, 1, z));
      }
    }
    return out;
  };
  const auto a = slab(0, 4);
  const auto b = slab(9, 12);
  curiosity::CuriosityConfig cfg;
  cfg.lr = policy::ArchProfile::desk().module_lr;
  curiosity::RNDPair rnd(policy::ArchProfile::desk(), 6, cfg);
  const double initial = mean(rnd.rewards(a));
  Rng rng(7);
  for (int e = 0; e < 200; ++e) rnd.train(a, rng);
  const double ra = mean(rnd.rewards(a));
  const double rb = mean(rnd.rewards(b));
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ra < 0.5 * initial && rb >= 2.0 * ra && secs < kRndBudgetSec;
  o.detail = fmt("r_c(A) %.3g -> %.3g (ratio %.3f < 0.5), r_c(B)/r_c(A) = %.1f >= 2, %.1f s", initial, ra,
                 ra / initial, rb / ra, secs);
  return o;
}

// ---------------------------------------------------------------- 5

Outcome criterion_amp() {
  const auto map = sim::load_map_file(data_path("maps/testmap_area1.json"));
  std::vector<fs::path> paths;
  for (int i = 1; i <= 6; ++i) paths.push_back(data_path("demos/testmap_area1_demo" + std::to_string(i) + ".txt"));
  const auto demos = imitation::load_demos(map, paths);
  const int L = encode::kDeskOccupancy;
  const auto train_expert = imitation::expert_samples(map, std::span(demos).first(5), L);
  const auto held_expert = imitation::expert_samples(map, std::span(demos).last(1), L);
  Rng rng(16);
  imitation::ReplayBuffer replay;
  for (auto& s : random_rollouts(map, 20, 128, rng, L)) replay.add(std::move(s));
  const auto held_policy = random_rollouts(map, 4, 128, rng, L);
  imitation::Discriminator d(policy::ArchProfile::desk(), L);
  Rng init(17);
  d.init(init);
  imitation::ImitationConfig cfg;
  cfg.lr = policy::ArchProfile::desk().module_lr;
  imitation::ImitationTrainer trainer(d, cfg);
  for (int i = 0; i < kAmpUpdates; ++i) trainer.update(train_expert, replay, rng);
  int ce = 0;
  int cp = 0;
  for (const auto& s : held_expert) ce += d.forward(s) > 0.0;
  for (const auto& s : held_policy) cp += d.forward(s) < 0.0;
  const double acc = 0.5 * (double(ce) / double(held_expert.size()) + double(cp) / double(held_policy.size()));

  bool bounded = true;
  Rng r(18);
  for (int i = 0; i < 100000; ++i) {
    const double v = imitation::imitation_reward(r.uniform(-100, 100));
    bounded &= v >= 0.0 && v <= 1.0;
  }
  Outcome o;
  o.pass = acc >= kAmpAccuracy && bounded;
  o.detail = fmt("held-out balanced accuracy %.3f after %d updates (expert %d/%zu, policy %d/%zu), r_i bounds %s", acc,
                 kAmpUpdates, ce, held_expert.size(), cp, held_policy.size(), bounded ? "hold" : "violated");
  return o;
}

// ---------------------------------------------------------------- 6

Outcome criterion_ppo() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = trainer::load_config(config_path("corridor.json"));
  trainer::Trainer t(cfg);
  double best = 0.0;
  long reached_at = -1;
  while (t.env_steps() < kPpoStepBudget) {
    t.iterate();
    if (t.iteration() % 5 != 0) continue;
    const double rate = t.evaluate(kPpoEvalEpisodes, cfg.alpha_value, cfg.seed).goal_rate();
    best = std::max(best, rate);
    if (rate >= kPpoGoalRate) {
      reached_at = t.env_steps();
      break;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = reached_at >= 0 && reached_at <= kPpoStepBudget && secs < kPpoBudgetSec;
  o.detail = reached_at >= 0 ? fmt("eval goal rate >= %.2f after %ld env steps, %.1f s", kPpoGoalRate, reached_at, secs)
                             : fmt("best eval goal rate %.2f within %ld steps, %.1f s", best, kPpoStepBudget, secs);
  return o;
}

// ---------------------------------------------------------------- 7, 8, 10

trainer::TrainConfig fixture_config() { return trainer::load_config(config_path("quickstart.json")); }

Outcome criterion_end_to_end(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto specs = cli::reward_ablation_specs(fixture_config());
  const auto dir = work / specs[0].slug;
  cli::ensure_run(specs[0].cfg, dir);
  const auto r = triage::triage_run(dir, triage::EpsilonMode::Quantile);
  const bool a = !r.theta.empty();
  int bug_members = 0;
  bool c = true;
  for (const auto& s : r.theta) {
    bug_members += s.bugs_entered != 0;
    c &= s.reached_goal && s.alpha >= 0.5;
  }
  const bool b = bug_members > 0;
  bool d = !r.demo_scores.empty();
  double demo_max = 0.0;
  for (double v : r.demo_scores) {
    d &= v < r.epsilon;
    demo_max = std::max(demo_max, v);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = a && b && c && d && secs < kEndToEndBudgetSec;
  o.detail = fmt("(a) |theta| = %zu; (b) %d members enter a bug, highlighted %d/%d; (c) %s; (d) max demo score %.4g "
                 "vs epsilon %.4g; %zu trajectories, %.1f s",
                 r.theta.size(), bug_members, r.bugs.highlighted, r.bugs.planted,
                 c ? "all reach goal with alpha >= 0.5" : "violated", demo_max, r.epsilon, r.trajectories, secs);
  return o;
}

Outcome criterion_baselines(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = cli::ablate_reward(fixture_config(), work);
  const auto& ccpt = rows[0];
  const auto& lin = rows[1];
  const auto& imi = rows[2];
  const auto& cur = rows[3];
  const bool cov = imi.coverage < ccpt.coverage;
  const bool hi = ccpt.bugs_highlighted >= lin.bugs_highlighted && lin.bugs_highlighted >= imi.bugs_highlighted;
  Outcome o;
  o.pass = cov && hi;
  o.detail = fmt("coverage imitation %zu < ccpt %zu; highlighted ccpt %d >= linear %d >= imitation %d; "
                 "curiosity-only coverage %zu (reported); %.1f s",
                 imi.coverage, ccpt.coverage, ccpt.bugs_highlighted, lin.bugs_highlighted, imi.bugs_highlighted,
                 cur.coverage, seconds_since(t0));
  std::cout << cli::format_reward_table(rows);
  return o;
}

Outcome criterion_encoding(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto series = cli::ablate_encoding(fixture_config(), work);
  bool labeled = series.size() == 5;
  bool monotone = true;
  for (const auto& s : series) {
    labeled &= !s.points.empty();
    for (std::size_t i = 1; i < s.points.size(); ++i) monotone &= s.points[i].env_steps > s.points[i - 1].env_steps;
  }
  const std::size_t full = series.at(0).points.back().coverage;
  const std::size_t norm = series.at(1).points.back().coverage;
  const bool soft = full >= norm;
  Outcome o;
  o.pass = labeled && monotone;
  std::string finals;
  for (const auto& s : series) finals += fmt(" %s=%zu", s.label.c_str(), s.points.back().coverage);
  o.detail = fmt("%zu series, steps %s; final coverage%s; soft check full >= normalized %s; %.1f s", series.size(),
                 monotone ? "monotone" : "not monotone", finals.c_str(), soft ? "holds" : "FAILED (reported)",
                 seconds_since(t0));
  return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion_determinism(const fs::path& work) {
  auto train = [&](const std::string& name) {
    std::ostringstream out, err;
    const int code = cli::run({"train", "--config", config_path("quickstart.json"), "--workers", "1",
                               "--deterministic", "--seed", "5", "--out", (work / name).string(), "--set",
                               "iterations=6", "eval.episodes=5"},
                              out, err);
    if (code != 0) throw InvariantError("training failed: " + err.str());
  };
  auto triage_json = [&](const std::string& name) {
    std::ostringstream out, err;
    if (cli::run({"triage", (work / name).string()}, out, err) != 0) throw InvariantError("triage failed: " + err.str());
    return out.str();
  };
  train("det-a");
  train("det-b");
  std::vector<std::string> differ;
  for (const std::string f : {"G.jsonl", "metrics.jsonl", "config.json", "checkpoints/actor.bin",
                              "checkpoints/critic.bin", "checkpoints/discriminator.bin", "checkpoints/rnd_target.bin",
                              "checkpoints/rnd_predictor.bin"}) {
    const std::string a = read_file(work / "det-a" / f);
    if (a.empty() || a != read_file(work / "det-b" / f)) differ.push_back(f);
  }
  if (triage_json("det-a") != triage_json("det-b")) differ.push_back("triage report");
  Outcome o;
  o.pass = differ.empty();
  o.detail = differ.empty() ? "G, metrics, config, 5 checkpoints and triage report are bit-identical"
                            : "differ:";
  for (const auto& d : differ) o.detail += " " + d;
  return o;
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string work_arg;
  std::vector<int> only;
  bool keep = false;
  app.add_option("--work", work_arg, "Scratch directory for training runs (wiped first unless --keep)");
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_flag("--keep", keep, "Reuse finished runs already in --work");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = work_arg.empty() ? fs::temp_directory_path() / "ccpt-acceptance" : fs::path(work_arg);
  if (!keep) fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<Criterion> criteria = {
      {1, "gradient suite (rel err < 1e-4, >= 100 probes each, < 120 s)", criterion_gradients},
      {2, "formula oracles (abs err <= 1e-12)", [&] { return criterion_formulas(work); }},
      {3, "simulator brute-force oracle", criterion_simulator},
      {4, "RND novelty (A < 0.5 x initial, B >= 2 x A, < 300 s)", criterion_rnd},
      {5, "AMP separation (>= 0.9 held-out after <= 500 updates, r_i in [0,1])", criterion_amp},
      {6, "PPO corridor (eval >= 0.9 within 200k steps, < 900 s)", criterion_ppo},
      {7, "end-to-end fixture (theta, bug hit, alpha/goal, demos below epsilon)", [&] { return criterion_end_to_end(work); }},
      {8, "baseline ordering", [&] { return criterion_baselines(work); }},
      {9, "determinism", [&] {
         fs::remove_all(work / "det-a");
         fs::remove_all(work / "det-b");
         return criterion_determinism(work);
       }},
      {10, "encoding ablation harness", [&] { return criterion_encoding(work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
