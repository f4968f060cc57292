#include "ccpt/trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "ccpt/errors.hpp"
#include "ccpt/sim/map_io.hpp"
#include "json.hpp"

namespace ccpt::trainer {

using nlohmann::json;

double sample_alpha(Rng& rng) { return rng.uniform(); }

double combine_reward(double r_c, double r_i, double r_e, double alpha) {
  return alpha * r_c + (1.0 - alpha) * r_i + r_e;
}

namespace {

// Stream identifiers for mix_seed.
constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kEpisodeStream = 0x2e915;
constexpr std::uint64_t kUpdateStream = 0x3c9d;
constexpr std::uint64_t kEvalStream = 0x4e7a1;

}  // namespace

struct Trainer::Episode {
  Rng rng{0};
  double alpha = 0.0;
  std::vector<sim::AgentState> states;
  std::vector<sim::Action> actions;
  std::vector<encode::Observation> obs;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> extrinsic;
  std::vector<std::uint32_t> bug_masks;
  double bootstrap = 0.0;
  bool reached_goal = false;
  int first_goal_step = -1;
  bool keep_observations = true;
};

namespace {

TrainConfig validated(TrainConfig cfg) {
  validate(cfg);
  return cfg;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_(validated(std::move(cfg))),
      map_(sim::load_map_file(cfg_.map)),
      episode_length_(cfg_.resolved_episode_length()),
      disc_(cfg_.arch(), cfg_.arch().occupancy),
      rnd_(cfg_.arch(), mix_seed(cfg_.seed, kInitStream + 1), cfg_.curiosity),
      ppo_(cfg_.ppo),
      rc_stats_(cfg_.curiosity.norm_decay) {
  const policy::ArchProfile arch = cfg_.arch();
  if (!cfg_.demos.empty()) demos_ = imitation::load_demos(map_, cfg_.demos);
  expert_ = imitation::expert_samples(map_, demos_, arch.occupancy);
  spec_.profile = arch;
  spec_.obs = policy::observation_config(arch, cfg_.position, cfg_.local);
  spec_.map_dims = map_.dims();
  actor_ = policy::build_actor(spec_);
  critic_ = policy::build_critic(spec_);
  Rng init(mix_seed(cfg_.seed, kInitStream));
  actor_.init(init);
  critic_.init(init);
  disc_.init(init);
  replay_ = std::make_unique<imitation::ReplayBuffer>(cfg_.imitation.replay_capacity);
  disc_trainer_ = std::make_unique<imitation::ImitationTrainer>(disc_, cfg_.imitation);
  const sim::Vec3 d = map_.dims();
  visited_.assign(static_cast<std::size_t>(d.x) * d.y * d.z, 0);
}

void Trainer::run_episodes(std::span<Episode> episodes) const {
  const int n = static_cast<int>(episodes.size());
  if (n == 0) return;
  std::vector<Rng*> rngs;
  for (Episode& e : episodes) {
    e.states.assign(1, sim::reset(map_));
    e.bug_masks.assign(1, map_.contact_bug_mask(e.states[0].pos, e.states[0].climbing));
    if (map_.active_goal_at(e.states[0].pos) >= 0) {
      e.reached_goal = true;
      e.first_goal_step = 0;
    }
    rngs.push_back(&e.rng);
  }
  std::vector<encode::Observation> step_obs(static_cast<std::size_t>(n));
  for (int t = 0; t < episode_length_; ++t) {
    for (int i = 0; i < n; ++i) step_obs[i] = encode::observe(map_, episodes[i].states.back(), t, episodes[i].alpha, spec_.obs);
    const auto inputs = policy::batch_inputs(step_obs, spec_);
    const auto acts = policy::act(actor_, critic_, inputs, rngs);
    for (int i = 0; i < n; ++i) {
      Episode& e = episodes[i];
      const auto a = static_cast<sim::Action>(acts[i].action);
      const sim::StepResult r = sim::step(map_, e.states.back(), a, t, episode_length_);
      if (e.keep_observations) e.obs.push_back(std::move(step_obs[i]));
      e.actions.push_back(a);
      e.log_probs.push_back(acts[i].log_prob);
      e.values.push_back(acts[i].value);
      e.states.push_back(r.state);
      e.extrinsic.push_back(r.extrinsic);
      e.bug_masks.push_back(r.info.bug_mask);
      if (!r.info.goals_touched.empty() && !e.reached_goal) {
        e.reached_goal = true;
        e.first_goal_step = static_cast<int>(e.states.size()) - 1;
      }
    }
  }
  // The time limit cuts the episode, so bootstrap from the final state.
  for (int i = 0; i < n; ++i) {
    step_obs[i] = encode::observe(map_, episodes[i].states.back(), episode_length_, episodes[i].alpha, spec_.obs);
  }
  const auto inputs = policy::batch_inputs(step_obs, spec_);
  const nn::Tensor v = critic_.forward(inputs);
  for (int i = 0; i < n; ++i) episodes[i].bootstrap = v[static_cast<std::size_t>(i)];
}

void Trainer::run_parallel(std::vector<Episode>& episodes) const {
  const int workers = std::min<int>(cfg_.workers, static_cast<int>(episodes.size()));
  if (workers <= 1) {
    run_episodes(episodes);
    return;
  }
  // Rows of a batched forward pass are computed independently, so splitting
  // the episodes over threads does not change any result.
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  const std::size_t n = episodes.size();
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
    threads.emplace_back([&, w, begin, end] {
      try {
        run_episodes(std::span<Episode>(episodes.data() + begin, end - begin));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

IterationMetrics Trainer::iterate(std::vector<TrajectoryRecord>* out) {
  const int m = cfg_.rollouts;
  std::vector<Episode> episodes(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Episode& e = episodes[i];
    e.rng = Rng(mix_seed(mix_seed(mix_seed(cfg_.seed, kEpisodeStream), static_cast<std::uint64_t>(iteration_)),
                         static_cast<std::uint64_t>(i)));
    const double sampled = sample_alpha(e.rng);
    e.alpha = cfg_.alpha_mode == AlphaMode::Sample ? sampled : cfg_.alpha_value;
  }
  run_parallel(episodes);

  // Score every step with the networks as they were during collection.
  std::vector<sim::AgentState> next_states;
  std::vector<imitation::Sample> samples;
  const int L = disc_.occupancy_size();
  for (const Episode& e : episodes) {
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      next_states.push_back(e.states[t + 1]);
      samples.push_back(imitation::make_sample(map_, e.states[t], static_cast<long>(t), e.actions[t], L));
    }
  }
  const std::vector<double> r_c = rnd_.rewards(next_states);
  std::vector<const imitation::Sample*> sample_ptrs;
  for (const auto& s : samples) sample_ptrs.push_back(&s);
  std::vector<double> d_out;
  for (std::size_t start = 0; start < sample_ptrs.size(); start += 256) {
    const std::size_t count = std::min<std::size_t>(256, sample_ptrs.size() - start);
    const auto part = disc_.forward(std::span<const imitation::Sample* const>(sample_ptrs.data() + start, count));
    d_out.insert(d_out.end(), part.begin(), part.end());
  }
  rc_stats_.update(r_c);

  IterationMetrics metrics;
  metrics.iteration = iteration_;
  const double scale = cfg_.extrinsic_only ? 0.0 : 1.0;
  policy::RolloutBatch batch;
  std::vector<encode::Observation> all_obs;
  std::vector<TrajectoryRecord> records;
  std::size_t k = 0;
  int reached = 0;
  for (int i = 0; i < m; ++i) {
    Episode& e = episodes[i];
    TrajectoryRecord rec;
    rec.id = static_cast<std::uint64_t>(iteration_) * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(i);
    rec.iteration = iteration_;
    rec.episode = i;
    rec.alpha = e.alpha;
    rec.intrinsic_scale = scale;
    rec.reached_goal = e.reached_goal;
    rec.first_goal_step = e.first_goal_step;
    rec.states = e.states;
    rec.actions = e.actions;
    rec.bug_masks = e.bug_masks;
    reached += e.reached_goal ? 1 : 0;
    for (std::size_t t = 0; t < e.actions.size(); ++t, ++k) {
      const double rc = r_c[k];
      const double rc_norm = cfg_.curiosity.normalize ? rc_stats_.normalize(rc) : rc;
      const double ri = imitation::imitation_reward(d_out[k]);
      const double re = e.extrinsic[t];
      const double R = scale == 0.0 ? re : combine_reward(rc_norm, ri, re, e.alpha);
      if (!std::isfinite(R)) throw NumericError("non-finite reward at iteration " + std::to_string(iteration_));
      rec.r_c.push_back(rc);
      rec.r_c_norm.push_back(rc_norm);
      rec.r_i.push_back(ri);
      rec.r_e.push_back(re);
      rec.reward.push_back(R);
      metrics.mean_reward += R;
      metrics.mean_r_i += ri;
      metrics.mean_r_c += rc;
      metrics.mean_r_e += re;

      batch.actions.push_back(static_cast<int>(e.actions[t]));
      batch.log_probs.push_back(e.log_probs[t]);
      batch.values.push_back(e.values[t]);
      batch.rewards.push_back(R);
      const bool last = t + 1 == e.actions.size();
      batch.episode_end.push_back(last ? 1 : 0);
      batch.bootstrap.push_back(last ? e.bootstrap : 0.0);
      batch.alphas.push_back(e.alpha);
    }
    for (auto& o : e.obs) all_obs.push_back(std::move(o));
    for (const auto& s : e.states) {
      const sim::Vec3 d = map_.dims();
      const std::size_t idx = (static_cast<std::size_t>(s.pos.y) * d.z + s.pos.z) * d.x + s.pos.x;
      if (!visited_[idx]) {
        visited_[idx] = 1;
        ++coverage_;
      }
    }
    records.push_back(std::move(rec));
  }
  const double steps = static_cast<double>(k);
  metrics.mean_reward /= steps;
  metrics.mean_r_i /= steps;
  metrics.mean_r_c /= steps;
  metrics.mean_r_e /= steps;
  metrics.goal_rate = static_cast<double>(reached) / m;
  env_steps_ += static_cast<long>(k);
  metrics.env_steps = env_steps_;
  metrics.coverage = coverage_;

  // Updates: discriminator, curiosity predictor, then policy.
  Rng upd(mix_seed(mix_seed(cfg_.seed, kUpdateStream), static_cast<std::uint64_t>(iteration_)));
  for (auto& s : samples) replay_->add(std::move(s));
  if (!expert_.empty()) {
    for (int u = 0; u < cfg_.imitation.updates_per_iteration; ++u) {
      metrics.disc_loss += disc_trainer_->update(expert_, *replay_, upd).total() / cfg_.imitation.updates_per_iteration;
    }
  }
  metrics.rnd_loss = rnd_.train(next_states, upd);
  batch.inputs = policy::batch_inputs(all_obs, spec_);
  metrics.ppo = ppo_.update(actor_, critic_, batch, upd);
  if (!std::isfinite(metrics.ppo.policy_loss) || !std::isfinite(metrics.ppo.value_loss)) {
    throw NumericError("non-finite PPO loss at iteration " + std::to_string(iteration_));
  }

  ++iteration_;
  if (out) {
    for (auto& r : records) out->push_back(std::move(r));
  }
  return metrics;
}

EvalResult Trainer::evaluate(int episodes, double alpha, std::uint64_t seed) const {
  std::vector<Episode> eps(static_cast<std::size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    eps[i].rng = Rng(mix_seed(mix_seed(seed, kEvalStream), static_cast<std::uint64_t>(i)));
    eps[i].alpha = alpha;
    eps[i].keep_observations = false;
  }
  run_parallel(eps);
  EvalResult r;
  r.episodes = episodes;
  for (const Episode& e : eps) r.reached += e.reached_goal ? 1 : 0;
  return r;
}

void Trainer::save_checkpoints(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_params((dir / "actor.bin").string(), actor_.descriptor(), actor_.params());
  nn::save_params((dir / "critic.bin").string(), critic_.descriptor(), critic_.params());
  nn::save_params((dir / "discriminator.bin").string(), disc_.descriptor(), disc_.params());
  rnd_.save((dir / "rnd_target.bin").string(), (dir / "rnd_predictor.bin").string());
}

void Trainer::load_checkpoints(const std::filesystem::path& dir) {
  nn::load_params((dir / "actor.bin").string(), actor_.descriptor(), actor_.params());
  nn::load_params((dir / "critic.bin").string(), critic_.descriptor(), critic_.params());
  nn::load_params((dir / "discriminator.bin").string(), disc_.descriptor(), disc_.params());
  actor_.touch();
  critic_.touch();
  disc_.touch();
  rnd_.load((dir / "rnd_target.bin").string(), (dir / "rnd_predictor.bin").string());
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json metrics_json(const IterationMetrics& m) {
  json j{{"iteration", m.iteration},
         {"env_steps", m.env_steps},
         {"mean_reward", m.mean_reward},
         {"mean_r_i", m.mean_r_i},
         {"mean_r_c", m.mean_r_c},
         {"mean_r_e", m.mean_r_e},
         {"goal_rate", m.goal_rate},
         {"coverage", m.coverage},
         {"disc_loss", m.disc_loss},
         {"rnd_loss", m.rnd_loss},
         {"policy_loss", m.ppo.policy_loss},
         {"value_loss", m.ppo.value_loss},
         {"entropy", m.ppo.entropy},
         {"approx_kl", m.ppo.approx_kl},
         {"clip_fraction", m.ppo.clip_fraction}};
  if (m.eval_goal_rate) j["eval_goal_rate"] = *m.eval_goal_rate;
  return j;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvariantError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_training(const TrainConfig& cfg, const std::filesystem::path& run_dir,
                       const std::function<void(const IterationMetrics&)>& progress) {
  validate(cfg);
  if (std::filesystem::exists(run_dir)) {
    throw ConfigError("run directory " + run_dir.string() + " already exists; refusing to overwrite");
  }
  Trainer trainer(cfg);
  std::filesystem::create_directories(run_dir);
  const std::string started = utc_now();
  write_json(run_dir / "config.json", config_to_json(cfg));

  json manifest{{"seed", cfg.seed},
                {"config_hash", hex(config_hash(cfg))},
                {"profile", cfg.profile},
                {"map", trainer.map().name()},
                {"versions",
                 {{"map_format", sim::kMapFormatVersion},
                  {"demo_format", sim::kDemoFormatVersion},
                  {"dataset_format", kDatasetFormatVersion},
                  {"param_format", nn::kParamFormatVersion}}},
                {"status", "running"},
                {"timing", {{"start", started}}}};
  write_json(run_dir / "manifest.json", manifest);

  RunResult result;
  result.run_dir = run_dir;
  DatasetWriter g(run_dir / "G.jsonl");
  std::ofstream metrics_out(run_dir / "metrics.jsonl");
  try {
    for (int it = 0; it < cfg.iterations; ++it) {
      std::vector<TrajectoryRecord> records;
      IterationMetrics m = trainer.iterate(&records);
      for (const auto& r : records) g.append(r);
      const bool last = it + 1 == cfg.iterations;
      if (cfg.eval_episodes > 0 && (last || (cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0))) {
        m.eval_goal_rate = trainer.evaluate(cfg.eval_episodes, 0.0, cfg.seed).goal_rate();
      }
      metrics_out << metrics_json(m).dump() << '\n';
      metrics_out.flush();
      if (progress) progress(m);
      result.metrics.push_back(m);
    }
  } catch (const NumericError& e) {
    trainer.save_checkpoints(run_dir / "checkpoints");
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["iterations_completed"] = trainer.iteration();
    write_json(run_dir / "manifest.json", manifest);
    throw;
  }
  trainer.save_checkpoints(run_dir / "checkpoints");
  result.trajectories = g.count();
  result.coverage = result.metrics.empty() ? 0 : result.metrics.back().coverage;
  if (!result.metrics.empty()) result.final_eval_goal_rate = result.metrics.back().eval_goal_rate;
  manifest["status"] = "complete";
  manifest["iterations_completed"] = trainer.iteration();
  manifest["trajectories"] = result.trajectories;
  manifest["env_steps"] = trainer.env_steps();
  manifest["coverage"] = result.coverage;
  manifest["timing"]["end"] = utc_now();
  write_json(run_dir / "manifest.json", manifest);
  return result;
}

}  // namespace ccpt::trainer
