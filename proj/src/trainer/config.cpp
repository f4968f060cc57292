#include "ccpt/trainer/config.hpp"

#include <fstream>
#include <sstream>

#include "ccpt/errors.hpp"
#include "ccpt/sim/map_io.hpp"

namespace ccpt::trainer {

using nlohmann::json;

policy::ArchProfile TrainConfig::arch() const { return policy::ArchProfile::by_name(profile); }

int TrainConfig::resolved_episode_length() const {
  return episode_length > 0 ? episode_length : arch().episode_length;
}

std::string alpha_mode_name(AlphaMode m) { return m == AlphaMode::Sample ? "sample" : "fixed"; }

namespace {

class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  // Reads doc[path] into out when present and of the right type.
  template <typename T>
  void get(const std::string& path, T& out) {
    const json* node = find(path);
    if (!node) return;
    try {
      out = node->get<T>();
    } catch (const json::exception&) {
      errors.push_back(path + ": wrong type");
    }
  }

  const json* find(const std::string& path) {
    const json* cur = &doc_;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!cur->is_object() || !cur->contains(key)) return nullptr;
      cur = &(*cur)[key];
      if (dot == std::string::npos) return cur;
      start = dot + 1;
    }
  }

  std::vector<std::string> errors;

 private:
  const json& doc_;
};

const std::vector<std::string> kKnownKeys = {
    "map", "demos", "profile", "seed", "workers", "deterministic", "iterations", "rollouts", "episode_length",
    "alpha", "reward", "observation", "ppo", "imitation", "curiosity", "eval"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

TrainConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  Reader r(doc);
  for (const auto& [key, _] : doc.items()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      r.errors.push_back(key + ": unknown key");
    }
  }
  std::string map;
  r.get("map", map);
  c.map = resolve(base_dir, map);
  std::vector<std::string> demos;
  r.get("demos", demos);
  for (const auto& d : demos) c.demos.push_back(resolve(base_dir, d));
  r.get("profile", c.profile);
  r.get("seed", c.seed);
  r.get("workers", c.workers);
  r.get("deterministic", c.deterministic);
  r.get("iterations", c.iterations);
  r.get("rollouts", c.rollouts);
  r.get("episode_length", c.episode_length);

  std::string alpha_mode = "sample";
  r.get("alpha.mode", alpha_mode);
  if (alpha_mode == "sample") {
    c.alpha_mode = AlphaMode::Sample;
  } else if (alpha_mode == "fixed") {
    c.alpha_mode = AlphaMode::Fixed;
  } else {
    r.errors.push_back("alpha.mode: expected sample or fixed, got '" + alpha_mode + "'");
  }
  r.get("alpha.value", c.alpha_value);
  r.get("reward.extrinsic_only", c.extrinsic_only);
  r.get("reward.normalize_curiosity", c.curiosity.normalize);

  std::string position = "sinusoidal", local = "occupancy";
  r.get("observation.position", position);
  r.get("observation.local", local);
  if (auto m = encode::parse_position_mode(position)) {
    c.position = *m;
  } else {
    r.errors.push_back("observation.position: unknown mode '" + position + "'");
  }
  if (local == "occupancy") {
    c.local = encode::LocalMode::Occupancy;
  } else if (local == "raycast") {
    c.local = encode::LocalMode::Raycast;
  } else if (local == "none") {
    c.local = encode::LocalMode::None;
  } else {
    r.errors.push_back("observation.local: unknown mode '" + local + "'");
  }

  policy::ArchProfile arch;
  try {
    arch = c.arch();
  } catch (const ConfigError& e) {
    r.errors.push_back(std::string("profile: ") + e.what());
  }
  c.ppo.lr = arch.policy_lr;
  c.imitation.lr = arch.module_lr;
  c.curiosity.lr = arch.module_lr;

  r.get("ppo.lr", c.ppo.lr);
  r.get("ppo.gamma", c.ppo.gamma);
  r.get("ppo.lambda", c.ppo.lambda);
  r.get("ppo.clip", c.ppo.clip);
  r.get("ppo.epochs", c.ppo.epochs);
  r.get("ppo.minibatch", c.ppo.minibatch);
  r.get("ppo.entropy_coef", c.ppo.entropy_coef);
  r.get("ppo.max_grad_norm", c.ppo.max_grad_norm);
  r.get("ppo.normalize_advantages", c.ppo.normalize_advantages);

  r.get("imitation.lr", c.imitation.lr);
  r.get("imitation.batch", c.imitation.batch);
  r.get("imitation.gp_coef", c.imitation.gp_coef);
  r.get("imitation.replay_capacity", c.imitation.replay_capacity);
  r.get("imitation.updates_per_iteration", c.imitation.updates_per_iteration);
  r.get("imitation.max_grad_norm", c.imitation.max_grad_norm);

  r.get("curiosity.lr", c.curiosity.lr);
  r.get("curiosity.batch", c.curiosity.batch);
  r.get("curiosity.norm_decay", c.curiosity.norm_decay);
  r.get("curiosity.max_grad_norm", c.curiosity.max_grad_norm);

  r.get("eval.episodes", c.eval_episodes);
  r.get("eval.every", c.eval_every);

  if (!r.errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["map"] = c.map.string();
  j["demos"] = json::array();
  for (const auto& d : c.demos) j["demos"].push_back(d.string());
  j["profile"] = c.profile;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["deterministic"] = c.deterministic;
  j["iterations"] = c.iterations;
  j["rollouts"] = c.rollouts;
  j["episode_length"] = c.episode_length;
  j["alpha"] = {{"mode", alpha_mode_name(c.alpha_mode)}, {"value", c.alpha_value}};
  j["reward"] = {{"extrinsic_only", c.extrinsic_only}, {"normalize_curiosity", c.curiosity.normalize}};
  j["observation"] = {{"position", std::string(encode::position_mode_name(c.position))},
                      {"local", std::string(encode::local_mode_name(c.local))}};
  j["ppo"] = {{"lr", c.ppo.lr},
              {"gamma", c.ppo.gamma},
              {"lambda", c.ppo.lambda},
              {"clip", c.ppo.clip},
              {"epochs", c.ppo.epochs},
              {"minibatch", c.ppo.minibatch},
              {"entropy_coef", c.ppo.entropy_coef},
              {"max_grad_norm", c.ppo.max_grad_norm},
              {"normalize_advantages", c.ppo.normalize_advantages}};
  j["imitation"] = {{"lr", c.imitation.lr},
                    {"batch", c.imitation.batch},
                    {"gp_coef", c.imitation.gp_coef},
                    {"replay_capacity", c.imitation.replay_capacity},
                    {"updates_per_iteration", c.imitation.updates_per_iteration},
                    {"max_grad_norm", c.imitation.max_grad_norm}};
  j["curiosity"] = {{"lr", c.curiosity.lr}, {"batch", c.curiosity.batch}, {"norm_decay", c.curiosity.norm_decay}, {"max_grad_norm", c.curiosity.max_grad_norm}};
  j["eval"] = {{"episodes", c.eval_episodes}, {"every", c.eval_every}};
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (!cur->is_object()) *cur = json::object();
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
  } else {
    doc = json::object();
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc, path.empty() ? std::filesystem::path{} : path.parent_path());
}

void validate(const TrainConfig& c) {
  std::vector<std::string> errors;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  if (c.map.empty()) {
    errors.push_back("map: missing map path");
  } else if (!std::filesystem::exists(c.map)) {
    errors.push_back("map: file not found: " + c.map.string());
  }
  for (const auto& d : c.demos) {
    if (!std::filesystem::exists(d)) errors.push_back("demos: file not found: " + d.string());
  }
  if (c.demos.empty() && !(c.alpha_mode == AlphaMode::Fixed && c.alpha_value == 1.0)) {
    errors.push_back("demos: at least one demonstration is required unless alpha is fixed at 1");
  }
  check([&] { c.arch().validate(); });
  if (c.workers < 1) errors.push_back("workers: must be at least 1");
  if (c.iterations < 0) errors.push_back("iterations: must be non-negative");
  if (c.rollouts < 1) errors.push_back("rollouts: must be at least 1");
  if (c.episode_length < 0) errors.push_back("episode_length: must be non-negative");
  if (!(c.alpha_value >= 0.0 && c.alpha_value <= 1.0)) errors.push_back("alpha.value: must lie in [0, 1]");
  if (c.eval_episodes < 0) errors.push_back("eval.episodes: must be non-negative");
  if (c.eval_every < 0) errors.push_back("eval.every: must be non-negative");
  check([&] { c.ppo.validate(); });
  check([&] { c.imitation.validate(); });
  check([&] { c.curiosity.validate(); });
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace ccpt::trainer
