#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ccpt/curiosity/curiosity.hpp"
#include "ccpt/encode/encode.hpp"
#include "ccpt/imitation/imitation.hpp"
#include "ccpt/policy/arch.hpp"
#include "ccpt/policy/policy.hpp"
#include "json.hpp"

namespace ccpt::trainer {

enum class AlphaMode { Sample, Fixed };

struct TrainConfig {
  std::filesystem::path map;
  std::vector<std::filesystem::path> demos;
  std::string profile = "desk";
  std::uint64_t seed = 0;
  int workers = 1;
  bool deterministic = true;
  int iterations = 100;
  int rollouts = 10;      // m episodes per iteration
  int episode_length = 0;  // 0 takes the profile default

  AlphaMode alpha_mode = AlphaMode::Sample;
  double alpha_value = 0.5;
  // Diagnostic mode: R = r_e only. Curiosity and imitation are still trained
  // and logged.
  bool extrinsic_only = false;

  encode::PositionMode position = encode::PositionMode::Sinusoidal;
  encode::LocalMode local = encode::LocalMode::Occupancy;

  policy::PPOConfig ppo;
  imitation::ImitationConfig imitation;
  curiosity::CuriosityConfig curiosity;

  int eval_episodes = 20;
  int eval_every = 0;  // 0 evaluates only after the last iteration

  policy::ArchProfile arch() const;
  int resolved_episode_length() const;
};

// Builds a config from a JSON document. Relative paths resolve against
// base_dir. Unset learning rates follow the chosen profile. Every problem is
// collected and reported in a single ConfigError.
TrainConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
TrainConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
nlohmann::json config_to_json(const TrainConfig& cfg);

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Checks values and file existence; throws ConfigError listing every problem.
void validate(const TrainConfig& cfg);

// FNV-1a of the canonical JSON dump.
std::uint64_t config_hash(const TrainConfig& cfg);

std::string alpha_mode_name(AlphaMode m);

}  // namespace ccpt::trainer
