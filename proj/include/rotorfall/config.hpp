#pragma once

#include "rotorfall/dynamics.hpp"
#include "rotorfall/env.hpp"
#include "rotorfall/sac.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rotorfall {

/// Goal-trajectory shapes used by the evaluation maneuvers.
struct TrajectorySettings {
  double stabilize_time = 5.0;
  double wind_stabilize_time = 10.0;
  double descent_rate = 0.1;
  double descent_floor = 1.5;
  double circle_radius = 1.0;
  double circle_period = 20.0;
  double saddle_radius = 1.0;
  double saddle_amplitude = 0.5;
  double saddle_period = 20.0;
};

struct EvalSettings {
  double duration = 40.0;
  int baseline_episodes = 20;
};

struct TrainRun {
  std::int64_t total_steps = 300000;
  std::int64_t eval_interval = 10000;
  std::int64_t checkpoint_interval = 50000;
  std::int64_t log_interval = 1000;
  std::uint64_t seed = 0;
};

/// Everything a command needs, mergeable from a JSON file and flags.
struct RunConfig {
  QuadParams quad;
  EpisodeConfig episode;
  RewardConfig reward;
  WindSettings wind;
  TrajectorySettings trajectory;
  EvalSettings eval;
  sac::SacConfig sac;
  TrainRun train;
};

/// Raised for malformed or inconsistent configuration; `key` is the dotted
/// path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Defaults, including observation scaling tuned to the vehicle's ranges.
RunConfig default_config();

/// Multipliers mapping raw observations to roughly unit scale.
std::vector<double> default_observation_scale(const QuadParams& quad);

/// Overlays a JSON document on `base`. Unknown sections or keys and values
/// of the wrong type raise ConfigError. The result is validated.
RunConfig parse_config(std::string_view json_text, const RunConfig& base = default_config());
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = default_config());

/// Full effective configuration as pretty-printed JSON.
std::string to_json_string(const RunConfig& cfg);

/// Cross-field checks; throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace rotorfall
