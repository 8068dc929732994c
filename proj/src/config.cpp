#include "rotorfall/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rotorfall {
namespace {

using nlohmann::json;

// Binds dotted keys to fields so that reading, writing and unknown-key
// rejection share one table.
struct Field {
  std::function<void(const json&)> read;
  std::function<json()> write;
};
using Section = std::vector<std::pair<std::string, Field>>;
using Schema = std::vector<std::pair<std::string, Section>>;

template <class T>
Field bind(T& ref) {
  return {[&ref](const json& j) { ref = j.get<T>(); }, [&ref]() { return json(ref); }};
}

Field bind_vec3(Vec3& ref) {
  return {[&ref](const json& j) {
            const auto v = j.get<std::vector<double>>();
            if (v.size() != 3) throw std::invalid_argument("expected 3 numbers");
            ref = Vec3(v[0], v[1], v[2]);
          },
          [&ref]() { return json(std::vector<double>{ref.x(), ref.y(), ref.z()}); }};
}

Schema schema(RunConfig& c) {
  return {
      {"quad",
       {{"mass", bind(c.quad.mass)},
        {"arm_length", bind(c.quad.arm_length)},
        {"motor_height", bind(c.quad.motor_height)},
        {"inertia_diag", bind_vec3(c.quad.inertia_diag)},
        {"rotor_inertia", bind(c.quad.rotor_inertia)},
        {"thrust_coeff", bind(c.quad.thrust_coeff)},
        {"torque_coeff", bind(c.quad.torque_coeff)},
        {"omega_min", bind(c.quad.omega_min)},
        {"omega_max", bind(c.quad.omega_max)},
        {"max_thrust_per_rotor", bind(c.quad.max_thrust_per_rotor)},
        {"gravity", bind(c.quad.gravity)},
        {"motor_time_constant", bind(c.quad.motor_time_constant)}}},
      {"episode",
       {{"horizon_steps", bind(c.episode.horizon_steps)},
        {"dt", bind(c.episode.dt)},
        {"failed_rotor", bind(c.episode.failed_rotor)},
        {"divergence_bound", bind(c.episode.divergence_bound)},
        {"landing_tolerance", bind(c.episode.landing_tolerance)},
        {"landing_hold_steps", bind(c.episode.landing_hold_steps)}}},
      {"reward", {{"c1", bind(c.reward.c1)}, {"c2", bind(c.reward.c2)}, {"c3", bind(c.reward.c3)}}},
      {"wind", {{"speed", bind(c.wind.speed)}, {"drag_coeff", bind(c.wind.drag_coeff)}}},
      {"trajectory",
       {{"stabilize_time", bind(c.trajectory.stabilize_time)},
        {"wind_stabilize_time", bind(c.trajectory.wind_stabilize_time)},
        {"descent_rate", bind(c.trajectory.descent_rate)},
        {"descent_floor", bind(c.trajectory.descent_floor)},
        {"circle_radius", bind(c.trajectory.circle_radius)},
        {"circle_period", bind(c.trajectory.circle_period)},
        {"saddle_radius", bind(c.trajectory.saddle_radius)},
        {"saddle_amplitude", bind(c.trajectory.saddle_amplitude)},
        {"saddle_period", bind(c.trajectory.saddle_period)}}},
      {"eval", {{"duration", bind(c.eval.duration)}, {"baseline_episodes", bind(c.eval.baseline_episodes)}}},
      {"sac",
       {{"hidden_width", bind(c.sac.hidden_width)},
        {"actor_hidden_layers", bind(c.sac.actor_hidden_layers)},
        {"critic_hidden_layers", bind(c.sac.critic_hidden_layers)},
        {"gamma", bind(c.sac.gamma)},
        {"rho", bind(c.sac.rho)},
        {"batch_size", bind(c.sac.batch_size)},
        {"buffer_capacity", bind(c.sac.buffer_capacity)},
        {"lr_q", bind(c.sac.lr_q)},
        {"lr_pi", bind(c.sac.lr_pi)},
        {"lr_alpha", bind(c.sac.lr_alpha)},
        {"target_entropy", bind(c.sac.target_entropy)},
        {"initial_alpha", bind(c.sac.initial_alpha)},
        {"epsilon_explore", bind(c.sac.epsilon_explore)},
        {"warmup_steps", bind(c.sac.warmup_steps)},
        {"actor_uses_target_critics", bind(c.sac.actor_uses_target_critics)},
        {"obs_scale", bind(c.sac.obs_scale)}}},
      {"train",
       {{"total_steps", bind(c.train.total_steps)},
        {"eval_interval", bind(c.train.eval_interval)},
        {"checkpoint_interval", bind(c.train.checkpoint_interval)},
        {"log_interval", bind(c.train.log_interval)},
        {"seed", bind(c.train.seed)}}},
  };
}

}  // namespace

std::vector<double> default_observation_scale(const QuadParams& quad) {
  std::vector<double> s(kObservationSize, 1.0);
  for (int i = 12; i < 15; ++i) s[static_cast<std::size_t>(i)] = 0.5;  // m/s
  for (int i = 15; i < 18; ++i) s[static_cast<std::size_t>(i)] = 0.1;  // rad/s
  for (int i = 18; i < 22; ++i) s[static_cast<std::size_t>(i)] = 1.0 / quad.omega_max;
  return s;
}

RunConfig default_config() {
  RunConfig c;
  c.sac.hidden_width = 64;
  c.sac.obs_dim = kObservationSize;
  c.sac.action_dim = kActionSize;
  c.sac.target_entropy = -static_cast<double>(kActionSize);
  c.sac.obs_scale = default_observation_scale(c.quad);
  return c;
}

RunConfig parse_config(std::string_view json_text, const RunConfig& base) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<file>", "top level must be an object");

  RunConfig out = base;
  const Schema sch = schema(out);
  for (const auto& [section_name, section_value] : doc.items()) {
    auto sec = std::find_if(sch.begin(), sch.end(), [&](const auto& s) { return s.first == section_name; });
    if (sec == sch.end()) throw ConfigError(section_name, "unknown section");
    if (!section_value.is_object()) throw ConfigError(section_name, "section must be an object");
    for (const auto& [key, value] : section_value.items()) {
      const std::string dotted = section_name + "." + key;
      auto field = std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& f) { return f.first == key; });
      if (field == sec->second.end()) throw ConfigError(dotted, "unknown key");
      try {
        field->second.read(value);
      } catch (const std::exception& e) {
        throw ConfigError(dotted, std::string("bad value: ") + e.what());
      }
    }
  }
  validate(out);
  return out;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string to_json_string(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json doc = json::object();
  for (const auto& [section_name, fields] : schema(copy)) {
    json sec = json::object();
    for (const auto& [key, field] : fields) sec[key] = field.write();
    doc[section_name] = std::move(sec);
  }
  return doc.dump(2) + "\n";
}

void validate(const RunConfig& c) {
  try {
    validate(c.quad);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("quad", e.what());
  }
  try {
    validate(c.sac);
  } catch (const std::invalid_argument& e) {
    // Messages read "sac.<field>: <reason>".
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon == std::string::npos) throw ConfigError("sac", msg);
    throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
  }
  if (c.sac.obs_dim != kObservationSize) throw ConfigError("sac.obs_dim", "must be 22 for the quadrotor task");
  if (c.sac.action_dim != kActionSize) throw ConfigError("sac.action_dim", "must be 4 for the quadrotor task");
  if (c.episode.horizon_steps <= 0) throw ConfigError("episode.horizon_steps", "must be positive");
  if (!(c.episode.dt > 0.0)) throw ConfigError("episode.dt", "must be positive");
  if (c.episode.failed_rotor < 0 || c.episode.failed_rotor > kNumRotors) {
    throw ConfigError("episode.failed_rotor", "must be 0 (healthy) or 1..4");
  }
  if (!(c.episode.divergence_bound > 0.0)) throw ConfigError("episode.divergence_bound", "must be positive");
  if (c.episode.landing_hold_steps < 0) throw ConfigError("episode.landing_hold_steps", "must be non-negative");
  if (!(c.reward.c1 > 0.0)) throw ConfigError("reward.c1", "must be positive");
  if (!(c.reward.c2 > 0.0)) throw ConfigError("reward.c2", "must be positive");
  if (!(c.reward.c3 > 0.0)) throw ConfigError("reward.c3", "must be positive");
  if (!(c.wind.speed >= 0.0)) throw ConfigError("wind.speed", "must be non-negative");
  if (!(c.wind.drag_coeff >= 0.0)) throw ConfigError("wind.drag_coeff", "must be non-negative");
  if (!(c.trajectory.stabilize_time >= 0.0)) throw ConfigError("trajectory.stabilize_time", "must be non-negative");
  if (!(c.trajectory.wind_stabilize_time >= 0.0)) {
    throw ConfigError("trajectory.wind_stabilize_time", "must be non-negative");
  }
  if (!(c.trajectory.descent_rate > 0.0)) throw ConfigError("trajectory.descent_rate", "must be positive");
  if (!(c.trajectory.descent_floor > 0.0)) throw ConfigError("trajectory.descent_floor", "must be positive");
  if (!(c.trajectory.circle_period > 0.0)) throw ConfigError("trajectory.circle_period", "must be positive");
  if (!(c.trajectory.saddle_period > 0.0)) throw ConfigError("trajectory.saddle_period", "must be positive");
  if (!(c.eval.duration > 0.0)) throw ConfigError("eval.duration", "must be positive");
  if (c.eval.baseline_episodes < 2) throw ConfigError("eval.baseline_episodes", "must be at least 2");
  if (c.train.total_steps < 0) throw ConfigError("train.total_steps", "must be non-negative");
  if (c.train.log_interval <= 0) throw ConfigError("train.log_interval", "must be positive");
  if (c.train.total_steps % c.train.log_interval != 0) {
    throw ConfigError("train.total_steps", "must be a multiple of train.log_interval");
  }
  if (c.train.eval_interval <= 0 || c.train.eval_interval % c.train.log_interval != 0) {
    throw ConfigError("train.eval_interval", "must be a positive multiple of train.log_interval");
  }
  if (c.train.checkpoint_interval <= 0 || c.train.checkpoint_interval % c.train.log_interval != 0) {
    throw ConfigError("train.checkpoint_interval", "must be a positive multiple of train.log_interval");
  }
}

}  // namespace rotorfall
