#pragma once

#include "rotorfall/dynamics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace rotorfall {

inline constexpr int kObservationSize = 22;
inline constexpr int kActionSize = kNumRotors;
/// Largest PWM change a single action may request.
inline constexpr double kMaxPwmDelta = 0.15;

/// Policy input: position error, row-major rotation, velocities, rotor speeds.
struct Observation {
  Vec3 pos_error = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 lin_vel = Vec3::Zero();
  Vec3 ang_vel = Vec3::Zero();
  Vec4 rotor_speeds = Vec4::Zero();

  Eigen::VectorXd to_vector() const;
  /// Throws std::invalid_argument unless `values` has exactly 22 entries.
  static Observation from_vector(std::span<const double> values);
};

Observation build_observation(const RigidBodyState& state, const Vec3& goal);

struct RewardConfig {
  double c1 = 10.0;
  double c2 = 0.2;
  double c3 = 10.0;
};

/// Position term plus rotor-speed smoothness term; never positive.
double reward(const Vec4& prev_speeds, const Vec4& curr_speeds, const Vec3& pos_error,
              const RewardConfig& cfg);

/// Clamps the action to [-1, 1], scales it to a PWM change and clamps the
/// result to [0, 1].
Vec4 apply_action(const Vec4& action, const Vec4& current_pwm);

namespace goal {

struct Stationary {
  Vec3 point = Vec3::Zero();
};
/// Goal altitude moves down (positive NED z) at `rate` until `floor`.
struct Descent {
  double rate = 0.1;
  double floor = 1.5;
};
struct CircleXY {
  double radius = 1.0;
  double period = 20.0;
};
struct CircleYZ {
  double radius = 1.0;
  double period = 20.0;
};
/// Horizontal circle with altitude varying as sin(2 theta).
struct Saddle {
  double radius = 1.0;
  double amplitude = 0.5;
  double period = 20.0;
};

}  // namespace goal

struct GoalTrajectory {
  std::variant<goal::Stationary, goal::Descent, goal::CircleXY, goal::CircleYZ, goal::Saddle> shape;
  /// Moving shapes hold the origin until this time.
  double stabilize_time = 0.0;
};

/// Goal position at time `t`. Every moving shape starts at the origin and is
/// continuous in `t`.
Vec3 goal_at(const GoalTrajectory& traj, double t);

struct EpisodeConfig {
  int horizon_steps = 1000;
  double dt = 0.01;
  /// 1-based rotor index; 0 runs the healthy vehicle.
  int failed_rotor = 1;
  double divergence_bound = 10.0;
  /// Cut all motors once a Descent goal has reached its floor and the
  /// vehicle is within `landing_tolerance` of it.
  bool cutoff_on_landing = false;
  double landing_tolerance = 0.1;
  /// Steps simulated with motors cut before the episode ends as landed.
  int landing_hold_steps = 20;
};

struct WindSettings {
  double speed = 0.0;
  double drag_coeff = 0.3;
};

struct EnvConfig {
  QuadParams quad;
  EpisodeConfig episode;
  RewardConfig reward;
  GoalTrajectory trajectory;
  WindSettings wind;
};

enum class Termination { kNone, kTimeLimit, kCrash, kLanded };

std::string_view to_string(Termination t);

struct EnvStep {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Termination reason = Termination::kNone;
  /// Number of horizon steps left unplayed when the episode ended.
  int remaining_steps = 0;
};

/// Single-episode MDP over the simulator. The fault is active from t = 0.
class QuadrotorEnv {
 public:
  explicit QuadrotorEnv(EnvConfig cfg);

  /// Level hover at the origin; `seed` draws the wind direction.
  Observation reset(std::uint64_t seed);
  /// Throws std::logic_error when the episode has already finished.
  EnvStep step(const Vec4& action);

  const EnvConfig& config() const { return cfg_; }
  const RigidBodyState& state() const { return state_; }
  const Vec4& pwm() const { return pwm_; }
  const WindModel& wind() const { return wind_; }
  const FaultMask& fault() const { return fault_; }
  Vec3 current_goal() const { return goal_at(cfg_.trajectory, time()); }
  double time() const { return steps_ * cfg_.episode.dt; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  bool motors_cut() const { return motors_cut_; }

 private:
  EnvConfig cfg_;
  FaultMask fault_;
  WindModel wind_;
  RigidBodyState state_;
  Vec4 pwm_ = Vec4::Zero();
  int steps_ = 0;
  int cut_steps_ = 0;
  bool done_ = true;
  bool motors_cut_ = false;
  bool clamp_warned_ = false;
};

/// Uniformly distributed direction on the unit sphere.
Vec3 random_unit_vector(std::mt19937_64& rng);

}  // namespace rotorfall
