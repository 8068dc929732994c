#include "rotorfall/env.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace rotorfall {

Eigen::VectorXd Observation::to_vector() const {
  Eigen::VectorXd v(kObservationSize);
  v.segment<3>(0) = pos_error;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v(3 + 3 * r + c) = rotation(r, c);
  }
  v.segment<3>(12) = lin_vel;
  v.segment<3>(15) = ang_vel;
  v.segment<4>(18) = rotor_speeds;
  return v;
}

Observation Observation::from_vector(std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(kObservationSize)) {
    throw std::invalid_argument("observation needs 22 values, got " + std::to_string(values.size()));
  }
  Observation o;
  o.pos_error = Vec3(values[0], values[1], values[2]);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) o.rotation(r, c) = values[static_cast<std::size_t>(3 + 3 * r + c)];
  }
  o.lin_vel = Vec3(values[12], values[13], values[14]);
  o.ang_vel = Vec3(values[15], values[16], values[17]);
  o.rotor_speeds = Vec4(values[18], values[19], values[20], values[21]);
  return o;
}

Observation build_observation(const RigidBodyState& state, const Vec3& goal) {
  Observation o;
  o.pos_error = goal - state.position;
  o.rotation = rotation_matrix(state.attitude);
  o.lin_vel = state.velocity;
  o.ang_vel = state.body_rates;
  o.rotor_speeds = state.rotor_speeds;
  return o;
}

double reward(const Vec4& prev_speeds, const Vec4& curr_speeds, const Vec3& pos_error,
              const RewardConfig& cfg) {
  const double position_term = -cfg.c1 * std::tanh(cfg.c2 * pos_error.norm());
  const double smoothness_term = -(prev_speeds - curr_speeds).cwiseAbs().sum() / cfg.c3;
  return position_term + smoothness_term;
}

Vec4 apply_action(const Vec4& action, const Vec4& current_pwm) {
  Vec4 out;
  for (int i = 0; i < kActionSize; ++i) {
    const double a = std::clamp(action(i), -1.0, 1.0);
    out(i) = std::clamp(current_pwm(i) + kMaxPwmDelta * a, 0.0, 1.0);
  }
  return out;
}

Vec3 goal_at(const GoalTrajectory& traj, double t) {
  if (const auto* s = std::get_if<goal::Stationary>(&traj.shape)) return s->point;
  if (t <= traj.stabilize_time) return Vec3::Zero();

  const double elapsed = t - traj.stabilize_time;
  auto phase = [elapsed](double period) { return 2.0 * std::numbers::pi * elapsed / period; };

  return std::visit(
      [&](const auto& shape) -> Vec3 {
        using T = std::decay_t<decltype(shape)>;
        if constexpr (std::is_same_v<T, goal::Descent>) {
          return Vec3(0.0, 0.0, std::min(shape.rate * elapsed, shape.floor));
        } else if constexpr (std::is_same_v<T, goal::CircleXY>) {
          const double th = phase(shape.period);
          return Vec3(shape.radius * (std::cos(th) - 1.0), shape.radius * std::sin(th), 0.0);
        } else if constexpr (std::is_same_v<T, goal::CircleYZ>) {
          const double th = phase(shape.period);
          return Vec3(0.0, shape.radius * (std::cos(th) - 1.0), shape.radius * std::sin(th));
        } else if constexpr (std::is_same_v<T, goal::Saddle>) {
          const double th = phase(shape.period);
          return Vec3(shape.radius * (std::cos(th) - 1.0), shape.radius * std::sin(th),
                      shape.amplitude * std::sin(2.0 * th));
        } else {
          return shape.point;
        }
      },
      traj.shape);
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kTimeLimit: return "time-limit";
    case Termination::kCrash: return "crash";
    case Termination::kLanded: return "landed";
  }
  return "unknown";
}

Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

QuadrotorEnv::QuadrotorEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_.quad);
  if (cfg_.episode.horizon_steps <= 0) throw std::invalid_argument("episode.horizon_steps must be positive");
  if (!(cfg_.episode.dt > 0.0)) throw std::invalid_argument("episode.dt must be positive");
  if (!(cfg_.episode.divergence_bound > 0.0)) throw std::invalid_argument("episode.divergence_bound must be positive");
  fault_ = FaultMask::single(cfg_.episode.failed_rotor);
}

Observation QuadrotorEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  wind_ = WindModel{};
  wind_.drag_coeff = cfg_.wind.drag_coeff;
  if (cfg_.wind.speed > 0.0) {
    wind_.enabled = true;
    wind_.wind_velocity = cfg_.wind.speed * random_unit_vector(rng);
  }

  // The vehicle hovers on four rotors, then the failed one stops at t = 0.
  state_ = hover_state(cfg_.quad, fault_);
  pwm_ = Vec4::Constant(hover_speed(cfg_.quad) / cfg_.quad.omega_max);
  steps_ = 0;
  cut_steps_ = 0;
  done_ = false;
  motors_cut_ = false;
  clamp_warned_ = false;
  return build_observation(state_, current_goal());
}

EnvStep QuadrotorEnv::step(const Vec4& action) {
  if (done_) throw std::logic_error("step called on a finished episode; call reset first");

  const Vec4 prev_speeds = state_.rotor_speeds;
  pwm_ = motors_cut_ ? Vec4::Zero() : apply_action(action, pwm_);

  const StepResult sim = rotorfall::step(state_, pwm_, cfg_.quad, fault_, wind_, cfg_.episode.dt);
  if (sim.pwm_clamped && !clamp_warned_) {
    std::cerr << "warning: PWM command clamped into [0, 1]\n";
    clamp_warned_ = true;
  }
  ++steps_;

  EnvStep out;
  if (sim.diverged) {
    done_ = true;
    out.observation = build_observation(state_, current_goal());
    out.reward = -cfg_.reward.c1;
    out.done = true;
    out.reason = Termination::kCrash;
    out.remaining_steps = std::max(0, cfg_.episode.horizon_steps - steps_);
    return out;
  }
  state_ = sim.state;

  const Vec3 goal = current_goal();
  out.observation = build_observation(state_, goal);
  out.reward = reward(prev_speeds, state_.rotor_speeds, out.observation.pos_error, cfg_.reward);

  if (motors_cut_) ++cut_steps_;
  if (cfg_.episode.cutoff_on_landing && !motors_cut_) {
    if (const auto* d = std::get_if<goal::Descent>(&cfg_.trajectory.shape)) {
      if (goal.z() >= d->floor && state_.position.z() >= d->floor - cfg_.episode.landing_tolerance) {
        motors_cut_ = true;
      }
    }
  }

  if (out.observation.pos_error.norm() > cfg_.episode.divergence_bound) {
    out.reason = Termination::kCrash;
  } else if (motors_cut_ && cut_steps_ >= cfg_.episode.landing_hold_steps) {
    out.reason = Termination::kLanded;
  } else if (steps_ >= cfg_.episode.horizon_steps) {
    out.reason = Termination::kTimeLimit;
  }
  if (out.reason != Termination::kNone) {
    done_ = true;
    out.done = true;
    out.remaining_steps = std::max(0, cfg_.episode.horizon_steps - steps_);
  }
  return out;
}

}  // namespace rotorfall
