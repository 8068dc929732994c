#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace rotorfall {

inline constexpr int kNumRotors = 4;

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Physical constants of the simulated vehicle (SI units).
///
/// Rotor layout is a "+" frame in body NED coordinates: rotor 1 on +x (nose),
/// rotor 2 on +y, rotor 3 on -x, rotor 4 on -y. Rotors 1 and 3 spin clockwise
/// seen from above, rotors 2 and 4 counter-clockwise.
struct QuadParams {
  double mass = 1.2;
  double arm_length = 0.16;
  /// Carried for completeness; does not enter the wrench.
  double motor_height = 0.05;
  Vec3 inertia_diag{0.0123, 0.0123, 0.0123};
  /// Carried for completeness; rotor response is modelled by motor_time_constant.
  double rotor_inertia = 2.7e-5;
  double thrust_coeff = 1.076e-5;
  double torque_coeff = 1.632e-7;
  double omega_min = 0.0;
  double omega_max = 900.0;
  double max_thrust_per_rotor = 9.1;
  double gravity = 9.81;
  /// First-order rotor lag. Zero means the rotor reaches its command instantly.
  double motor_time_constant = 0.015;
};

/// Throws std::invalid_argument naming the first violated constraint.
void validate(const QuadParams& params);

/// Rotor speed at which four healthy rotors exactly carry the weight.
double hover_speed(const QuadParams& params);

struct RigidBodyState {
  Vec3 position = Vec3::Zero();  // NED world frame
  Vec3 velocity = Vec3::Zero();  // world frame
  Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();  // body -> world
  Vec3 body_rates = Vec3::Zero();
  Vec4 rotor_speeds = Vec4::Zero();

  bool is_finite() const;
};

struct FaultMask {
  std::array<bool, kNumRotors> disabled{};

  static FaultMask none() { return {}; }
  /// `rotor` is 1-based; 0 means no failure.
  static FaultMask single(int rotor);
  bool any() const;
};

/// Linear drag toward the air mass: F = drag_coeff * (wind_velocity - v).
struct WindModel {
  Vec3 wind_velocity = Vec3::Zero();
  double drag_coeff = 0.3;
  bool enabled = false;

  Vec3 force(const Vec3& vehicle_velocity) const;
};

/// Body-frame force and torque.
struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

struct StepResult {
  RigidBodyState state;
  /// Set when the successor contains NaN or infinity; `state` is then unusable.
  bool diverged = false;
  /// Set when any PWM input had to be clamped into [0, 1].
  bool pwm_clamped = false;
};

/// Maps a normalized motor command to a rotor speed command, clamping the
/// input to [0, 1].
double pwm_to_speed_command(double pwm, const QuadParams& params);

/// Per-rotor thrust and yaw drag from the current rotor speeds. Disabled
/// rotors contribute nothing.
Wrench rotor_wrench(const RigidBodyState& state, const QuadParams& params, const FaultMask& fault);

/// Advances the vehicle by `dt` seconds with RK4. Pure and deterministic.
StepResult step(const RigidBodyState& state, const Vec4& pwm, const QuadParams& params,
                const FaultMask& fault, const WindModel& wind, double dt);

/// R = Rz(yaw) * Ry(pitch) * Rx(roll) for the given attitude. Non-unit inputs
/// are normalized first.
Mat3 rotation_matrix(const Eigen::Quaterniond& attitude);

/// Level hover at the origin with every healthy rotor at hover speed.
RigidBodyState hover_state(const QuadParams& params, const FaultMask& fault);

}  // namespace rotorfall
