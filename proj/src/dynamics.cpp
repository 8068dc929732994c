#include "rotorfall/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rotorfall {
namespace {

// Packed integration state: position, velocity, quaternion (w, x, y, z),
// body rates, rotor speeds.
using Packed = Eigen::Matrix<double, 17, 1>;

constexpr std::array<double, kNumRotors> kArmX{1.0, 0.0, -1.0, 0.0};
constexpr std::array<double, kNumRotors> kArmY{0.0, 1.0, 0.0, -1.0};
// Yaw reaction torque sign along body +z (down): clockwise rotors push -z.
constexpr std::array<double, kNumRotors> kSpinSign{-1.0, 1.0, -1.0, 1.0};

Packed pack(const RigidBodyState& s) {
  Packed x;
  x.segment<3>(0) = s.position;
  x.segment<3>(3) = s.velocity;
  x(6) = s.attitude.w();
  x(7) = s.attitude.x();
  x(8) = s.attitude.y();
  x(9) = s.attitude.z();
  x.segment<3>(10) = s.body_rates;
  x.segment<4>(13) = s.rotor_speeds;
  return x;
}

RigidBodyState unpack(const Packed& x) {
  RigidBodyState s;
  s.position = x.segment<3>(0);
  s.velocity = x.segment<3>(3);
  s.attitude = Eigen::Quaterniond(x(6), x(7), x(8), x(9));
  s.body_rates = x.segment<3>(10);
  s.rotor_speeds = x.segment<4>(13);
  return s;
}

Wrench wrench_from_speeds(const Vec4& speeds, const QuadParams& p, const FaultMask& fault) {
  Wrench w;
  for (int i = 0; i < kNumRotors; ++i) {
    if (fault.disabled[static_cast<std::size_t>(i)]) continue;
    const double sq = speeds(i) * speeds(i);
    const double thrust = p.thrust_coeff * sq;
    const auto k = static_cast<std::size_t>(i);
    w.force.z() -= thrust;
    // r x (0, 0, -f) with r = l * (ax, ay, 0)
    w.torque.x() += -p.arm_length * kArmY[k] * thrust;
    w.torque.y() += p.arm_length * kArmX[k] * thrust;
    w.torque.z() += kSpinSign[k] * p.torque_coeff * sq;
  }
  return w;
}

Packed derivative(const Packed& x, const Vec4& speed_cmd, const QuadParams& p,
                  const FaultMask& fault, const WindModel& wind) {
  const Vec3 v = x.segment<3>(3);
  const Eigen::Quaterniond q(x(6), x(7), x(8), x(9));
  const Vec3 w = x.segment<3>(10);
  const Vec4 speeds = x.segment<4>(13);

  const Wrench wrench = wrench_from_speeds(speeds, p, fault);
  const Mat3 r = rotation_matrix(q);

  Vec3 accel = r * wrench.force / p.mass;
  accel.z() += p.gravity;
  if (wind.enabled) accel += wind.force(v) / p.mass;

  const Vec3 iw = p.inertia_diag.cwiseProduct(w);
  const Vec3 w_dot = (wrench.torque - w.cross(iw)).cwiseQuotient(p.inertia_diag);

  // q_dot = 0.5 * q (x) (0, w)
  const double qw = x(6), qx = x(7), qy = x(8), qz = x(9);
  Packed dx;
  dx.segment<3>(0) = v;
  dx.segment<3>(3) = accel;
  dx(6) = 0.5 * (-qx * w.x() - qy * w.y() - qz * w.z());
  dx(7) = 0.5 * (qw * w.x() + qy * w.z() - qz * w.y());
  dx(8) = 0.5 * (qw * w.y() - qx * w.z() + qz * w.x());
  dx(9) = 0.5 * (qw * w.z() + qx * w.y() - qy * w.x());
  dx.segment<3>(10) = w_dot;
  if (p.motor_time_constant > 0.0) {
    dx.segment<4>(13) = (speed_cmd - speeds) / p.motor_time_constant;
  } else {
    dx.segment<4>(13).setZero();
  }
  for (int i = 0; i < kNumRotors; ++i) {
    if (fault.disabled[static_cast<std::size_t>(i)]) dx(13 + i) = 0.0;
  }
  return dx;
}

}  // namespace

void validate(const QuadParams& p) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("quad parameters: " + what); };
  if (!(p.mass > 0.0)) fail("mass must be positive");
  if (!(p.arm_length > 0.0)) fail("arm_length must be positive");
  if (!(p.inertia_diag.array() > 0.0).all()) fail("inertia_diag entries must be positive");
  if (!(p.omega_min >= 0.0)) fail("omega_min must be non-negative");
  if (!(p.omega_max > p.omega_min)) fail("omega_max must exceed omega_min");
  if (!(p.thrust_coeff > 0.0)) fail("thrust_coeff must be positive");
  if (!(p.torque_coeff >= 0.0)) fail("torque_coeff must be non-negative");
  if (!(p.gravity > 0.0)) fail("gravity must be positive");
  if (!(p.motor_time_constant >= 0.0)) fail("motor_time_constant must be non-negative");
  if (p.thrust_coeff * p.omega_max * p.omega_max > 1.05 * p.max_thrust_per_rotor) {
    fail("thrust_coeff * omega_max^2 exceeds 1.05 * max_thrust_per_rotor");
  }
}

double hover_speed(const QuadParams& p) {
  return std::sqrt(p.mass * p.gravity / (kNumRotors * p.thrust_coeff));
}

bool RigidBodyState::is_finite() const {
  return position.allFinite() && velocity.allFinite() && attitude.coeffs().allFinite() &&
         body_rates.allFinite() && rotor_speeds.allFinite();
}

FaultMask FaultMask::single(int rotor) {
  if (rotor < 0 || rotor > kNumRotors) {
    throw std::invalid_argument("failed rotor must be in 0..4, got " + std::to_string(rotor));
  }
  FaultMask m;
  if (rotor > 0) m.disabled[static_cast<std::size_t>(rotor - 1)] = true;
  return m;
}

bool FaultMask::any() const {
  return std::any_of(disabled.begin(), disabled.end(), [](bool d) { return d; });
}

Vec3 WindModel::force(const Vec3& vehicle_velocity) const {
  if (!enabled) return Vec3::Zero();
  return drag_coeff * (wind_velocity - vehicle_velocity);
}

double pwm_to_speed_command(double pwm, const QuadParams& params) {
  return std::clamp(pwm, 0.0, 1.0) * params.omega_max;
}

Wrench rotor_wrench(const RigidBodyState& state, const QuadParams& params, const FaultMask& fault) {
  return wrench_from_speeds(state.rotor_speeds, params, fault);
}

StepResult step(const RigidBodyState& state, const Vec4& pwm, const QuadParams& params,
                const FaultMask& fault, const WindModel& wind, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");

  StepResult out;
  Vec4 cmd;
  for (int i = 0; i < kNumRotors; ++i) {
    if (!(pwm(i) >= 0.0 && pwm(i) <= 1.0)) out.pwm_clamped = true;
    const double c = std::max(pwm_to_speed_command(pwm(i), params), params.omega_min);
    cmd(i) = fault.disabled[static_cast<std::size_t>(i)] ? 0.0 : c;
  }

  Packed x = pack(state);
  for (int i = 0; i < kNumRotors; ++i) {
    if (fault.disabled[static_cast<std::size_t>(i)]) x(13 + i) = 0.0;
  }
  if (params.motor_time_constant <= 0.0) x.segment<4>(13) = cmd;

  const Packed k1 = derivative(x, cmd, params, fault, wind);
  const Packed k2 = derivative(x + 0.5 * dt * k1, cmd, params, fault, wind);
  const Packed k3 = derivative(x + 0.5 * dt * k2, cmd, params, fault, wind);
  const Packed k4 = derivative(x + dt * k3, cmd, params, fault, wind);
  x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  out.state = unpack(x);
  if (!out.state.is_finite() || out.state.attitude.norm() == 0.0) {
    out.diverged = true;
    return out;
  }
  out.state.attitude.normalize();
  for (int i = 0; i < kNumRotors; ++i) {
    double& w = out.state.rotor_speeds(i);
    w = fault.disabled[static_cast<std::size_t>(i)] ? 0.0
                                                    : std::clamp(w, params.omega_min, params.omega_max);
  }
  return out;
}

Mat3 rotation_matrix(const Eigen::Quaterniond& attitude) {
  const Eigen::Quaterniond q = attitude.normalized();
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

RigidBodyState hover_state(const QuadParams& params, const FaultMask& fault) {
  RigidBodyState s;
  const double w = hover_speed(params);
  for (int i = 0; i < kNumRotors; ++i) {
    s.rotor_speeds(i) = fault.disabled[static_cast<std::size_t>(i)] ? 0.0 : w;
  }
  return s;
}

}  // namespace rotorfall
