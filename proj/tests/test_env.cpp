#include "rotorfall/env.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rotorfall;

namespace {

// Independent reading of the reward: saturating distance penalty plus the
// summed absolute rotor-speed change.
double reward_oracle(const double prev[4], const double curr[4], const double err[3], double c1, double c2,
                     double c3) {
  const double dist = std::sqrt(err[0] * err[0] + err[1] * err[1] + err[2] * err[2]);
  double change = 0.0;
  for (int i = 0; i < 4; ++i) change += std::fabs(curr[i] - prev[i]);
  return -c1 * std::tanh(c2 * dist) - change / c3;
}

EnvConfig hover_config() {
  EnvConfig cfg;
  cfg.trajectory = GoalTrajectory{goal::Stationary{}, 0.0};
  return cfg;
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("observation layout") {
  RigidBodyState s;
  s.position = Vec3(1, 2, 3);
  s.velocity = Vec3(4, 5, 6);
  s.body_rates = Vec3(7, 8, 9);
  s.rotor_speeds = Vec4(10, 11, 12, 13);
  const Observation o = build_observation(s, Vec3::Zero());
  CHECK(o.pos_error == Vec3(-1, -2, -3));
  const Eigen::VectorXd v = o.to_vector();
  REQUIRE(v.size() == 22);
  const double expected[22] = {-1, -2, -3, 1, 0, 0, 0, 1, 0, 0, 0, 1, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  for (int i = 0; i < 22; ++i) CHECK(v(i) == expected[i]);

  const Observation back = Observation::from_vector(std::span<const double>(v.data(), 22));
  CHECK(back.to_vector() == v);
  CHECK_THROWS_AS(Observation::from_vector(std::span<const double>(v.data(), 21)), std::invalid_argument);
}

TEST_CASE("rotation block is row-major") {
  RigidBodyState s;
  s.attitude = Eigen::Quaterniond(std::cos(M_PI / 4), 0.0, 0.0, std::sin(M_PI / 4));
  const Eigen::VectorXd v = build_observation(s, Vec3::Zero()).to_vector();
  // Row 0 of Rz(90 deg) is (0, -1, 0).
  CHECK(std::abs(v(3)) < 1e-12);
  CHECK(v(4) == doctest::Approx(-1.0));
  CHECK(v(6) == doctest::Approx(1.0));
}

TEST_CASE("reward examples") {
  const RewardConfig cfg;
  CHECK(reward(Vec4::Zero(), Vec4::Zero(), Vec3::Zero(), cfg) == 0.0);
  CHECK(reward(Vec4::Zero(), Vec4::Zero(), Vec3(3, 4, 0), cfg) == doctest::Approx(-7.61594).epsilon(1e-6));
  CHECK(reward(Vec4::Zero(), Vec4(10, 0, 0, 0), Vec3::Zero(), cfg) == doctest::Approx(-1.0));
}

TEST_CASE("reward properties") {
  const RewardConfig cfg;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_real_distribution<double> w(0.0, 900.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec4 a(w(rng), w(rng), w(rng), w(rng));
    const Vec4 b(w(rng), w(rng), w(rng), w(rng));
    const Vec3 e(u(rng), u(rng), u(rng));
    const double r = reward(a, b, e, cfg);
    CHECK(r <= 0.0);
    // Position term saturates at -c1.
    CHECK(reward(a, a, e, cfg) >= -cfg.c1);
    // Symmetric in time and invariant under a joint rotor permutation.
    CHECK(reward(b, a, e, cfg) == doctest::Approx(r));
    const Vec4 pa(a(2), a(0), a(3), a(1));
    const Vec4 pb(b(2), b(0), b(3), b(1));
    CHECK(reward(pa, pb, e, cfg) == doctest::Approx(r));
    const double prev[4] = {a(0), a(1), a(2), a(3)};
    const double curr[4] = {b(0), b(1), b(2), b(3)};
    const double err[3] = {e(0), e(1), e(2)};
    CHECK(std::abs(r - reward_oracle(prev, curr, err, cfg.c1, cfg.c2, cfg.c3)) < 1e-12);
  }
}

TEST_CASE("position term is monotone in the error and saturates") {
  const RewardConfig cfg;
  const Vec4 w = Vec4::Constant(500.0);
  double last = 1.0;
  for (int i = 0; i <= 400; ++i) {
    const double r = reward(w, w, Vec3(0.1 * i, 0.0, 0.0), cfg);
    CHECK(r < last);
    last = r;
  }
  // tanh(0.2 * 30) leaves 10 * (1 - tanh 6) = 1.2288e-4 of headroom at 30 m,
  // and the gap keeps shrinking with distance.
  const double gap30 = reward(w, w, Vec3(30.0, 0.0, 0.0), cfg) + cfg.c1;
  CHECK(gap30 == doctest::Approx(cfg.c1 * (1.0 - std::tanh(6.0))).epsilon(1e-6));
  CHECK(gap30 < 1.3e-4);
  CHECK(reward(w, w, Vec3(0.0, 50.0, 0.0), cfg) + cfg.c1 < 1e-7);
}

TEST_CASE("action mapping") {
  CHECK(apply_action(Vec4::Ones(), Vec4::Constant(0.5)).isApprox(Vec4::Constant(0.65)));
  CHECK(apply_action(Vec4::Zero(), Vec4(0.1, 0.2, 0.3, 0.4)) == Vec4(0.1, 0.2, 0.3, 0.4));
  CHECK(apply_action(-Vec4::Ones(), Vec4::Constant(0.1)) == Vec4::Zero());
  CHECK(apply_action(Vec4::Constant(5.0), Vec4::Constant(0.5)).isApprox(Vec4::Constant(0.65)));
  CHECK(apply_action(Vec4::Ones(), Vec4::Constant(0.95)) == Vec4::Ones());
}

TEST_CASE("goal trajectories") {
  GoalTrajectory descent{goal::Descent{0.1, 1.5}, 5.0};
  CHECK(goal_at(descent, 5.0) == Vec3::Zero());
  CHECK(goal_at(descent, 15.0).isApprox(Vec3(0, 0, 1.0)));
  CHECK(goal_at(descent, 40.0) == Vec3(0, 0, 1.5));

  GoalTrajectory still{goal::Stationary{Vec3(1, 2, 3)}, 5.0};
  CHECK(goal_at(still, 0.0) == Vec3(1, 2, 3));
  CHECK(goal_at(still, 100.0) == Vec3(1, 2, 3));

  const GoalTrajectory shapes[] = {
      {goal::CircleXY{1.0, 20.0}, 5.0}, {goal::CircleYZ{1.0, 20.0}, 5.0}, {goal::Saddle{1.0, 0.5, 20.0}, 5.0}};
  for (const auto& g : shapes) {
    CHECK(goal_at(g, 0.0) == Vec3::Zero());
    CHECK(goal_at(g, 5.0) == Vec3::Zero());
    // Periodic after stabilization.
    CHECK((goal_at(g, 12.3) - goal_at(g, 32.3)).norm() < 1e-12);
    // Continuity across the hand-off and elsewhere.
    for (double t : {5.0, 7.1, 19.99, 33.0}) {
      CHECK((goal_at(g, t + 1e-7) - goal_at(g, t)).norm() < 1e-5);
    }
  }
  // Circle radius about its centre.
  const GoalTrajectory xy{goal::CircleXY{1.0, 20.0}, 5.0};
  for (double t = 5.0; t < 25.0; t += 0.7) {
    CHECK((goal_at(xy, t) - Vec3(-1, 0, 0)).norm() == doctest::Approx(1.0));
    CHECK(goal_at(xy, t).z() == 0.0);
  }
  const GoalTrajectory yz{goal::CircleYZ{1.0, 20.0}, 5.0};
  CHECK(goal_at(yz, 10.0).x() == 0.0);
  const GoalTrajectory saddle{goal::Saddle{1.0, 0.5, 20.0}, 5.0};
  double zmax = 0.0;
  for (double t = 5.0; t < 25.0; t += 0.01) zmax = std::max(zmax, std::abs(goal_at(saddle, t).z()));
  CHECK(zmax == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("reset state") {
  QuadrotorEnv env(hover_config());
  const Observation o = env.reset(1);
  CHECK(o.pos_error == Vec3::Zero());
  CHECK(o.rotation == Mat3::Identity());
  CHECK(o.rotor_speeds(0) == 0.0);
  const double wh = hover_speed(QuadParams{});
  for (int i = 1; i < 4; ++i) CHECK(o.rotor_speeds(i) == doctest::Approx(wh));

  QuadrotorEnv other(hover_config());
  CHECK(other.reset(1).to_vector() == o.to_vector());
}

TEST_CASE("healthy hover stays near zero reward") {
  EnvConfig cfg = hover_config();
  cfg.episode.failed_rotor = 0;
  QuadrotorEnv env(cfg);
  env.reset(0);
  for (int i = 0; i < 100; ++i) {
    const EnvStep s = env.step(Vec4::Zero());
    CHECK(std::abs(s.reward) < 0.05);
    CHECK_FALSE(s.done);
  }
}

TEST_CASE("time limit ends the episode at the horizon") {
  EnvConfig cfg = hover_config();
  cfg.episode.failed_rotor = 0;
  QuadrotorEnv env(cfg);
  env.reset(0);
  EnvStep s;
  for (int i = 0; i < 999; ++i) {
    s = env.step(Vec4::Zero());
    REQUIRE_FALSE(s.done);
  }
  s = env.step(Vec4::Zero());
  CHECK(s.done);
  CHECK(s.reason == Termination::kTimeLimit);
  CHECK(s.remaining_steps == 0);
  CHECK(to_string(s.reason) == "time-limit");
  CHECK_THROWS_AS(env.step(Vec4::Zero()), std::logic_error);
}

TEST_CASE("leaving the divergence ball is a crash") {
  EnvConfig cfg = hover_config();
  cfg.episode.divergence_bound = 0.5;
  QuadrotorEnv env(cfg);
  env.reset(0);
  EnvStep s;
  int n = 0;
  while (!s.done) {
    s = env.step(-Vec4::Ones());  // throttle down and fall
    ++n;
  }
  CHECK(s.reason == Termination::kCrash);
  CHECK(s.observation.pos_error.norm() > 0.5);
  CHECK(s.remaining_steps == 1000 - n);
}

TEST_CASE("failed rotor never spins") {
  EnvConfig cfg = hover_config();
  cfg.episode.failed_rotor = 2;
  QuadrotorEnv env(cfg);
  env.reset(0);
  for (int i = 0; i < 50; ++i) {
    const EnvStep s = env.step(Vec4::Ones());
    CHECK(s.observation.rotor_speeds(1) == 0.0);
    if (s.done) break;
  }
}

TEST_CASE("landing cut-off zeroes every motor") {
  EnvConfig cfg;
  cfg.episode.failed_rotor = 0;
  cfg.episode.cutoff_on_landing = true;
  cfg.episode.horizon_steps = 4000;
  cfg.trajectory = GoalTrajectory{goal::Descent{0.1, 1.5}, 0.0};
  QuadrotorEnv env(cfg);
  env.reset(0);
  // Crude descent controller on the healthy vehicle: track the goal altitude.
  EnvStep s;
  while (!s.done) {
    const double err = s.observation.pos_error.z();  // goal - position, NED
    const double vz = env.state().velocity.z();
    const double target_pwm = hover_speed(cfg.quad) / cfg.quad.omega_max - 0.02 * err + 0.02 * vz;
    const Vec4 a = Vec4::Constant((target_pwm - env.pwm()(0)) / kMaxPwmDelta);
    s = env.step(a);
  }
  CHECK(s.reason == Termination::kLanded);
  CHECK(env.motors_cut());
  CHECK(env.pwm() == Vec4::Zero());
  CHECK(env.state().position.z() >= 1.4);
}

TEST_CASE("wind direction is seeded") {
  EnvConfig cfg = hover_config();
  cfg.wind.speed = 2.0;
  QuadrotorEnv a(cfg), b(cfg);
  a.reset(42);
  b.reset(42);
  CHECK(a.wind().enabled);
  CHECK(a.wind().wind_velocity == b.wind().wind_velocity);
  CHECK(a.wind().wind_velocity.norm() == doctest::Approx(2.0));
  b.reset(43);
  CHECK(a.wind().wind_velocity != b.wind().wind_velocity);

  cfg.wind.speed = 0.0;
  QuadrotorEnv calm(cfg);
  calm.reset(42);
  CHECK_FALSE(calm.wind().enabled);
}

}  // TEST_SUITE
