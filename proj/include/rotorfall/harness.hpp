#pragma once

#include "rotorfall/checkpoint.hpp"
#include "rotorfall/config.hpp"
#include "rotorfall/env.hpp"
#include "rotorfall/sac.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rotorfall {

enum class Maneuver { kHover, kLand, kCircleXY, kCircleYZ, kSaddle };

inline constexpr std::array<Maneuver, 5> kAllManeuvers{Maneuver::kHover, Maneuver::kLand, Maneuver::kCircleXY,
                                                       Maneuver::kCircleYZ, Maneuver::kSaddle};

std::string_view to_string(Maneuver m);
std::optional<Maneuver> parse_maneuver(std::string_view name);
/// "hover, land, circle-xy, circle-yz, saddle"
std::string maneuver_names();

/// Stationary goal at the origin over the training horizon.
EnvConfig training_env_config(const RunConfig& cfg);
/// Evaluation episode for a maneuver. Windy runs get the longer
/// stabilization window; landing enables the motor cut-off.
EnvConfig maneuver_env_config(const RunConfig& cfg, Maneuver m, double wind_speed, double duration);

/// Maps an observation to an action in [-1, 1]^4.
using Controller = std::function<Vec4(const Observation&)>;

/// Deterministic policy (tanh of the mean) over a private copy of `state`.
Controller policy_controller(const sac::SacState& state, const sac::SacConfig& cfg);
/// Always returns the zero action, i.e. holds the initial PWM.
Controller hold_controller();

/// Undiscounted return where a crash is charged -c1 for every horizon step
/// it leaves unplayed, the value r1 saturates to for a vehicle that keeps
/// drifting away.
double episode_return(double reward_sum, Termination reason, int remaining_steps, const RewardConfig& reward);

/// Extra reward stored with a crash transition: the discounted value of
/// staying in the saturated state forever after.
double crash_penalty(const RewardConfig& reward, double gamma);

struct EvalReport {
  Maneuver maneuver = Maneuver::kHover;
  double wind_speed = 0.0;
  double duration = 0.0;
  /// Position tracking error over the post-stabilization window (m).
  double rmse = 0.0;
  double max_error = 0.0;
  double episode_return = 0.0;
  bool crashed = false;
  bool landed = false;
  int steps = 0;
  double final_z = 0.0;
  Vec4 mean_pwm = Vec4::Zero();
  /// Wall-clock cost of one control step (policy + simulator).
  double mean_step_seconds = 0.0;
};

/// Runs one episode under `controller`. When `trajectory_csv` is set, the
/// per-step log is written there, including rows recorded up to a crash.
EvalReport run_episode(const EnvConfig& env_cfg, Maneuver maneuver, const Controller& controller,
                       std::uint64_t seed, const std::filesystem::path* trajectory_csv = nullptr);

/// Deterministic evaluation of a checkpoint. `cfg` supplies the vehicle and
/// trajectory settings.
EvalReport evaluate(const Checkpoint& ckpt, const RunConfig& cfg, Maneuver maneuver, double wind_speed,
                    double duration, std::uint64_t seed, const std::filesystem::path* trajectory_csv = nullptr);

/// All five maneuvers in order with fixed per-maneuver seeds. Trajectory
/// logs go to `<log_dir>/trajectory_<maneuver>.csv` when `log_dir` is set.
std::vector<EvalReport> maneuver_suite(const Checkpoint& ckpt, const RunConfig& cfg, double wind_speed,
                                       std::uint64_t seed, const std::filesystem::path* log_dir = nullptr);

void write_report_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
std::string format_report_table(const std::vector<EvalReport>& reports);

struct BaselineStats {
  std::vector<double> returns;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Returns of uniformly random actions on the training task.
BaselineStats random_policy_baseline(const RunConfig& cfg, int episodes, std::uint64_t seed);

struct TrainOptions {
  /// Continue from this checkpoint; the replay buffer starts empty.
  std::optional<std::filesystem::path> resume;
  /// Progress lines (one per log interval); may be empty.
  std::function<void(const std::string&)> progress;
};

struct TrainResult {
  /// Environment steps taken by this call (a resumed run counts from its checkpoint).
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  double best_eval_return = 0.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path final_checkpoint;
};

/// Run directory layout:
///   config.echo, metrics.csv, eval.csv, last_eval.csv,
///   checkpoints/{initial,best,final,step_<N>}.ckpt
TrainResult train(const RunConfig& cfg, const std::filesystem::path& out_dir, const TrainOptions& options = {});

/// Learner built from a checkpoint's embedded configuration.
RunConfig checkpoint_config(const Checkpoint& ckpt);

inline constexpr std::string_view kTrajectoryHeader =
    "t,x,y,z,qw,qx,qy,qz,vx,vy,vz,p,q,r,w1,w2,w3,w4,pwm1,pwm2,pwm3,pwm4,goal_x,goal_y,goal_z,reward";
inline constexpr std::string_view kMetricsHeader = "step,episode,ep_reward,q1_loss,q2_loss,pi_loss,alpha";

}  // namespace rotorfall
