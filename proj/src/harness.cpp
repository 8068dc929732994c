#include "rotorfall/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rotorfall {
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::ofstream open_csv(const fs::path& path, std::string_view header, bool append = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const bool fresh = !append || !fs::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (fresh) out << header << '\n';
  return out;
}

void write_trajectory_row(std::ostream& out, const QuadrotorEnv& env, const Vec3& goal, double reward) {
  const RigidBodyState& s = env.state();
  const Vec4& pwm = env.pwm();
  out << num(env.time());
  for (int i = 0; i < 3; ++i) out << ',' << num(s.position(i));
  out << ',' << num(s.attitude.w()) << ',' << num(s.attitude.x()) << ',' << num(s.attitude.y()) << ','
      << num(s.attitude.z());
  for (int i = 0; i < 3; ++i) out << ',' << num(s.velocity(i));
  for (int i = 0; i < 3; ++i) out << ',' << num(s.body_rates(i));
  for (int i = 0; i < 4; ++i) out << ',' << num(s.rotor_speeds(i));
  for (int i = 0; i < 4; ++i) out << ',' << num(pwm(i));
  for (int i = 0; i < 3; ++i) out << ',' << num(goal(i));
  out << ',' << num(reward) << '\n';
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Checkpoint make_checkpoint(const RunConfig& cfg, const sac::SacState& state, std::int64_t step,
                           std::int64_t episode, double best) {
  Checkpoint c;
  c.config_json = to_json_string(cfg);
  c.seed = cfg.train.seed;
  c.step = step;
  c.episode = episode;
  c.best_return = best;
  c.state = state;
  return c;
}

}  // namespace

std::string_view to_string(Maneuver m) {
  switch (m) {
    case Maneuver::kHover: return "hover";
    case Maneuver::kLand: return "land";
    case Maneuver::kCircleXY: return "circle-xy";
    case Maneuver::kCircleYZ: return "circle-yz";
    case Maneuver::kSaddle: return "saddle";
  }
  return "unknown";
}

std::optional<Maneuver> parse_maneuver(std::string_view name) {
  for (Maneuver m : kAllManeuvers) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string maneuver_names() {
  std::string out;
  for (Maneuver m : kAllManeuvers) {
    if (!out.empty()) out += ", ";
    out += to_string(m);
  }
  return out;
}

EnvConfig training_env_config(const RunConfig& cfg) {
  EnvConfig e;
  e.quad = cfg.quad;
  e.episode = cfg.episode;
  e.episode.cutoff_on_landing = false;
  e.reward = cfg.reward;
  e.trajectory = GoalTrajectory{goal::Stationary{}, 0.0};
  e.wind = WindSettings{0.0, cfg.wind.drag_coeff};
  return e;
}

EnvConfig maneuver_env_config(const RunConfig& cfg, Maneuver m, double wind_speed, double duration) {
  if (!(duration > 0.0)) throw std::invalid_argument("evaluation duration must be positive");
  if (!(wind_speed >= 0.0)) throw std::invalid_argument("wind speed must be non-negative");
  EnvConfig e = training_env_config(cfg);
  e.episode.horizon_steps = static_cast<int>(std::lround(duration / cfg.episode.dt));
  e.wind = WindSettings{wind_speed, cfg.wind.drag_coeff};

  const TrajectorySettings& t = cfg.trajectory;
  e.trajectory.stabilize_time = wind_speed > 0.0 ? t.wind_stabilize_time : t.stabilize_time;
  switch (m) {
    case Maneuver::kHover: e.trajectory.shape = goal::Stationary{}; break;
    case Maneuver::kLand:
      e.trajectory.shape = goal::Descent{t.descent_rate, t.descent_floor};
      e.episode.cutoff_on_landing = true;
      break;
    case Maneuver::kCircleXY: e.trajectory.shape = goal::CircleXY{t.circle_radius, t.circle_period}; break;
    case Maneuver::kCircleYZ: e.trajectory.shape = goal::CircleYZ{t.circle_radius, t.circle_period}; break;
    case Maneuver::kSaddle:
      e.trajectory.shape = goal::Saddle{t.saddle_radius, t.saddle_amplitude, t.saddle_period};
      break;
  }
  return e;
}

Controller policy_controller(const sac::SacState& state, const sac::SacConfig& cfg) {
  auto actor = std::make_shared<const nn::GaussianPolicy>(state.actor);
  auto scfg = std::make_shared<const sac::SacConfig>(cfg);
  return [actor, scfg](const Observation& obs) -> Vec4 {
    const nn::Matrix x = sac::network_input(*scfg, nn::Matrix(obs.to_vector()));
    return nn::policy_mode(*actor, x).col(0);
  };
}

Controller hold_controller() {
  return [](const Observation&) -> Vec4 { return Vec4::Zero(); };
}

double episode_return(double reward_sum, Termination reason, int remaining_steps, const RewardConfig& reward) {
  if (reason != Termination::kCrash) return reward_sum;
  return reward_sum - reward.c1 * static_cast<double>(remaining_steps);
}

double crash_penalty(const RewardConfig& reward, double gamma) {
  return -reward.c1 * gamma / (1.0 - gamma);
}

EvalReport run_episode(const EnvConfig& env_cfg, Maneuver maneuver, const Controller& controller,
                       std::uint64_t seed, const fs::path* trajectory_csv) {
  QuadrotorEnv env(env_cfg);
  Observation obs = env.reset(seed);

  std::ofstream log;
  if (trajectory_csv) {
    log = open_csv(*trajectory_csv, kTrajectoryHeader);
    write_trajectory_row(log, env, env.current_goal(), 0.0);
  }

  EvalReport rep;
  rep.maneuver = maneuver;
  rep.wind_speed = env_cfg.wind.speed;
  rep.duration = env_cfg.episode.horizon_steps * env_cfg.episode.dt;

  const double window_start = env_cfg.trajectory.stabilize_time;
  double sq_sum = 0.0;
  int window_count = 0;
  double reward_sum = 0.0;
  double seconds = 0.0;
  Vec4 pwm_sum = Vec4::Zero();
  EnvStep last;

  while (!env.done()) {
    const bool cut_before = env.motors_cut();
    const auto t0 = std::chrono::steady_clock::now();
    const Vec4 action = controller(obs);
    last = env.step(action);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    reward_sum += last.reward;
    pwm_sum += env.pwm();
    obs = last.observation;
    if (log.is_open()) write_trajectory_row(log, env, env.current_goal(), last.reward);

    if (env.time() >= window_start - 1e-12 && !cut_before) {
      const double e = obs.pos_error.norm();
      sq_sum += e * e;
      rep.max_error = std::max(rep.max_error, e);
      ++window_count;
    }
  }

  rep.steps = env.steps();
  rep.crashed = last.reason == Termination::kCrash;
  rep.landed = last.reason == Termination::kLanded;
  rep.final_z = env.state().position.z();
  if (window_count > 0) {
    rep.rmse = std::sqrt(sq_sum / window_count);
  } else {
    rep.rmse = rep.max_error = std::numeric_limits<double>::quiet_NaN();
  }
  rep.episode_return = episode_return(reward_sum, last.reason, last.remaining_steps, env_cfg.reward);
  rep.mean_pwm = pwm_sum / std::max(1, rep.steps);
  rep.mean_step_seconds = seconds / std::max(1, rep.steps);
  return rep;
}

RunConfig checkpoint_config(const Checkpoint& ckpt) {
  if (ckpt.config_json.empty()) return default_config();
  return parse_config(ckpt.config_json, default_config());
}

EvalReport evaluate(const Checkpoint& ckpt, const RunConfig& cfg, Maneuver maneuver, double wind_speed,
                    double duration, std::uint64_t seed, const fs::path* trajectory_csv) {
  const sac::SacConfig sac_cfg = ckpt.config_json.empty() ? cfg.sac : checkpoint_config(ckpt).sac;
  const EnvConfig env_cfg = maneuver_env_config(cfg, maneuver, wind_speed, duration);
  return run_episode(env_cfg, maneuver, policy_controller(ckpt.state, sac_cfg), seed, trajectory_csv);
}

std::vector<EvalReport> maneuver_suite(const Checkpoint& ckpt, const RunConfig& cfg, double wind_speed,
                                       std::uint64_t seed, const fs::path* log_dir) {
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < kAllManeuvers.size(); ++i) {
    const Maneuver m = kAllManeuvers[i];
    std::optional<fs::path> log;
    if (log_dir) log = *log_dir / ("trajectory_" + std::string(to_string(m)) + ".csv");
    try {
      reports.push_back(evaluate(ckpt, cfg, m, wind_speed, cfg.eval.duration, mix_seed(seed, i),
                                 log ? &*log : nullptr));
    } catch (const std::exception&) {
      EvalReport failed;
      failed.maneuver = m;
      failed.wind_speed = wind_speed;
      failed.crashed = true;
      failed.rmse = std::numeric_limits<double>::quiet_NaN();
      failed.max_error = std::numeric_limits<double>::quiet_NaN();
      failed.episode_return = std::numeric_limits<double>::quiet_NaN();
      reports.push_back(failed);
    }
  }
  return reports;
}

void write_report_csv(const fs::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream out = open_csv(path,
                               "maneuver,wind,duration,rmse,max_error,return,crashed,landed,steps,final_z,"
                               "mean_pwm1,mean_pwm2,mean_pwm3,mean_pwm4,mean_step_seconds");
  for (const auto& r : reports) {
    out << to_string(r.maneuver) << ',' << num(r.wind_speed) << ',' << num(r.duration) << ',' << num(r.rmse) << ','
        << num(r.max_error) << ',' << num(r.episode_return) << ',' << (r.crashed ? 1 : 0) << ','
        << (r.landed ? 1 : 0) << ',' << r.steps << ',' << num(r.final_z);
    for (int i = 0; i < 4; ++i) out << ',' << num(r.mean_pwm(i));
    out << ',' << num(r.mean_step_seconds) << '\n';
  }
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "maneuver" << std::right << std::setw(6) << "wind" << std::setw(10)
      << "rmse[m]" << std::setw(10) << "max[m]" << std::setw(12) << "return" << std::setw(8) << "crash"
      << std::setw(8) << "landed" << std::setw(8) << "steps" << std::setw(10) << "step[us]" << '\n';
  out << std::fixed;
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << to_string(r.maneuver) << std::right << std::setprecision(1) << std::setw(6)
        << r.wind_speed << std::setprecision(3) << std::setw(10) << r.rmse << std::setw(10) << r.max_error
        << std::setprecision(1) << std::setw(12) << r.episode_return << std::setw(8) << (r.crashed ? "yes" : "no")
        << std::setw(8) << (r.landed ? "yes" : "no") << std::setw(8) << r.steps << std::setprecision(1)
        << std::setw(10) << r.mean_step_seconds * 1e6 << '\n';
  }
  return out.str();
}

BaselineStats random_policy_baseline(const RunConfig& cfg, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("baseline needs at least one episode");
  std::mt19937_64 rng(seed);
  const EnvConfig env_cfg = training_env_config(cfg);
  BaselineStats stats;
  for (int e = 0; e < episodes; ++e) {
    const Controller random = [&rng](const Observation&) -> Vec4 { return sac::uniform_action(kActionSize, rng); };
    stats.returns.push_back(run_episode(env_cfg, Maneuver::kHover, random, mix_seed(seed, e)).episode_return);
  }
  const double n = static_cast<double>(stats.returns.size());
  stats.mean = std::accumulate(stats.returns.begin(), stats.returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : stats.returns) var += (r - stats.mean) * (r - stats.mean);
  stats.stddev = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return stats;
}

TrainResult train(const RunConfig& cfg, const fs::path& out_dir, const TrainOptions& options) {
  validate(cfg);
  const fs::path ckpt_dir = out_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  {
    std::ofstream echo(out_dir / "config.echo", std::ios::trunc);
    if (!echo) throw std::runtime_error("cannot write " + (out_dir / "config.echo").string());
    echo << to_json_string(cfg);
  }

  const sac::SacConfig& scfg = cfg.sac;
  sac::SacState state;
  std::int64_t step = 0;
  std::int64_t episode = 0;
  double best = -std::numeric_limits<double>::infinity();
  const bool resuming = options.resume.has_value();
  if (resuming) {
    Checkpoint ck = load_checkpoint(*options.resume);
    state = std::move(ck.state);
    step = ck.step;
    episode = ck.episode;
    best = ck.best_return;
  } else {
    state = sac::SacState::init(scfg, cfg.train.seed);
  }

  const EnvConfig env_cfg = training_env_config(cfg);
  const double terminal_penalty = crash_penalty(cfg.reward, scfg.gamma);
  ReplayBuffer buffer(scfg.buffer_capacity, scfg.obs_dim, scfg.action_dim);
  QuadrotorEnv env(env_cfg);
  Observation obs = env.reset(mix_seed(cfg.train.seed, static_cast<std::uint64_t>(episode)));

  std::ofstream metrics = open_csv(out_dir / "metrics.csv", kMetricsHeader, resuming);
  std::ofstream evals = open_csv(out_dir / "eval.csv", "step,return,crashed,steps,rmse", resuming);

  TrainResult result;
  result.best_checkpoint = ckpt_dir / "best.ckpt";
  result.final_checkpoint = ckpt_dir / "final.ckpt";

  auto run_eval = [&](std::int64_t at_step) {
    const fs::path last = out_dir / "last_eval.csv";
    const EvalReport rep = run_episode(env_cfg, Maneuver::kHover, policy_controller(state, scfg),
                                       mix_seed(cfg.train.seed, 0xE7A1), &last);
    evals << at_step << ',' << num(rep.episode_return) << ',' << (rep.crashed ? 1 : 0) << ',' << rep.steps << ','
          << num(rep.rmse) << '\n';
    evals.flush();
    if (rep.episode_return > best) {
      best = rep.episode_return;
      save_checkpoint(result.best_checkpoint, make_checkpoint(cfg, state, at_step, episode, best));
    }
    return rep;
  };

  if (!resuming) {
    save_checkpoint(ckpt_dir / "initial.ckpt", make_checkpoint(cfg, state, 0, 0, best));
    run_eval(0);
  }

  double episode_reward = 0.0;
  double last_episode_return = std::numeric_limits<double>::quiet_NaN();
  double interval_return_sum = 0.0;
  int interval_episodes = 0;
  sac::UpdateStats interval_sum;
  int interval_updates = 0;
  int rejected_updates = 0;
  const std::int64_t first_step = step;

  while (step < cfg.train.total_steps) {
    ++step;
    const Eigen::VectorXd s = obs.to_vector();
    const bool warmup = !resuming && step <= scfg.warmup_steps;
    const Vec4 action = warmup ? Vec4(sac::uniform_action(scfg.action_dim, state.rng))
                               : Vec4(sac::act(state, scfg, s, sac::ActMode::kStochastic));
    const EnvStep es = env.step(action);
    const bool crashed = es.reason == Termination::kCrash;
    buffer.push(Transition{s, action, es.reward + (crashed ? terminal_penalty : 0.0), es.observation.to_vector(),
                           crashed ? 1.0 : 0.0});
    episode_reward += es.reward;

    if (!warmup && buffer.size() >= static_cast<std::size_t>(scfg.batch_size)) {
      const Batch batch = buffer.sample(static_cast<std::size_t>(scfg.batch_size), state.rng);
      const sac::UpdateStats u = sac::update(batch, state, scfg);
      if (!u.applied) ++rejected_updates;
      interval_sum.q1_loss += u.q1_loss;
      interval_sum.q2_loss += u.q2_loss;
      interval_sum.pi_loss += u.pi_loss;
      interval_sum.alpha += u.alpha;
      ++interval_updates;
    }

    if (es.done) {
      last_episode_return = episode_return(episode_reward, es.reason, es.remaining_steps, cfg.reward);
      interval_return_sum += last_episode_return;
      ++interval_episodes;
      ++episode;
      episode_reward = 0.0;
      obs = env.reset(mix_seed(cfg.train.seed, static_cast<std::uint64_t>(episode)));
    } else {
      obs = es.observation;
    }

    if (step % cfg.train.log_interval == 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const double ep = interval_episodes > 0 ? interval_return_sum / interval_episodes : last_episode_return;
      const double k = static_cast<double>(interval_updates);
      metrics << step << ',' << episode << ',' << num(ep) << ','
              << num(interval_updates ? interval_sum.q1_loss / k : nan) << ','
              << num(interval_updates ? interval_sum.q2_loss / k : nan) << ','
              << num(interval_updates ? interval_sum.pi_loss / k : nan) << ',' << num(state.alpha()) << '\n';
      metrics.flush();
      if (options.progress) {
        std::ostringstream msg;
        msg << "step " << step << " episodes " << episode << " return " << num(ep) << " q1 "
            << num(interval_updates ? interval_sum.q1_loss / k : nan) << " alpha " << num(state.alpha());
        if (rejected_updates > 0) msg << " rejected_updates " << rejected_updates;
        options.progress(msg.str());
      }
      interval_return_sum = 0.0;
      interval_episodes = 0;
      interval_sum = {};
      interval_updates = 0;
    }
    if (step % cfg.train.eval_interval == 0) {
      const EvalReport rep = run_eval(step);
      if (options.progress) {
        options.progress("eval step " + std::to_string(step) + " return " + num(rep.episode_return) +
                         (rep.crashed ? " crashed" : "") + " rmse " + num(rep.rmse));
      }
    }
    if (step % cfg.train.checkpoint_interval == 0) {
      save_checkpoint(ckpt_dir / ("step_" + std::to_string(step) + ".ckpt"),
                      make_checkpoint(cfg, state, step, episode, best));
    }
  }

  save_checkpoint(result.final_checkpoint, make_checkpoint(cfg, state, step, episode, best));
  result.steps = step - first_step;
  result.episodes = episode;
  result.best_eval_return = best;
  return result;
}

}  // namespace rotorfall
