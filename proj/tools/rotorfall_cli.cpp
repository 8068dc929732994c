#include "rotorfall/checkpoint.hpp"
#include "rotorfall/config.hpp"
#include "rotorfall/harness.hpp"
#include "rotorfall/plot.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace rotorfall;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// Full-scale run: full-width networks and the 15M step budget.
constexpr int kFullHiddenWidth = 256;
constexpr std::int64_t kFullSteps = 15'000'000;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

// Precedence, lowest first: built-in defaults, ROTORFALL_SEED, the config
// file, command-line flags.
RunConfig base_config(const RunConfig& defaults, const Common& common) {
  RunConfig base = defaults;
  if (const char* env = std::getenv("ROTORFALL_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      base.train.seed = v;
    } catch (const std::exception&) {
      throw ConfigError("ROTORFALL_SEED", std::string("not an unsigned integer: '") + env + "'");
    }
  }
  RunConfig cfg = common.config_path.empty() ? base : load_config(common.config_path, base);
  if (common.seed) cfg.train.seed = *common.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Maneuver require_maneuver(const std::string& name) {
  const auto m = parse_maneuver(name);
  if (!m) throw ConfigError("--maneuver", "unknown maneuver '" + name + "'; valid names: " + maneuver_names());
  return *m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rotorfall: SAC flight controller for a quadrotor with a failed rotor"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file overlaid on the defaults")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "RNG seed (fallback: $ROTORFALL_SEED, then train.seed)");
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a policy and write a run directory");
  add_common(train_cmd);
  std::string train_out = "run";
  std::optional<std::int64_t> steps;
  std::optional<int> failed_rotor;
  std::string resume;
  bool full_scale = false;
  bool quiet = false;
  train_cmd->add_option("--out", train_out, "Run directory");
  train_cmd->add_option("--steps", steps, "Total environment steps");
  train_cmd->add_option("--failed-rotor", failed_rotor, "Disabled rotor, 1..4 (0 = healthy)");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_flag("--full-scale", full_scale, "256-wide networks and 15M steps unless --steps is given");
  train_cmd->add_flag("-q,--quiet", quiet, "No progress output");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one maneuver");
  add_common(eval_cmd);
  std::string maneuver_name = "hover";
  double wind = 0.0;
  std::string ckpt_path;
  std::string eval_out = "eval";
  std::optional<double> duration;
  eval_cmd->add_option("--maneuver", maneuver_name, "One of: " + maneuver_names());
  eval_cmd->add_option("--wind", wind, "Wind speed in m/s (direction drawn per episode)");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "Output directory");
  eval_cmd->add_option("--duration", duration, "Episode length in seconds");

  // suite
  auto* suite_cmd = app.add_subcommand("suite", "Evaluate a checkpoint on all maneuvers");
  add_common(suite_cmd);
  suite_cmd->add_option("--wind", wind, "Wind speed in m/s");
  suite_cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  suite_cmd->add_option("--out", eval_out, "Output directory");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render a trajectory log as SVG");
  std::string log_path;
  std::string kind_name = "coords";
  std::string svg_out;
  plot_cmd->add_option("--log", log_path, "Trajectory CSV")->required();
  plot_cmd->add_option("--kind", kind_name, "coords, pwm or traj3d");
  plot_cmd->add_option("--out", svg_out, "SVG path (default: <log>_<kind>.svg)");

  // config
  auto* config_cmd = app.add_subcommand("config", "Print or check the effective configuration");
  add_common(config_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) {
      RunConfig defaults = default_config();
      if (full_scale) {
        defaults.sac.hidden_width = kFullHiddenWidth;
        defaults.train.total_steps = kFullSteps;
      }
      RunConfig cfg = base_config(defaults, common);
      if (steps) cfg.train.total_steps = *steps;
      if (failed_rotor) cfg.episode.failed_rotor = *failed_rotor;
      validate(cfg);

      TrainOptions opts;
      if (!resume.empty()) opts.resume = resume;
      if (!quiet) opts.progress = [](const std::string& line) { std::cerr << line << '\n'; };
      const TrainResult r = train(cfg, train_out, opts);
      std::cout << "trained " << r.steps << " steps over " << r.episodes << " episodes; best eval return "
                << r.best_eval_return << "\n"
                << "final checkpoint: " << r.final_checkpoint.string() << "\n";
      return 0;
    }

    if (*eval_cmd || *suite_cmd) {
      const Maneuver maneuver = *eval_cmd ? require_maneuver(maneuver_name) : Maneuver::kHover;
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      RunConfig cfg = base_config(checkpoint_config(ckpt), common);
      if (duration) {
        if (!(*duration > 0.0)) throw ConfigError("--duration", "must be positive");
        cfg.eval.duration = *duration;
      }
      if (!(wind >= 0.0)) throw ConfigError("--wind", "must be non-negative");
      cfg.wind.speed = wind;
      validate(cfg);
      const fs::path out = eval_out;
      fs::create_directories(out);
      write_text(out / "config.echo", to_json_string(cfg));

      std::vector<EvalReport> reports;
      if (*eval_cmd) {
        const Maneuver m = maneuver;
        const fs::path log = out / ("trajectory_" + std::string(to_string(m)) + ".csv");
        reports.push_back(evaluate(ckpt, cfg, m, wind, cfg.eval.duration, cfg.train.seed, &log));
      } else {
        reports = maneuver_suite(ckpt, cfg, wind, cfg.train.seed, &out);
      }
      write_report_csv(out / "report.csv", reports);
      std::cout << format_report_table(reports);
      return 0;
    }

    if (*plot_cmd) {
      const auto kind = plot::parse_kind(kind_name);
      if (!kind) throw ConfigError("--kind", "unknown plot kind '" + kind_name + "'; valid kinds: coords, pwm, traj3d");
      const plot::TrajectoryLog log = plot::read_trajectory_csv(log_path);
      fs::path out = svg_out;
      if (out.empty()) {
        out = fs::path(log_path);
        out.replace_filename(out.stem().string() + "_" + std::string(plot::to_string(*kind)) + ".svg");
      }
      write_text(out, plot::render_svg(log, *kind));
      std::cout << out.string() << "\n";
      return 0;
    }

    if (*config_cmd) {
      std::cout << to_json_string(base_config(default_config(), common));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const plot::CsvError& e) {
    std::cerr << "malformed log " << log_path << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
