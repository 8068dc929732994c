#pragma once

#include "rotorfall/nn.hpp"
#include "rotorfall/replay_buffer.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace rotorfall::sac {

using nn::Matrix;
using nn::Vector;

struct SacConfig {
  int obs_dim = 22;
  int action_dim = 4;
  int hidden_width = 256;
  int actor_hidden_layers = 2;
  int critic_hidden_layers = 3;

  double gamma = 0.99;
  /// Polyak step: target <- rho * online + (1 - rho) * target.
  double rho = 0.05;
  int batch_size = 256;
  std::size_t buffer_capacity = 1000000;
  double lr_q = 3e-4;
  double lr_pi = 3e-4;
  double lr_alpha = 3e-4;
  double target_entropy = -4.0;
  double initial_alpha = 1.0;
  double epsilon_explore = 0.001;
  int warmup_steps = 1000;
  /// The policy gradient differentiates the target critics, as in the
  /// original formulation; false uses the online critics instead.
  bool actor_uses_target_critics = true;
  /// Per-feature multipliers applied to observations before they enter any
  /// network. Empty means identity.
  std::vector<double> obs_scale;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const SacConfig& cfg);

/// Everything the learner owns: online and target networks, temperature,
/// optimizer moments and the random stream.
struct SacState {
  nn::GaussianPolicy actor;
  nn::Mlp q1;
  nn::Mlp q2;
  nn::Mlp q1_target;
  nn::Mlp q2_target;
  double log_alpha = 0.0;
  nn::AdamState actor_opt;
  nn::AdamState q1_opt;
  nn::AdamState q2_opt;
  nn::AdamState alpha_opt;
  std::mt19937_64 rng;

  static SacState init(const SacConfig& cfg, std::uint64_t seed);
  double alpha() const;
};

/// Scaled observations as seen by the networks.
Matrix network_input(const SacConfig& cfg, const Matrix& obs);
/// Observation rows stacked over action rows.
Matrix critic_input(const Matrix& net_obs, const Matrix& actions);

/// Q values and their action gradients for a batch.
struct QEstimate {
  Vector q;
  Matrix dq_da;
};

/// Element-wise minimum of two critics. `dq_da` follows whichever critic is
/// smaller for each sample (ties go to the first).
QEstimate twin_min_q(const nn::Mlp& q1, const nn::Mlp& q2, const Matrix& net_obs, const Matrix& actions,
                     bool with_grad);

/// Critic seen by the actor update; defaults to the twin minimum of the
/// target or online critics per `actor_uses_target_critics`.
using CriticFn = std::function<QEstimate(const Matrix& net_obs, const Matrix& actions)>;

/// Soft Bellman targets; `noise` (actions x batch) drives a' ~ pi(.|s').
Vector compute_target(const Batch& batch, const SacState& state, const SacConfig& cfg, const Matrix& noise);

struct CriticUpdate {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  bool applied = false;
};
/// One Adam step on each critic toward the shared targets. Losses are those
/// before the step.
CriticUpdate critic_update(const Batch& batch, const Vector& targets, SacState& state, const SacConfig& cfg);

struct ActorUpdate {
  double loss = 0.0;
  double mean_log_prob = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
};
/// One Adam step minimizing E[alpha * log pi(a|s) - Q(s, a)] with fresh
/// reparameterized actions.
ActorUpdate actor_update(const Batch& batch, SacState& state, const SacConfig& cfg, const Matrix& noise,
                         const CriticFn& critic = {});

/// One Adam step on log(alpha) descending E[-alpha * (log pi + target_entropy)].
double alpha_update(SacState& state, double mean_log_prob, const SacConfig& cfg);

void polyak_update(SacState& state, double rho);

enum class ActMode { kStochastic, kDeterministic };

/// Stochastic mode takes a uniform random action with probability
/// epsilon_explore, otherwise samples the squashed Gaussian. Deterministic
/// mode returns tanh(mean) and leaves the RNG untouched.
Vector act(SacState& state, const SacConfig& cfg, const Vector& obs, ActMode mode);

Vector uniform_action(int dim, std::mt19937_64& rng);
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

struct UpdateStats {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double pi_loss = 0.0;
  double alpha = 0.0;
  /// Negative mean log-probability of the fresh actor samples.
  double entropy = 0.0;
  bool applied = false;
};

/// Loop body of one learner iteration: targets, critics, actor, temperature,
/// then target networks.
UpdateStats update(const Batch& batch, SacState& state, const SacConfig& cfg);

}  // namespace rotorfall::sac
