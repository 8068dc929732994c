#include "rotorfall/sac.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rotorfall::sac {
namespace {

std::vector<int> critic_sizes(const SacConfig& cfg) {
  std::vector<int> sizes{cfg.obs_dim + cfg.action_dim};
  for (int i = 0; i < cfg.critic_hidden_layers; ++i) sizes.push_back(cfg.hidden_width);
  sizes.push_back(1);
  return sizes;
}

double mean_squared_error(const Vector& q, const Vector& target) {
  return (q - target).squaredNorm() / static_cast<double>(q.size());
}

}  // namespace

void validate(const SacConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("sac." + key + ": " + why);
  };
  if (c.obs_dim <= 0) fail("obs_dim", "must be positive");
  if (c.action_dim <= 0) fail("action_dim", "must be positive");
  if (c.hidden_width <= 0) fail("hidden_width", "must be positive");
  if (c.actor_hidden_layers < 1) fail("actor_hidden_layers", "must be at least 1");
  if (c.critic_hidden_layers < 1) fail("critic_hidden_layers", "must be at least 1");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) fail("gamma", "must lie in (0, 1)");
  if (!(c.rho > 0.0 && c.rho <= 1.0)) fail("rho", "must lie in (0, 1]");
  if (c.batch_size <= 0) fail("batch_size", "must be positive");
  if (static_cast<std::size_t>(c.batch_size) > c.buffer_capacity) fail("batch_size", "exceeds buffer_capacity");
  if (!(c.lr_q > 0.0)) fail("lr_q", "must be positive");
  if (!(c.lr_pi > 0.0)) fail("lr_pi", "must be positive");
  if (!(c.lr_alpha > 0.0)) fail("lr_alpha", "must be positive");
  if (!(c.initial_alpha > 0.0)) fail("initial_alpha", "must be positive");
  if (!(c.epsilon_explore >= 0.0 && c.epsilon_explore <= 1.0)) fail("epsilon_explore", "must lie in [0, 1]");
  if (c.warmup_steps < 0) fail("warmup_steps", "must be non-negative");
  if (!c.obs_scale.empty() && c.obs_scale.size() != static_cast<std::size_t>(c.obs_dim)) {
    fail("obs_scale", "must be empty or have obs_dim entries");
  }
}

SacState SacState::init(const SacConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  SacState s;
  s.rng.seed(seed);
  s.actor = nn::GaussianPolicy::init(cfg.obs_dim, cfg.hidden_width, cfg.actor_hidden_layers, cfg.action_dim, s.rng);
  s.q1 = nn::Mlp::init(critic_sizes(cfg), s.rng);
  s.q2 = nn::Mlp::init(critic_sizes(cfg), s.rng);
  s.q1_target = s.q1;
  s.q2_target = s.q2;
  s.log_alpha = std::log(cfg.initial_alpha);
  s.actor_opt = nn::AdamState::for_params(s.actor, {.lr = cfg.lr_pi});
  s.q1_opt = nn::AdamState::for_params(s.q1, {.lr = cfg.lr_q});
  s.q2_opt = nn::AdamState::for_params(s.q2, {.lr = cfg.lr_q});
  const double la = s.log_alpha;
  s.alpha_opt = nn::AdamState::for_tensors({std::span<const double>(&la, 1)}, {.lr = cfg.lr_alpha});
  return s;
}

double SacState::alpha() const { return std::exp(log_alpha); }

Matrix network_input(const SacConfig& cfg, const Matrix& obs) {
  if (cfg.obs_scale.empty()) return obs;
  const Eigen::Map<const Vector> scale(cfg.obs_scale.data(), static_cast<Eigen::Index>(cfg.obs_scale.size()));
  return scale.asDiagonal() * obs;
}

Matrix critic_input(const Matrix& net_obs, const Matrix& actions) {
  Matrix x(net_obs.rows() + actions.rows(), net_obs.cols());
  x.topRows(net_obs.rows()) = net_obs;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

QEstimate twin_min_q(const nn::Mlp& q1, const nn::Mlp& q2, const Matrix& net_obs, const Matrix& actions,
                     bool with_grad) {
  const Matrix x = critic_input(net_obs, actions);
  nn::MlpCache c1, c2;
  const Vector v1 = nn::forward(q1, x, with_grad ? &c1 : nullptr).row(0).transpose();
  const Vector v2 = nn::forward(q2, x, with_grad ? &c2 : nullptr).row(0).transpose();

  QEstimate out;
  out.q = v1.cwiseMin(v2);
  if (with_grad) {
    Matrix up1 = Matrix::Zero(1, x.cols());
    Matrix up2 = Matrix::Zero(1, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (v1(j) <= v2(j)) {
        up1(0, j) = 1.0;
      } else {
        up2(0, j) = 1.0;
      }
    }
    const Matrix dx = nn::backward(q1, c1, up1, nullptr) + nn::backward(q2, c2, up2, nullptr);
    out.dq_da = dx.bottomRows(actions.rows());
  }
  return out;
}

Vector compute_target(const Batch& batch, const SacState& state, const SacConfig& cfg, const Matrix& noise) {
  if (batch.size() == 0) throw std::invalid_argument("compute_target: empty batch");
  const Matrix next = network_input(cfg, batch.next_obs);
  const nn::PolicyPass pass = nn::policy_forward(state.actor, next, noise);
  const QEstimate q = twin_min_q(state.q1_target, state.q2_target, next, pass.squash.action, false);
  const Vector soft_value = q.q - state.alpha() * pass.squash.log_prob;
  return batch.rewards + cfg.gamma * (1.0 - batch.dones.array()).matrix().cwiseProduct(soft_value);
}

CriticUpdate critic_update(const Batch& batch, const Vector& targets, SacState& state, const SacConfig& cfg) {
  const Matrix x = critic_input(network_input(cfg, batch.obs), batch.actions);
  const double n = static_cast<double>(batch.size());

  nn::MlpCache c1, c2;
  const Vector v1 = nn::forward(state.q1, x, &c1).row(0).transpose();
  const Vector v2 = nn::forward(state.q2, x, &c2).row(0).transpose();

  CriticUpdate out;
  out.q1_loss = mean_squared_error(v1, targets);
  out.q2_loss = mean_squared_error(v2, targets);
  if (!std::isfinite(out.q1_loss) || !std::isfinite(out.q2_loss)) return out;

  nn::Mlp g1, g2;
  nn::backward(state.q1, c1, (2.0 / n) * (v1 - targets).transpose(), &g1);
  nn::backward(state.q2, c2, (2.0 / n) * (v2 - targets).transpose(), &g2);
  out.applied = nn::adam_step(state.q1, g1, state.q1_opt);
  out.applied = nn::adam_step(state.q2, g2, state.q2_opt) && out.applied;
  return out;
}

ActorUpdate actor_update(const Batch& batch, SacState& state, const SacConfig& cfg, const Matrix& noise,
                         const CriticFn& critic) {
  const Matrix obs = network_input(cfg, batch.obs);
  const nn::PolicyPass pass = nn::policy_forward(state.actor, obs, noise);
  const Matrix& actions = pass.squash.action;
  const nn::Mlp& c1 = cfg.actor_uses_target_critics ? state.q1_target : state.q1;
  const nn::Mlp& c2 = cfg.actor_uses_target_critics ? state.q2_target : state.q2;
  const QEstimate q = critic ? critic(obs, actions) : twin_min_q(c1, c2, obs, actions, true);

  const double n = static_cast<double>(batch.size());
  const double alpha = state.alpha();
  ActorUpdate out;
  out.mean_log_prob = pass.squash.log_prob.mean();
  out.loss = (alpha * pass.squash.log_prob - q.q).mean();
  if (!std::isfinite(out.loss)) return out;

  const Matrix d_action = -q.dq_da / n;
  const Vector d_log_prob = Vector::Constant(batch.size(), alpha / n);
  const nn::GaussianPolicy grads = nn::policy_backward(state.actor, pass, d_action, d_log_prob);
  out.grad_norm = nn::l2_norm(grads.tensors());
  out.applied = nn::adam_step(state.actor, grads, state.actor_opt);
  return out;
}

double alpha_update(SacState& state, double mean_log_prob, const SacConfig& cfg) {
  // J = -alpha * (log pi + H*), so dJ/dlog(alpha) = -alpha * (log pi + H*).
  const double grad = -state.alpha() * (mean_log_prob + cfg.target_entropy);
  const double g[1] = {grad};
  nn::adam_step({std::span<double>(&state.log_alpha, 1)}, {std::span<const double>(g, 1)}, state.alpha_opt);
  return state.log_alpha;
}

void polyak_update(SacState& state, double rho) {
  auto blend = [rho](nn::Mlp& target, const nn::Mlp& online) {
    auto dst = target.tensors();
    const auto src = online.tensors();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] = rho * src[k][i] + (1.0 - rho) * dst[k][i];
    }
  };
  blend(state.q1_target, state.q1);
  blend(state.q2_target, state.q2);
}

Vector uniform_action(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector a(dim);
  for (int i = 0; i < dim; ++i) a(i) = u(rng);
  return a;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Vector act(SacState& state, const SacConfig& cfg, const Vector& obs, ActMode mode) {
  if (obs.size() != cfg.obs_dim) {
    throw std::invalid_argument("act: observation has " + std::to_string(obs.size()) + " entries, expected " +
                                std::to_string(cfg.obs_dim));
  }
  const Matrix x = network_input(cfg, Matrix(obs));
  if (mode == ActMode::kDeterministic) return nn::policy_mode(state.actor, x).col(0);

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(state.rng) < cfg.epsilon_explore) return uniform_action(cfg.action_dim, state.rng);
  const Matrix noise = standard_normal(cfg.action_dim, 1, state.rng);
  return nn::policy_forward(state.actor, x, noise).squash.action.col(0);
}

UpdateStats update(const Batch& batch, SacState& state, const SacConfig& cfg) {
  UpdateStats stats;
  const Matrix target_noise = standard_normal(cfg.action_dim, batch.size(), state.rng);
  const Vector targets = compute_target(batch, state, cfg, target_noise);

  const CriticUpdate cu = critic_update(batch, targets, state, cfg);
  stats.q1_loss = cu.q1_loss;
  stats.q2_loss = cu.q2_loss;

  const Matrix actor_noise = standard_normal(cfg.action_dim, batch.size(), state.rng);
  const ActorUpdate au = actor_update(batch, state, cfg, actor_noise);
  stats.pi_loss = au.loss;
  stats.entropy = -au.mean_log_prob;

  if (std::isfinite(au.mean_log_prob)) alpha_update(state, au.mean_log_prob, cfg);
  polyak_update(state, cfg.rho);
  stats.alpha = state.alpha();
  stats.applied = cu.applied && au.applied;
  return stats;
}

}  // namespace rotorfall::sac
