#include "rotorfall/sac.hpp"
#include "support/bandit.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace rotorfall;
using sac::Matrix;
using sac::Vector;

namespace {

sac::SacConfig small_config(int obs = 3, int act = 2) {
  sac::SacConfig cfg;
  cfg.obs_dim = obs;
  cfg.action_dim = act;
  cfg.hidden_width = 16;
  cfg.batch_size = 8;
  cfg.buffer_capacity = 1000;
  cfg.target_entropy = -act;
  return cfg;
}

void zero_out(nn::Mlp& net) { net = nn::Mlp::zeros(net.layer_sizes, net.relu_output); }

void zero_out(nn::GaussianPolicy& p) { p = p.zeros_like(); }

Batch constant_batch(int n, int obs_dim, int act_dim, double r, double d) {
  Batch b;
  b.obs = Matrix::Ones(obs_dim, n);
  b.actions = Matrix::Zero(act_dim, n);
  b.rewards = Vector::Constant(n, r);
  b.next_obs = Matrix::Ones(obs_dim, n);
  b.dones = Vector::Constant(n, d);
  return b;
}

}  // namespace

TEST_SUITE("sac") {

TEST_CASE("soft bellman target") {
  sac::SacConfig cfg = small_config(3, 4);
  sac::SacState st = sac::SacState::init(cfg, 1);
  zero_out(st.actor);
  zero_out(st.q1_target);
  zero_out(st.q2_target);
  st.q1_target.biases.back()(0) = 2.0;
  st.q2_target.biases.back()(0) = 5.0;
  // At zero noise the action is 0 and log pi = 4 * (-log sigma - log sqrt(2 pi)) = -3.
  const double log_sigma = 0.75 - 0.5 * std::log(2.0 * std::numbers::pi);
  st.actor.head.log_std_layer.biases[0] = Vector::Constant(4, log_sigma);
  st.log_alpha = std::log(0.2);
  cfg.gamma = 0.99;

  const Batch b = constant_batch(2, 3, 4, 1.0, 0.0);
  const Vector y = sac::compute_target(b, st, cfg, Matrix::Zero(4, 2));
  CHECK(y(0) == doctest::Approx(3.574).epsilon(1e-6));

  const Batch terminal = constant_batch(2, 3, 4, 1.0, 1.0);
  CHECK(sac::compute_target(terminal, st, cfg, Matrix::Zero(4, 2))(1) == 1.0);

  cfg.gamma = 1e-300;
  CHECK(sac::compute_target(b, st, cfg, Matrix::Zero(4, 2))(0) == doctest::Approx(1.0));
}

TEST_CASE("twin minimum picks the smaller critic per sample") {
  sac::SacConfig cfg = small_config();
  sac::SacState st = sac::SacState::init(cfg, 2);
  const Matrix obs = Matrix::Random(3, 16);
  const Matrix act = Matrix::Random(2, 16);
  const sac::QEstimate q = sac::twin_min_q(st.q1, st.q2, obs, act, true);
  const Matrix x = sac::critic_input(obs, act);
  const Matrix v1 = nn::forward(st.q1, x);
  const Matrix v2 = nn::forward(st.q2, x);
  for (int j = 0; j < 16; ++j) CHECK(q.q(j) == std::min(v1(0, j), v2(0, j)));
  CHECK(q.dq_da.rows() == 2);

  // Action gradient against central differences of the minimum.
  const double h = 1e-6;
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 2; ++i) {
      Matrix up = act, down = act;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd = (sac::twin_min_q(st.q1, st.q2, obs, up, false).q(j) -
                         sac::twin_min_q(st.q1, st.q2, obs, down, false).q(j)) /
                        (2.0 * h);
      CHECK(q.dq_da(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("actor objective uses the twin minimum of the selected critics") {
  sac::SacConfig cfg = small_config();
  sac::SacState st = sac::SacState::init(cfg, 21);
  // Four distinct critics so every pairing is distinguishable.
  std::mt19937_64 init_rng(5);
  st.q1_target = nn::Mlp::init(st.q1.layer_sizes, init_rng);
  st.q2_target = nn::Mlp::init(st.q1.layer_sizes, init_rng);
  Batch b = constant_batch(8, 3, 2, 0.0, 0.0);
  b.obs = Matrix::Random(3, 8);
  std::mt19937_64 rng(6);
  const Matrix noise = sac::standard_normal(2, 8, rng);

  auto expected = [&](const nn::Mlp& a, const nn::Mlp& c) {
    const Matrix obs = sac::network_input(cfg, b.obs);
    const nn::PolicyPass pass = nn::policy_forward(st.actor, obs, noise);
    const Matrix x = sac::critic_input(obs, pass.squash.action);
    const Matrix va = nn::forward(a, x);
    const Matrix vc = nn::forward(c, x);
    double loss = 0.0;
    for (int j = 0; j < 8; ++j) loss += st.alpha() * pass.squash.log_prob(j) - std::min(va(0, j), vc(0, j));
    return loss / 8.0;
  };

  const double with_targets = expected(st.q1_target, st.q2_target);
  const double with_online = expected(st.q1, st.q2);
  CHECK(std::abs(with_targets - with_online) > 1e-6);

  sac::SacState a = st;
  CHECK(sac::actor_update(b, a, cfg, noise).loss == doctest::Approx(with_targets).epsilon(1e-12));
  cfg.actor_uses_target_critics = false;
  sac::SacState o = st;
  CHECK(sac::actor_update(b, o, cfg, noise).loss == doctest::Approx(with_online).epsilon(1e-12));
}

TEST_CASE("critic update") {
  sac::SacConfig cfg = small_config();

  SUBCASE("critics already at the target give zero loss") {
    sac::SacState st = sac::SacState::init(cfg, 3);
    zero_out(st.q1);
    zero_out(st.q2);
    const Batch b = constant_batch(4, 3, 2, 0.0, 1.0);
    const nn::Mlp before = st.q1;
    const sac::CriticUpdate u = sac::critic_update(b, Vector::Zero(4), st, cfg);
    CHECK(u.q1_loss == 0.0);
    CHECK(st.q1.biases.back() == before.biases.back());
  }
  SUBCASE("single sample loss is the squared error") {
    sac::SacState st = sac::SacState::init(cfg, 4);
    const Batch b = constant_batch(1, 3, 2, 0.0, 1.0);
    const double q = nn::forward(st.q1, sac::critic_input(b.obs, b.actions))(0, 0);
    const sac::CriticUpdate u = sac::critic_update(b, Vector::Constant(1, 1.25), st, cfg);
    CHECK(u.q1_loss == doctest::Approx((q - 1.25) * (q - 1.25)));
  }
  SUBCASE("repeated updates on a fixed batch reduce the loss") {
    sac::SacState st = sac::SacState::init(cfg, 5);
    std::mt19937_64 rng(5);
    Batch b;
    b.obs = sac::standard_normal(3, 32, rng);
    b.actions = sac::standard_normal(2, 32, rng);
    b.rewards = sac::standard_normal(32, 1, rng);
    b.next_obs = b.obs;
    b.dones = Vector::Ones(32);
    const Vector targets = b.rewards;
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
      const sac::CriticUpdate u = sac::critic_update(b, targets, st, cfg);
      CHECK(u.q1_loss < prev);
      prev = u.q1_loss;
    }
  }
  SUBCASE("non-finite targets abort the step") {
    sac::SacState st = sac::SacState::init(cfg, 6);
    const nn::Mlp before = st.q1;
    const Batch b = constant_batch(2, 3, 2, 0.0, 1.0);
    const sac::CriticUpdate u = sac::critic_update(b, Vector::Constant(2, std::nan("")), st, cfg);
    CHECK_FALSE(u.applied);
    CHECK(st.q1.weights[0] == before.weights[0]);
  }
}

TEST_CASE("actor update") {
  sac::SacConfig cfg = small_config(1, 1);
  cfg.batch_size = 64;
  const Batch b = constant_batch(64, 1, 1, 0.0, 1.0);

  SUBCASE("no temperature and a flat critic give no gradient") {
    sac::SacState st = sac::SacState::init(cfg, 7);
    st.log_alpha = -1e3;
    const sac::CriticFn flat = [](const Matrix&, const Matrix& a) {
      return sac::QEstimate{Vector::Constant(a.cols(), 3.0), Matrix::Zero(a.rows(), a.cols())};
    };
    std::mt19937_64 rng(1);
    const sac::ActorUpdate u = sac::actor_update(b, st, cfg, sac::standard_normal(1, 64, rng), flat);
    CHECK(u.grad_norm < 1e-12);
  }

  SUBCASE("quadratic critic pulls the mode to its maximum") {
    sac::SacState st = sac::SacState::init(cfg, 8);
    st.log_alpha = -1e3;
    const sac::CriticFn quad = [](const Matrix&, const Matrix& a) {
      const Eigen::ArrayXXd d = a.array() - 0.5;
      return sac::QEstimate{(-(d.square())).colwise().sum().transpose().matrix(), (-2.0 * d).matrix()};
    };
    const Vector one = Vector::Ones(1);
    const double start = std::abs(sac::act(st, cfg, one, sac::ActMode::kDeterministic)(0) - 0.5);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 3000; ++i) sac::actor_update(b, st, cfg, sac::standard_normal(1, 64, rng), quad);
    const double end = std::abs(sac::act(st, cfg, one, sac::ActMode::kDeterministic)(0) - 0.5);
    CHECK(end < start);
    CHECK(end < 0.02);
  }

  SUBCASE("entropy term alone drives the width to the entropy maximum") {
    // Through tanh, entropy peaks at a finite width, so a narrow policy
    // widens and a wide one narrows.
    const double optimum = oracle::max_entropy_log_std();
    CHECK(optimum == doctest::Approx(-0.1347).epsilon(1e-2));
    const sac::CriticFn zero = [](const Matrix&, const Matrix& a) {
      return sac::QEstimate{Vector::Zero(a.cols()), Matrix::Zero(a.rows(), a.cols())};
    };
    const Matrix x = Matrix::Ones(1, 1);
    for (double start : {-2.0, 1.5}) {
      CAPTURE(start);
      sac::SacState st = sac::SacState::init(cfg, 9);
      st.log_alpha = 0.0;
      st.actor.head.log_std_layer.weights.back().setZero();
      st.actor.head.log_std_layer.biases.back().setConstant(start);
      auto log_std = [&] {
        return nn::forward(st.actor.head.log_std_layer, nn::forward(st.actor.trunk, x))(0, 0);
      };
      std::mt19937_64 rng(3);
      for (int i = 0; i < 200; ++i) sac::actor_update(b, st, cfg, sac::standard_normal(1, 64, rng), zero);
      const double mid = log_std();
      if (start < optimum) {
        CHECK(mid > start);
      } else {
        CHECK(mid < start);
      }
      for (int i = 0; i < 3000; ++i) sac::actor_update(b, st, cfg, sac::standard_normal(1, 64, rng), zero);
      CHECK(std::abs(log_std() - optimum) < 0.15);
    }
  }
}

TEST_CASE("temperature update") {
  const sac::SacConfig cfg = small_config(3, 4);  // target entropy -4
  sac::SacState st = sac::SacState::init(cfg, 10);

  const double la = st.log_alpha;
  sac::alpha_update(st, /*mean_log_prob=*/4.0, cfg);  // entropy exactly at target
  CHECK(st.log_alpha == la);

  sac::alpha_update(st, 6.0, cfg);  // entropy -6, below target
  CHECK(st.log_alpha > la);

  sac::SacState other = sac::SacState::init(cfg, 10);
  sac::alpha_update(other, 1.0, cfg);  // entropy -1, above target
  CHECK(other.log_alpha < la);
}

TEST_CASE("polyak averaging") {
  const sac::SacConfig cfg = small_config();
  sac::SacState st = sac::SacState::init(cfg, 11);
  for (auto t : st.q1.tensors()) std::fill(t.begin(), t.end(), 1.0);
  for (auto t : st.q1_target.tensors()) std::fill(t.begin(), t.end(), 0.0);
  const nn::Mlp q2_target = st.q2_target;

  sac::SacState copy = st;
  sac::polyak_update(copy, 0.05);
  for (auto t : std::as_const(copy.q1_target).tensors()) {
    for (double v : t) CHECK(v == doctest::Approx(0.05));
  }

  copy = st;
  sac::polyak_update(copy, 1.0);
  CHECK(copy.q2_target.weights[1] == st.q2.weights[1]);
  CHECK(copy.q1_target.weights[0] == st.q1.weights[0]);

  // rho -> 0 leaves targets untouched (0 itself is rejected by validation).
  copy = st;
  sac::polyak_update(copy, 0.0);
  CHECK(copy.q2_target.weights[0] == q2_target.weights[0]);
}

TEST_CASE("one learner iteration updates every component exactly once") {
  const sac::SacConfig cfg = small_config();
  const sac::SacState before = sac::SacState::init(cfg, 12);
  Batch b = constant_batch(8, 3, 2, -1.0, 0.0);
  b.obs = Matrix::Random(3, 8);
  b.next_obs = Matrix::Random(3, 8);
  b.actions = Matrix::Random(2, 8) * 0.9;

  sac::SacState after = before;
  const sac::UpdateStats u = sac::update(b, after, cfg);
  REQUIRE(u.applied);
  CHECK(after.q1_opt.step == 1);
  CHECK(after.q2_opt.step == 1);
  CHECK(after.actor_opt.step == 1);
  CHECK(after.alpha_opt.step == 1);
  CHECK(after.log_alpha != before.log_alpha);
  CHECK(after.q1.weights[0] != before.q1.weights[0]);
  CHECK(after.actor.trunk.weights[0] != before.actor.trunk.weights[0]);

  // Targets move only by the polyak blend of the freshly updated critics.
  const auto tgt = std::as_const(after.q1_target).tensors();
  const auto old_tgt = std::as_const(before.q1_target).tensors();
  const auto online = std::as_const(after.q1).tensors();
  double worst = 0.0;
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    for (std::size_t i = 0; i < tgt[k].size(); ++i) {
      worst = std::max(worst, std::abs(tgt[k][i] - (cfg.rho * online[k][i] + (1.0 - cfg.rho) * old_tgt[k][i])));
    }
  }
  CHECK(worst < 1e-15);

  // Same seed, same batch: identical result.
  sac::SacState again = before;
  sac::update(b, again, cfg);
  CHECK(again.actor.head.mean_layer.weights[0] == after.actor.head.mean_layer.weights[0]);
  CHECK(again.q2_target.biases.back() == after.q2_target.biases.back());
  CHECK(again.log_alpha == after.log_alpha);
}

TEST_CASE("acting") {
  sac::SacConfig cfg = small_config(3, 4);
  sac::SacState st = sac::SacState::init(cfg, 12);
  zero_out(st.actor);
  const Vector obs = Vector::Ones(3);
  CHECK(sac::act(st, cfg, obs, sac::ActMode::kDeterministic) == Vector::Zero(4));
  CHECK_THROWS_AS(sac::act(st, cfg, Vector::Ones(2), sac::ActMode::kDeterministic), std::invalid_argument);

  // Deterministic acting does not consume randomness.
  sac::SacState st2 = st;
  sac::act(st2, cfg, obs, sac::ActMode::kDeterministic);
  CHECK(st2.rng == st.rng);

  cfg.epsilon_explore = 1.0;
  st.actor.head.mean_layer.biases[0] = Vector::Constant(4, 3.0);  // policy itself would give ~0.995
  Vector sum = Vector::Zero(4);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector a = sac::act(st, cfg, obs, sac::ActMode::kStochastic);
    CHECK_UNARY(a.cwiseAbs().maxCoeff() <= 1.0);
    sum += a;
  }
  CHECK((sum / n).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("config validation names the field") {
  sac::SacConfig cfg = small_config();
  cfg.gamma = 1.0;
  try {
    sac::validate(cfg);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("sac.gamma") != std::string::npos);
  }
}

TEST_CASE("bandit learner moves toward the optimum") {
  const bandit::Trace t = bandit::run(4000, 3);
  CHECK(std::abs(t.final_action - bandit::kOptimum) < 0.1);
  CHECK(bandit::window_mean(t.q_loss, 0.8, 1.0) < bandit::window_mean(t.q_loss, 0.0, 0.2));
}

}  // TEST_SUITE
