#include "rotorfall/nn.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace rotorfall;
using nn::Matrix;
using nn::Vector;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("forward arithmetic") {
  nn::Mlp zero = nn::Mlp::zeros({3, 2});
  zero.biases[0] = Vector::Constant(2, 1.5);
  CHECK(nn::forward(zero, Vector(Vector::Constant(3, 9.0))) == Vector::Constant(2, 1.5));

  nn::Mlp tiny = nn::Mlp::zeros({1, 1});
  tiny.weights[0](0, 0) = 2.0;
  tiny.biases[0](0) = 1.0;
  CHECK(nn::forward(tiny, Vector(Vector::Constant(1, 3.0)))(0) == 7.0);

  std::mt19937_64 rng(1);
  const nn::Mlp net = nn::Mlp::init({22, 64, 64, 1}, rng);
  CHECK(net.num_params() == 22 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
  for (int i = 0; i < 20; ++i) CHECK(nn::forward(net, random_matrix(22, 5, rng)).allFinite());
  CHECK_THROWS_AS(nn::forward(net, Matrix(Matrix::Zero(21, 1))), std::invalid_argument);
}

TEST_CASE("initialization bounds") {
  std::mt19937_64 rng(2);
  const nn::Mlp net = nn::Mlp::init({26, 64, 1}, rng);
  CHECK(net.weights[0].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(26.0));
  CHECK(net.weights[1].cwiseAbs().maxCoeff() <= 1.0 / 8.0);
}

TEST_CASE("batched forward equals per-sample forward") {
  std::mt19937_64 rng(3);
  const nn::Mlp net = nn::Mlp::init({5, 7, 3}, rng);
  const Matrix x = random_matrix(5, 4, rng);
  const Matrix y = nn::forward(net, x);
  for (int j = 0; j < 4; ++j) CHECK((y.col(j) - nn::forward(net, Vector(x.col(j)))).norm() < 1e-14);
}

TEST_CASE("relu blocks gradient at negative pre-activation") {
  nn::Mlp net = nn::Mlp::zeros({1, 1, 1});
  net.weights[0](0, 0) = 1.0;
  net.biases[0](0) = -5.0;
  net.weights[1](0, 0) = 1.0;
  const nn::Gradients g = nn::backward(net, Vector::Constant(1, 1.0), Vector::Constant(1, 1.0));
  CHECK(g.input(0) == 0.0);
  CHECK(g.params.weights[0](0, 0) == 0.0);
  CHECK(g.params.biases[1](0) == 1.0);
}

TEST_CASE("mlp gradients match central differences") {
  std::mt19937_64 rng(4);
  nn::Mlp net = nn::Mlp::init({26, 32, 32, 32, 1}, rng);
  const Matrix x = random_matrix(26, 3, rng);
  const Matrix up = random_matrix(1, 3, rng);

  nn::MlpCache cache;
  nn::forward(net, x, &cache);
  nn::Mlp grads;
  const Matrix dx = nn::backward(net, cache, up, &grads);

  auto objective = [&](std::vector<char>& kinks) {
    kinks.clear();
    nn::MlpCache c;
    const double v = (up.array() * nn::forward(net, x, &c).array()).sum();
    oracle::append_relu_signature(net, c, kinks);
    return v;
  };
  const auto rep = oracle::central_difference_check(net.tensors(), std::as_const(grads).tensors(), objective);
  CHECK(rep.checked > 2000);
  CHECK(rep.max_rel_error < 1e-4);

  Matrix xp = x;
  const auto input_rep = oracle::central_difference_check(
      {std::span<double>(xp.data(), static_cast<std::size_t>(xp.size()))},
      {std::span<const double>(dx.data(), static_cast<std::size_t>(dx.size()))}, [&](std::vector<char>& kinks) {
        kinks.clear();
        nn::MlpCache c;
        const double v = (up.array() * nn::forward(net, xp, &c).array()).sum();
        oracle::append_relu_signature(net, c, kinks);
        return v;
      });
  CHECK(input_rep.max_rel_error < 1e-4);
}

TEST_CASE("squashed sample at the mode") {
  nn::GaussianHead head;
  head.mean_layer = nn::Mlp::zeros({3, 4});
  head.log_std_layer = nn::Mlp::zeros({3, 4});
  const nn::SquashedSample s = nn::sample_squashed(head, Vector::Ones(3), Vector::Zero(4));
  CHECK(s.action == Vector::Zero(4));
  CHECK(s.log_prob == doctest::Approx(4.0 * std::log(1.0 / std::sqrt(2.0 * std::numbers::pi))));
  CHECK(s.log_prob == doctest::Approx(-3.6758).epsilon(1e-4));
}

TEST_CASE("squashed density matches the change-of-variables oracle") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const Matrix mean = random_matrix(4, 1, rng);
    const Matrix log_std = 0.5 * random_matrix(4, 1, rng);
    const Matrix noise = random_matrix(4, 1, rng);
    const nn::SquashPass p = nn::squash_forward(mean, log_std, noise, -20.0, 2.0);
    CHECK(p.action.cwiseAbs().maxCoeff() < 1.0);
    CHECK((p.action - (mean + log_std.array().exp().matrix().cwiseProduct(noise)).array().tanh().matrix()).norm() <
          1e-14);
    const std::vector<double> mu(mean.data(), mean.data() + 4);
    const std::vector<double> ls(log_std.data(), log_std.data() + 4);
    const std::vector<double> ep(noise.data(), noise.data() + 4);
    CHECK(p.log_prob(0) == doctest::Approx(oracle::squashed_log_prob(mu, ls, ep)).epsilon(1e-12));
  }
}

TEST_CASE("squashed density integrates to one") {
  // 1-D: integrate exp(log p(a)) over a in (-1, 1) by the midpoint rule.
  const double mu = 0.4, log_sigma = -0.3;
  const double sigma = std::exp(log_sigma);
  const int n = 200000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = -1.0 + (i + 0.5) * 2.0 / n;
    const double u = std::atanh(a);
    const double eps = (u - mu) / sigma;
    const nn::SquashPass p = nn::squash_forward(Matrix::Constant(1, 1, mu), Matrix::Constant(1, 1, log_sigma),
                                                Matrix::Constant(1, 1, eps), -20.0, 2.0);
    total += std::exp(p.log_prob(0)) * 2.0 / n;
  }
  // The 1e-6 offset perturbs the density slightly near saturation.
  CHECK(total == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("log-std is clamped") {
  const nn::SquashPass p = nn::squash_forward(Matrix::Zero(2, 1), (Matrix(2, 1) << -50.0, 9.0).finished(),
                                              Matrix::Zero(2, 1), -20.0, 2.0);
  CHECK(p.log_std(0) == -20.0);
  CHECK(p.log_std(1) == 2.0);
}

TEST_CASE("policy gradients match central differences") {
  std::mt19937_64 rng(6);
  nn::GaussianPolicy pol = nn::GaussianPolicy::init(22, 24, 2, 4, rng);
  const Matrix obs = random_matrix(22, 3, rng);
  const Matrix noise = random_matrix(4, 3, rng);
  const Matrix c_action = random_matrix(4, 3, rng);
  const Vector c_logp = random_matrix(3, 1, rng);

  const nn::PolicyPass pass = nn::policy_forward(pol, obs, noise);
  const nn::GaussianPolicy grads = nn::policy_backward(pol, pass, c_action, c_logp);

  auto objective = [&](std::vector<char>& kinks) {
    kinks.clear();
    const nn::PolicyPass p = nn::policy_forward(pol, obs, noise);
    oracle::append_relu_signature(pol.trunk, p.trunk_cache, kinks);
    for (Eigen::Index i = 0; i < p.squash.log_std.size(); ++i) {
      kinks.push_back(p.squash.log_std.data()[i] == p.squash.log_std_raw.data()[i] ? 1 : 0);
    }
    return (c_action.array() * p.squash.action.array()).sum() + c_logp.dot(p.squash.log_prob);
  };
  const auto rep = oracle::central_difference_check(pol.tensors(), grads.tensors(), objective);
  CHECK(rep.checked > 1000);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("adam") {
  SUBCASE("first step moves each parameter by about lr") {
    std::vector<double> w{1.0, -2.0, 3.0};
    const std::vector<double> g{0.5, -7.0, 1e-3};
    nn::AdamState st = nn::AdamState::for_tensors({std::span<const double>(w)}, {.lr = 0.01});
    CHECK(nn::adam_step({std::span<double>(w)}, {std::span<const double>(g)}, st));
    CHECK(w[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(3.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-9));
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> w{1.0, 2.0};
    const std::vector<double> g{0.0, 0.0};
    nn::AdamState st = nn::AdamState::for_tensors({std::span<const double>(w)}, {});
    nn::adam_step({std::span<double>(w)}, {std::span<const double>(g)}, st);
    CHECK(w == std::vector<double>{1.0, 2.0});
  }
  SUBCASE("non-finite gradient is rejected without side effects") {
    std::vector<double> w{1.0, 2.0};
    const std::vector<double> g{0.1, std::nan("")};
    nn::AdamState st = nn::AdamState::for_tensors({std::span<const double>(w)}, {});
    CHECK_FALSE(nn::adam_step({std::span<double>(w)}, {std::span<const double>(g)}, st));
    CHECK(w == std::vector<double>{1.0, 2.0});
    CHECK(st.step == 0);
  }
  SUBCASE("deterministic") {
    std::mt19937_64 rng(7);
    nn::Mlp a = nn::Mlp::init({3, 4, 1}, rng);
    nn::Mlp b = a;
    const nn::Mlp g = nn::Mlp::init({3, 4, 1}, rng);
    nn::AdamState sa = nn::AdamState::for_params(a, {});
    nn::AdamState sb = nn::AdamState::for_params(b, {});
    nn::adam_step(a, g, sa);
    nn::adam_step(b, g, sb);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.biases[1] == b.biases[1]);
  }
}

}  // TEST_SUITE
