#include "rotorfall/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rotorfall::nn {
namespace {

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("MLP layer sizes must be positive");
  }
}

bool has_relu(const Mlp& net, std::size_t layer) {
  return layer + 1 < net.num_layers() || net.relu_output;
}

std::string shape_message(const char* what, Eigen::Index got, Eigen::Index want) {
  return std::string(what) + ": expected " + std::to_string(want) + " rows, got " + std::to_string(got);
}

}  // namespace

Mlp Mlp::zeros(std::vector<int> layer_sizes, bool relu_output) {
  check_sizes(layer_sizes);
  Mlp net;
  net.layer_sizes = std::move(layer_sizes);
  net.relu_output = relu_output;
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    net.weights.push_back(Matrix::Zero(net.layer_sizes[l + 1], net.layer_sizes[l]));
    net.biases.push_back(Vector::Zero(net.layer_sizes[l + 1]));
  }
  return net;
}

Mlp Mlp::init(std::vector<int> layer_sizes, std::mt19937_64& rng, bool relu_output) {
  Mlp net = zeros(std::move(layer_sizes), relu_output);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.layer_sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) net.weights[l].data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) net.biases[l](i) = dist(rng);
  }
  return net;
}

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

std::vector<std::span<double>> Mlp::tensors() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
    out.emplace_back(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
  }
  return out;
}

std::vector<std::span<const double>> Mlp::tensors() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
    out.emplace_back(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
  }
  return out;
}

Matrix forward(const Mlp& net, const Matrix& input, MlpCache* cache) {
  if (input.rows() != net.input_size()) {
    throw std::invalid_argument(shape_message("forward", input.rows(), net.input_size()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix x = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = net.weights[l] * x;
    z.colwise() += net.biases[l];
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre_activations.push_back(z);
    }
    x = has_relu(net, l) ? Matrix(z.cwiseMax(0.0)) : std::move(z);
  }
  return x;
}

Vector forward(const Mlp& net, const Vector& input) {
  return forward(net, Matrix(input), nullptr).col(0);
}

Matrix backward(const Mlp& net, const MlpCache& cache, const Matrix& upstream, Mlp* grads) {
  if (cache.inputs.size() != net.num_layers()) {
    throw std::invalid_argument("backward: cache does not match network depth");
  }
  if (upstream.rows() != net.output_size() || upstream.cols() != cache.inputs.front().cols()) {
    throw std::invalid_argument(shape_message("backward upstream", upstream.rows(), net.output_size()));
  }
  if (grads && grads->num_layers() != net.num_layers()) *grads = Mlp::zeros(net.layer_sizes, net.relu_output);

  Matrix g = upstream;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    if (has_relu(net, l)) {
      g = (cache.pre_activations[l].array() > 0.0).select(g, 0.0);
    }
    if (grads) {
      grads->weights[l].noalias() = g * cache.inputs[l].transpose();
      grads->biases[l] = g.rowwise().sum();
    }
    Matrix next = net.weights[l].transpose() * g;
    g = std::move(next);
  }
  return g;
}

Gradients backward(const Mlp& net, const Vector& input, const Vector& upstream) {
  MlpCache cache;
  forward(net, Matrix(input), &cache);
  Gradients out;
  out.params = Mlp::zeros(net.layer_sizes, net.relu_output);
  out.input = backward(net, cache, Matrix(upstream), &out.params).col(0);
  return out;
}

GaussianHead GaussianHead::init(int features, int actions, std::mt19937_64& rng) {
  GaussianHead head;
  head.mean_layer = Mlp::init({features, actions}, rng);
  head.log_std_layer = Mlp::init({features, actions}, rng);
  return head;
}

std::vector<std::span<double>> GaussianHead::tensors() {
  auto out = mean_layer.tensors();
  auto more = log_std_layer.tensors();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

std::vector<std::span<const double>> GaussianHead::tensors() const {
  auto out = mean_layer.tensors();
  auto more = log_std_layer.tensors();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

SquashPass squash_forward(const Matrix& mean, const Matrix& log_std_raw, const Matrix& noise,
                          double log_std_min, double log_std_max) {
  if (mean.rows() != noise.rows() || mean.cols() != noise.cols() || log_std_raw.rows() != mean.rows() ||
      log_std_raw.cols() != mean.cols()) {
    throw std::invalid_argument("squash_forward: mean, log-std and noise shapes differ");
  }
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

  SquashPass p;
  p.mean = mean;
  p.log_std_raw = log_std_raw;
  p.log_std = log_std_raw.cwiseMax(log_std_min).cwiseMin(log_std_max);
  p.stddev = p.log_std.array().exp().matrix();
  p.noise = noise;
  const Matrix u = mean + p.stddev.cwiseProduct(noise);
  p.action = u.array().tanh().matrix();

  const Eigen::ArrayXXd a2 = p.action.array().square();
  const Eigen::ArrayXXd per_dim =
      -0.5 * noise.array().square() - p.log_std.array() - kHalfLog2Pi - (1.0 - a2 + kSquashEpsilon).log();
  p.log_prob = per_dim.colwise().sum().transpose();
  return p;
}

SquashGrad squash_backward(const SquashPass& p, const Matrix& d_action, const Vector& d_log_prob) {
  const Eigen::ArrayXXd a = p.action.array();
  const Eigen::ArrayXXd one_minus_a2 = 1.0 - a.square();
  // d/du of -log(1 - tanh(u)^2 + eps)
  const Eigen::ArrayXXd d_corr = 2.0 * a * one_minus_a2 / (one_minus_a2 + kSquashEpsilon);
  const Eigen::RowVectorXd dlp = d_log_prob.transpose();

  Eigen::ArrayXXd du = d_action.array() * one_minus_a2;
  du += d_corr.rowwise() * dlp.array();

  SquashGrad g;
  g.mean = du.matrix();
  Eigen::ArrayXXd dls = du * (p.stddev.array() * p.noise.array());
  dls.rowwise() -= dlp.array();
  const auto inside = p.log_std_raw.array() == p.log_std.array();
  g.log_std_raw = inside.select(dls, 0.0).matrix();
  return g;
}

SquashedSample sample_squashed(const GaussianHead& head, const Vector& features, const Vector& noise) {
  const Matrix f = features;
  const SquashPass p = squash_forward(forward(head.mean_layer, f), forward(head.log_std_layer, f), Matrix(noise),
                                      head.log_std_min, head.log_std_max);
  return {p.action.col(0), p.log_prob(0)};
}

GaussianPolicy GaussianPolicy::init(int observations, int hidden, int hidden_layers, int actions,
                                    std::mt19937_64& rng) {
  if (hidden_layers < 1) throw std::invalid_argument("policy needs at least one hidden layer");
  std::vector<int> sizes{observations};
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden);
  GaussianPolicy p;
  p.trunk = Mlp::init(sizes, rng, /*relu_output=*/true);
  p.head = GaussianHead::init(hidden, actions, rng);
  return p;
}

GaussianPolicy GaussianPolicy::zeros_like() const {
  GaussianPolicy p;
  p.trunk = Mlp::zeros(trunk.layer_sizes, trunk.relu_output);
  p.head.mean_layer = Mlp::zeros(head.mean_layer.layer_sizes);
  p.head.log_std_layer = Mlp::zeros(head.log_std_layer.layer_sizes);
  p.head.log_std_min = head.log_std_min;
  p.head.log_std_max = head.log_std_max;
  return p;
}

std::vector<std::span<double>> GaussianPolicy::tensors() {
  auto out = trunk.tensors();
  auto more = head.tensors();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

std::vector<std::span<const double>> GaussianPolicy::tensors() const {
  auto out = trunk.tensors();
  auto more = head.tensors();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

PolicyPass policy_forward(const GaussianPolicy& policy, const Matrix& obs, const Matrix& noise) {
  PolicyPass pass;
  pass.features = forward(policy.trunk, obs, &pass.trunk_cache);
  const Matrix mean = forward(policy.head.mean_layer, pass.features, &pass.mean_cache);
  const Matrix log_std = forward(policy.head.log_std_layer, pass.features, &pass.log_std_cache);
  pass.squash = squash_forward(mean, log_std, noise, policy.head.log_std_min, policy.head.log_std_max);
  return pass;
}

Matrix policy_mode(const GaussianPolicy& policy, const Matrix& obs) {
  return forward(policy.head.mean_layer, forward(policy.trunk, obs)).array().tanh().matrix();
}

GaussianPolicy policy_backward(const GaussianPolicy& policy, const PolicyPass& pass, const Matrix& d_action,
                               const Vector& d_log_prob) {
  GaussianPolicy grads = policy.zeros_like();
  const SquashGrad sg = squash_backward(pass.squash, d_action, d_log_prob);
  Matrix d_features = backward(policy.head.mean_layer, pass.mean_cache, sg.mean, &grads.head.mean_layer);
  d_features += backward(policy.head.log_std_layer, pass.log_std_cache, sg.log_std_raw, &grads.head.log_std_layer);
  backward(policy.trunk, pass.trunk_cache, d_features, &grads.trunk);
  return grads;
}

AdamState AdamState::for_tensors(const std::vector<std::span<const double>>& params, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  for (const auto& t : params) {
    s.m.push_back(Vector::Zero(static_cast<Eigen::Index>(t.size())));
    s.v.push_back(Vector::Zero(static_cast<Eigen::Index>(t.size())));
  }
  return s;
}

bool all_finite(const std::vector<std::span<const double>>& tensors) {
  for (const auto& t : tensors) {
    for (double x : t) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

double l2_norm(const std::vector<std::span<const double>>& tensors) {
  double sum = 0.0;
  for (const auto& t : tensors) {
    for (double x : t) sum += x * x;
  }
  return std::sqrt(sum);
}

bool adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || static_cast<Eigen::Index>(params[k].size()) != state.m[k].size()) {
      throw std::invalid_argument("adam_step: tensor " + std::to_string(k) + " shape mismatch");
    }
  }
  if (!all_finite(grads)) return false;

  ++state.step;
  const AdamConfig& c = state.cfg;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(params[k].size());
    Eigen::Map<Eigen::ArrayXd> p(params[k].data(), n);
    const Eigen::Map<const Eigen::ArrayXd> g(grads[k].data(), n);
    Eigen::ArrayXd m = state.m[k].array();
    Eigen::ArrayXd v = state.v[k].array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    p -= c.lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
    state.m[k] = m.matrix();
    state.v[k] = v.matrix();
  }
  return true;
}

}  // namespace rotorfall::nn
