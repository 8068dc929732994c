#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rotorfall::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense network: ReLU after every hidden layer, identity on the output
/// layer unless `relu_output` is set. Samples are columns in batched calls.
/// The same type doubles as a gradient or moment container.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // out x in
  std::vector<Vector> biases;
  bool relu_output = false;

  static Mlp zeros(std::vector<int> layer_sizes, bool relu_output = false);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Mlp init(std::vector<int> layer_sizes, std::mt19937_64& rng, bool relu_output = false);

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_params() const;

  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Per-layer inputs and pre-activations recorded by a forward pass.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

Matrix forward(const Mlp& net, const Matrix& input, MlpCache* cache = nullptr);
Vector forward(const Mlp& net, const Vector& input);

/// Reverse pass from `upstream` (dL/doutput). Writes parameter gradients into
/// `grads` when non-null and returns dL/dinput.
Matrix backward(const Mlp& net, const MlpCache& cache, const Matrix& upstream, Mlp* grads);

struct Gradients {
  Mlp params;
  Vector input;
};
Gradients backward(const Mlp& net, const Vector& input, const Vector& upstream);

/// Parallel mean and log-std linear layers over shared features.
struct GaussianHead {
  Mlp mean_layer;
  Mlp log_std_layer;
  double log_std_min = -20.0;
  double log_std_max = 2.0;

  static GaussianHead init(int features, int actions, std::mt19937_64& rng);
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Offset keeping the tanh change-of-variables term finite at saturation.
inline constexpr double kSquashEpsilon = 1e-6;

struct SquashedSample {
  Vector action;
  double log_prob = 0.0;
};

/// Reparameterized sample: u = mean + std * noise, action = tanh(u), with the
/// log-density corrected for the squash.
SquashedSample sample_squashed(const GaussianHead& head, const Vector& features, const Vector& noise);

/// Batched squash bookkeeping (actions x batch).
struct SquashPass {
  Matrix mean;
  Matrix log_std_raw;
  Matrix log_std;
  Matrix stddev;
  Matrix noise;
  Matrix action;
  Vector log_prob;
};

SquashPass squash_forward(const Matrix& mean, const Matrix& log_std_raw, const Matrix& noise,
                          double log_std_min, double log_std_max);

struct SquashGrad {
  Matrix mean;
  Matrix log_std_raw;
};
/// Pulls dL/daction and dL/dlog_prob back to the mean and raw log-std.
SquashGrad squash_backward(const SquashPass& pass, const Matrix& d_action, const Vector& d_log_prob);

/// Trunk (ReLU on every layer) followed by a Gaussian head.
struct GaussianPolicy {
  Mlp trunk;
  GaussianHead head;

  static GaussianPolicy init(int observations, int hidden, int hidden_layers, int actions,
                             std::mt19937_64& rng);
  GaussianPolicy zeros_like() const;
  int action_size() const { return head.mean_layer.output_size(); }
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

struct PolicyPass {
  MlpCache trunk_cache;
  MlpCache mean_cache;
  MlpCache log_std_cache;
  Matrix features;
  SquashPass squash;
};

PolicyPass policy_forward(const GaussianPolicy& policy, const Matrix& obs, const Matrix& noise);
/// tanh(mean) for each column.
Matrix policy_mode(const GaussianPolicy& policy, const Matrix& obs);
GaussianPolicy policy_backward(const GaussianPolicy& policy, const PolicyPass& pass,
                               const Matrix& d_action, const Vector& d_log_prob);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments mirror the flattened parameter tensors of the optimized object.
struct AdamState {
  AdamConfig cfg;
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::int64_t step = 0;

  static AdamState for_tensors(const std::vector<std::span<const double>>& params, AdamConfig cfg);
  template <class Params>
  static AdamState for_params(const Params& params, AdamConfig cfg) {
    return for_tensors(params.tensors(), cfg);
  }
};

/// Bias-corrected Adam update. Returns false, leaving everything untouched,
/// if any gradient entry is non-finite.
bool adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state);

template <class Params>
bool adam_step(Params& params, const Params& grads, AdamState& state) {
  return adam_step(params.tensors(), grads.tensors(), state);
}

bool all_finite(const std::vector<std::span<const double>>& tensors);
double l2_norm(const std::vector<std::span<const double>>& tensors);

}  // namespace rotorfall::nn
