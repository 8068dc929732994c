#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace rotorfall {

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  /// 1 only when the episode ended in an absorbing state.
  double d = 0.0;
};

/// Column-per-sample view of a set of transitions.
struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_obs;
  Eigen::VectorXd dones;

  Eigen::Index size() const { return rewards.size(); }
};

Batch make_batch(std::span<const Transition> transitions);

/// Fixed-capacity FIFO store with uniform sampling (with replacement).
/// Storage grows with the contents, so a large capacity costs nothing up front.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim);

  /// Throws std::invalid_argument on wrong sizes, non-finite entries or a
  /// done flag outside {0, 1}. Evicts the oldest transition when full.
  void push(const Transition& t);
  /// Throws std::logic_error if fewer than `batch_size` transitions are held.
  Batch sample(std::size_t batch_size, std::mt19937_64& rng) const;
  /// Indices are storage slots in [0, size()).
  Batch gather(std::span<const std::size_t> slots) const;
  /// `age` 0 is the oldest transition still held.
  Transition oldest(std::size_t age) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  void clear();

 private:
  std::size_t row_width() const { return static_cast<std::size_t>(2 * obs_dim_ + action_dim_ + 2); }
  Transition slot(std::size_t index) const;

  std::size_t capacity_;
  int obs_dim_;
  int action_dim_;
  std::vector<double> rows_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace rotorfall
