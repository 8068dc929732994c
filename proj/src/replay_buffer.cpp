#include "rotorfall/replay_buffer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rotorfall {

Batch make_batch(std::span<const Transition> transitions) {
  if (transitions.empty()) throw std::invalid_argument("make_batch: no transitions");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const Eigen::Index od = transitions.front().s.size();
  const Eigen::Index ad = transitions.front().a.size();
  Batch b;
  b.obs.resize(od, n);
  b.actions.resize(ad, n);
  b.next_obs.resize(od, n);
  b.rewards.resize(n);
  b.dones.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = transitions[static_cast<std::size_t>(j)];
    b.obs.col(j) = t.s;
    b.actions.col(j) = t.a;
    b.next_obs.col(j) = t.s_next;
    b.rewards(j) = t.r;
    b.dones(j) = t.d;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim)
    : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  if (obs_dim <= 0 || action_dim <= 0) throw std::invalid_argument("replay buffer dimensions must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.s.size() != obs_dim_ || t.s_next.size() != obs_dim_ || t.a.size() != action_dim_) {
    throw std::invalid_argument("transition dimensions do not match the buffer");
  }
  if (t.d != 0.0 && t.d != 1.0) throw std::invalid_argument("transition done flag must be 0 or 1");
  if (!t.s.allFinite() || !t.s_next.allFinite() || !t.a.allFinite() || !std::isfinite(t.r)) {
    throw std::invalid_argument("transition contains non-finite values");
  }

  const std::size_t w = row_width();
  if (size_ < capacity_ && rows_.size() < (cursor_ + 1) * w) rows_.resize((cursor_ + 1) * w);
  double* row = rows_.data() + cursor_ * w;
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < obs_dim_; ++i) row[k++] = t.s(i);
  for (Eigen::Index i = 0; i < action_dim_; ++i) row[k++] = t.a(i);
  row[k++] = t.r;
  for (Eigen::Index i = 0; i < obs_dim_; ++i) row[k++] = t.s_next(i);
  row[k] = t.d;

  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Transition ReplayBuffer::slot(std::size_t index) const {
  const double* row = rows_.data() + index * row_width();
  Transition t;
  t.s = Eigen::Map<const Eigen::VectorXd>(row, obs_dim_);
  row += obs_dim_;
  t.a = Eigen::Map<const Eigen::VectorXd>(row, action_dim_);
  row += action_dim_;
  t.r = *row++;
  t.s_next = Eigen::Map<const Eigen::VectorXd>(row, obs_dim_);
  row += obs_dim_;
  t.d = *row;
  return t;
}

Transition ReplayBuffer::oldest(std::size_t age) const {
  if (age >= size_) throw std::out_of_range("replay buffer age out of range");
  const std::size_t start = size_ < capacity_ ? 0 : cursor_;
  return slot((start + age) % capacity_);
}

Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
  const auto n = static_cast<Eigen::Index>(slots.size());
  Batch b;
  b.obs.resize(obs_dim_, n);
  b.actions.resize(action_dim_, n);
  b.next_obs.resize(obs_dim_, n);
  b.rewards.resize(n);
  b.dones.resize(n);
  const std::size_t w = row_width();
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t s = slots[static_cast<std::size_t>(j)];
    if (s >= size_) throw std::out_of_range("replay buffer slot out of range");
    const double* row = rows_.data() + s * w;
    b.obs.col(j) = Eigen::Map<const Eigen::VectorXd>(row, obs_dim_);
    row += obs_dim_;
    b.actions.col(j) = Eigen::Map<const Eigen::VectorXd>(row, action_dim_);
    row += action_dim_;
    b.rewards(j) = *row++;
    b.next_obs.col(j) = Eigen::Map<const Eigen::VectorXd>(row, obs_dim_);
    row += obs_dim_;
    b.dones(j) = *row;
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (size_ < batch_size) {
    throw std::logic_error("replay buffer holds " + std::to_string(size_) + " transitions, batch needs " +
                           std::to_string(batch_size));
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> slots(batch_size);
  for (auto& s : slots) s = pick(rng);
  return gather(slots);
}

void ReplayBuffer::clear() {
  rows_.clear();
  size_ = 0;
  cursor_ = 0;
}

}  // namespace rotorfall
