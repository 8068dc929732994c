#pragma once

#include "rotorfall/sac.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace rotorfall {

/// Learner snapshot plus the configuration and counters needed to resume or
/// evaluate it.
///
/// On-disk layout (little-endian, version 1):
///   magic   8 bytes  "RFCKPT01"
///   u32     format version
///   str     effective configuration JSON
///   u64     seed, i64 step, i64 episode, f64 best_return
///   str     RNG state (std::mt19937_64 text form)
///   f64     log_alpha
///   mlp x7  actor trunk, mean layer, log-std layer, q1, q2, q1 target, q2 target
///   f64 x2  log-std bounds
///   adam x4 actor, q1, q2, alpha
/// where str = u64 length + bytes, mlp = u8 relu_output, u32 depth,
/// i32 sizes[depth], then each weight (column-major) and bias as raw f64,
/// and adam = f64 lr, beta1, beta2, eps, i64 step, u32 tensors, then each
/// first and second moment as u64 length + raw f64.
struct Checkpoint {
  std::string config_json;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t episode = 0;
  double best_return = 0.0;
  sac::SacState state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Throws std::runtime_error on I/O failure.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws std::runtime_error on I/O failure, bad magic, unsupported version
/// or truncated data.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rotorfall
