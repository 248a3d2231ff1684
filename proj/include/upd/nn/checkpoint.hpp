#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>

#include "upd/nn/params.hpp"

namespace upd::nn {

// Byte layout (all integers little-endian):
//
//   magic        8 bytes  "UPDCKPT\0"
//   version      u32      currently 1
//   arch         11 x i32 embed_layers, hidden, actor_layers, critic_layers,
//                         gru_hidden, activation (0 tanh, 1 relu), layernorm,
//                         moa_layers, moa_hidden, history_len, action_embed
//   obs_len      i32
//   n_actions    i32
//   step         u64      environment steps trained
//   n_segments   u32
//   per segment: u16 name length, name bytes, u32 rows, u32 cols,
//                rows*cols IEEE-754 float32 values (row-major)
//   checksum     u64      FNV-1a of every preceding byte
struct Checkpoint {
  PolicyParams params;
  std::uint64_t step = 0;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

std::string checkpoint_to_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Content hash of the serialized checkpoint, as 16 hex digits.
std::string checkpoint_hash(const Checkpoint& ckpt);

}  // namespace upd::nn
