#pragma once

// Checkpoint container, little-endian throughout:
//
//   "DADC"            4 bytes magic
//   u16 version       = 1
//   u32 meta_len      followed by meta_len bytes of UTF-8 JSON metadata
//   u32 count         number of tensor entries
//   count x entry:
//     u16 name_len, name bytes   hierarchical name, e.g. "core.fine.rpt0.attn.w_q"
//     u8  frozen                 1 when the optimizer must not update it
//     u8  rank
//     rank x u32 dims
//     prod(dims) x f32           row-major payload
//
// Model checkpoints carry {"kind": "model", "network": {...}, "epoch": k,
// "run": {...}} as metadata; optimizer-state files use the same container with
// {"kind": "optimizer", ...} and entries named "<branch>.m.<param>" /
// "<branch>.v.<param>".

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dad/network.hpp"
#include "dad/train.hpp"

namespace dad {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  bool frozen = false;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Every parameter of `net`, in collection order, with the network config in
// the metadata.
Checkpoint capture_network(Network<float>& net);
// Loads values into a network built from the same config.
void restore_network(Network<float>& net, const Checkpoint& ckpt);

Checkpoint capture_optimizers(Trainer& trainer);
void restore_optimizers(Trainer& trainer, const Checkpoint& ckpt);

}  // namespace dad
