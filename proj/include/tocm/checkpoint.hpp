#pragma once

// Checkpoint container. Layout, little-endian throughout:
//   "TOCM" | u32 version | u32 entry count |
//   per tensor: u32 name length | name bytes | u32 rank | u32 dims... |
//   f32 values (row major)
// Entries are written sorted by name, so save -> load -> save is
// byte-identical.

#include <string>
#include <vector>

#include "tocm/nn.hpp"
#include "tocm/tensor.hpp"

namespace tocm {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  std::vector<std::pair<std::string, Tensor>> entries;  // sorted by name

  const Tensor* find(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) != nullptr; }
};

CheckpointData snapshot_stores(const std::vector<const ParamStore*>& stores);

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Overwrites every parameter of the store from same-named entries.
// Throws on a missing entry or a shape mismatch.
void restore_store(ParamStore& store, const CheckpointData& data);

}  // namespace tocm
