#pragma once

#include <string>
#include <vector>

#include "retex/networks.hpp"
#include "retex/tensor.hpp"

namespace retex {

// CKPT container: magic "CKPT", version:u32, count:u32, then per entry
// name length + UTF-8 name, rank, extents, f32 payload; a trailing CRC32
// covers everything between the header and the checksum. The CRC is
// verified on load and unknown versions are rejected.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Table helpers; the prefix keeps several networks in one file apart.
std::vector<CheckpointEntry> table_to_entries(const ParamTable<float>& params,
                                              const std::string& prefix = "");
void load_into_table(const std::vector<CheckpointEntry>& entries,
                     ParamTable<float>& params, const std::string& prefix = "");

}  // namespace retex
