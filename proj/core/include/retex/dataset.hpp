#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace retex {

// One view on disk: <id>_<pose>.png plus <id>_<pose>.uvm. A subject may
// additionally carry <id>_tex.png with its ground-truth texture.
struct ViewRecord {
  std::string id;
  std::string pose;
  std::filesystem::path image;
  std::filesystem::path uvm;
};

struct PairRecord {
  ViewRecord source;
  ViewRecord target;
  std::optional<std::filesystem::path> gt_texture;
};

enum class Split { kTrain, kTest };

// Deterministic id-based split: each id lands in exactly one split
// regardless of directory order.
Split id_split(const std::string& id, unsigned test_percent = 20);

// Discovers quadruplets by the naming convention; within each id every
// ordered pose pair (A→B and B→A) becomes a record, n poses giving
// n·(n−1) pairs. Ordering is deterministic (ids then poses, lexicographic).
std::vector<PairRecord> dataset_index(const std::filesystem::path& dir);

std::vector<PairRecord> filter_split(const std::vector<PairRecord>& pairs,
                                     Split split, unsigned test_percent = 20);

}  // namespace retex
