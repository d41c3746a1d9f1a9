#include "retex/dataset.hpp"

#include <algorithm>
#include <map>

namespace retex {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Split id_split(const std::string& id, unsigned test_percent) {
  return (fnv1a(id) % 100) < test_percent ? Split::kTest : Split::kTrain;
}

std::vector<PairRecord> dataset_index(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  // id -> pose -> partially filled view
  std::map<std::string, std::map<std::string, ViewRecord>> views;
  std::map<std::string, fs::path> textures;
  if (!fs::exists(dir)) return {};
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    const std::string ext = p.extension().string();
    if (ext != ".png" && ext != ".uvm") continue;
    const std::string stem = p.stem().string();
    const size_t sep = stem.rfind('_');
    if (sep == std::string::npos || sep == 0 || sep + 1 >= stem.size()) {
      continue;
    }
    const std::string id = stem.substr(0, sep);
    const std::string pose = stem.substr(sep + 1);
    if (pose == "tex") {
      if (ext == ".png") textures[id] = p;
      continue;
    }
    ViewRecord& view = views[id][pose];
    view.id = id;
    view.pose = pose;
    if (ext == ".png") {
      view.image = p;
    } else {
      view.uvm = p;
    }
  }
  std::vector<PairRecord> pairs;
  for (const auto& [id, poses] : views) {
    std::vector<const ViewRecord*> complete;
    for (const auto& [pose, view] : poses) {
      if (!view.image.empty() && !view.uvm.empty()) complete.push_back(&view);
    }
    const auto tex = textures.find(id);
    for (const ViewRecord* a : complete) {
      for (const ViewRecord* b : complete) {
        if (a == b) continue;
        PairRecord rec;
        rec.source = *a;
        rec.target = *b;
        if (tex != textures.end()) rec.gt_texture = tex->second;
        pairs.push_back(std::move(rec));
      }
    }
  }
  return pairs;
}

std::vector<PairRecord> filter_split(const std::vector<PairRecord>& pairs,
                                     Split split, unsigned test_percent) {
  std::vector<PairRecord> out;
  for (const auto& p : pairs) {
    if (id_split(p.source.id, test_percent) == split) out.push_back(p);
  }
  return out;
}

}  // namespace retex
