#include "retex/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace retex {

using nlohmann::json;

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull:
      return "full";
    case AblationMode::kNoDeform:
      return "no_deform";
    case AblationMode::kRgbInpainting:
      return "rgb_inpainting";
    case AblationMode::kNoTextures:
      return "no_textures";
  }
  return "full";
}

AblationMode ablation_from_string(const std::string& s) {
  if (s == "full") return AblationMode::kFull;
  if (s == "no_deform") return AblationMode::kNoDeform;
  if (s == "rgb_inpainting") return AblationMode::kRgbInpainting;
  if (s == "no_textures") return AblationMode::kNoTextures;
  throw std::invalid_argument("config: unknown ablation mode '" + s + "'");
}

int refiner_target_channels(AblationMode mode, bool garment_transfer) {
  int ch = 0;
  switch (mode) {
    case AblationMode::kFull:
      // W(3) + E(2)+known(1) + M_N(3) + meshgrid(2)
      ch = 11;
      break;
    case AblationMode::kNoDeform:
      // single stack: W + E + M_N + S + M_S + meshgrid
      ch = 17;
      break;
    case AblationMode::kRgbInpainting:
      // W + M_N + S + M_S + meshgrid (no E anywhere)
      ch = 14;
      break;
    case AblationMode::kNoTextures:
      // S + M_S + M_N + meshgrid
      ch = 11;
      break;
  }
  if (garment_transfer) ch += 4;  // masked identity image + mask
  return ch;
}

int refiner_source_channels(AblationMode mode) {
  // S(3) + M_S(3) + meshgrid(2); only the deformable arch keeps a second
  // encoder.
  return mode == AblationMode::kFull ? 8 : 0;
}

int discriminator_channels() {
  // image(3) + M_N(3) + meshgrid(2)
  return 8;
}

void PipelineConfig::resolve() {
  if (ablation == AblationMode::kRgbInpainting) {
    inpainter = InpainterConfig::rgb(inpainter);
  } else {
    inpainter.in_channels = 3;
    inpainter.out_channels = 2;
    inpainter.head = InpainterHead::kCoords;
  }
  refiner.arch = ablation == AblationMode::kFull ? RefinerArch::kDualDeformable
                                                 : RefinerArch::kSingle;
  refiner.target_channels = refiner_target_channels(ablation, garment_transfer);
  refiner.source_channels = refiner_source_channels(ablation);
  discriminator.in_channels = discriminator_channels();
}

namespace {

void to_json(json& j, const SceneConfig& c) {
  j = json{{"image_size", c.image_size},
           {"texture_size", c.texture_size},
           {"surface", c.surface == SurfaceKind::kCylinder ? "cylinder"
                                                           : "ellipsoid"},
           {"pattern", c.pattern == PatternKind::kStripes   ? "stripes"
                       : c.pattern == PatternKind::kChecker ? "checker"
                       : c.pattern == PatternKind::kBlobs   ? "blobs"
                                                            : "mixed"},
           {"mirror_symmetry", c.mirror_symmetry},
           {"rotation_diff_deg", c.rotation_diff_deg},
           {"rotation_jitter_deg", c.rotation_jitter_deg},
           {"identity_band_v", c.identity_band_v}};
}

void from_json(const json& j, SceneConfig& c) {
  c.image_size = j.value("image_size", c.image_size);
  c.texture_size = j.value("texture_size", c.texture_size);
  const std::string surface = j.value("surface", "cylinder");
  if (surface == "cylinder") {
    c.surface = SurfaceKind::kCylinder;
  } else if (surface == "ellipsoid") {
    c.surface = SurfaceKind::kEllipsoid;
  } else {
    throw std::invalid_argument("config: unknown surface '" + surface + "'");
  }
  const std::string pattern = j.value("pattern", "mixed");
  if (pattern == "stripes") {
    c.pattern = PatternKind::kStripes;
  } else if (pattern == "checker") {
    c.pattern = PatternKind::kChecker;
  } else if (pattern == "blobs") {
    c.pattern = PatternKind::kBlobs;
  } else if (pattern == "mixed") {
    c.pattern = PatternKind::kMixed;
  } else {
    throw std::invalid_argument("config: unknown pattern '" + pattern + "'");
  }
  c.mirror_symmetry = j.value("mirror_symmetry", c.mirror_symmetry);
  c.rotation_diff_deg = j.value("rotation_diff_deg", c.rotation_diff_deg);
  c.rotation_jitter_deg = j.value("rotation_jitter_deg", c.rotation_jitter_deg);
  c.identity_band_v = j.value("identity_band_v", c.identity_band_v);
}

void to_json(json& j, const InpainterConfig& c) {
  j = json{{"widths", c.widths},
           {"convs_per_level", c.convs_per_level},
           {"bottleneck_convs", c.bottleneck_convs},
           {"paper_faithful", false}};
}

void from_json(const json& j, InpainterConfig& c) {
  if (j.value("paper_faithful", false)) {
    c = InpainterConfig::paper_faithful(c.in_channels, c.out_channels);
    return;
  }
  c.widths = j.value("widths", c.widths);
  c.convs_per_level = j.value("convs_per_level", c.convs_per_level);
  c.bottleneck_convs = j.value("bottleneck_convs", c.bottleneck_convs);
}

void to_json(json& j, const RefinerConfig& c) {
  j = json{{"widths", c.widths}, {"res_blocks", c.res_blocks}};
}

void from_json(const json& j, RefinerConfig& c) {
  c.widths = j.value("widths", c.widths);
  c.res_blocks = j.value("res_blocks", c.res_blocks);
}

void to_json(json& j, const DiscriminatorConfig& c) {
  j = json{{"widths", c.widths}};
}

void from_json(const json& j, DiscriminatorConfig& c) {
  c.widths = j.value("widths", c.widths);
}

void to_json(json& j, const LossWeights& c) {
  j = json{{"stage1_coord", c.stage1_coord}, {"stage1_color", c.stage1_color},
           {"nn", c.nn},                     {"nn_window", c.nn_window},
           {"feature", c.feature},           {"style", c.style},
           {"adv", c.adv},                   {"feature_seed", c.feature_seed}};
}

void from_json(const json& j, LossWeights& c) {
  c.stage1_coord = j.value("stage1_coord", c.stage1_coord);
  c.stage1_color = j.value("stage1_color", c.stage1_color);
  c.nn = j.value("nn", c.nn);
  c.nn_window = j.value("nn_window", c.nn_window);
  c.feature = j.value("feature", c.feature);
  c.style = j.value("style", c.style);
  c.adv = j.value("adv", c.adv);
  c.feature_seed = j.value("feature_seed", c.feature_seed);
}

void to_json(json& j, const AdamConfig& c) {
  j = json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

void from_json(const json& j, AdamConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
}

void to_json(json& j, const StageSchedule& c) {
  j = json{{"steps", c.steps},
           {"batch", c.batch},
           {"checkpoint_every", c.checkpoint_every},
           {"log_every", c.log_every}};
}

void from_json(const json& j, StageSchedule& c) {
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["data_seed"] = c.data_seed;
  to_json(j["scene"], c.scene);
  j["dataset_dir"] = c.dataset_dir;
  j["train_pairs"] = c.train_pairs;
  j["heldout_pairs"] = c.heldout_pairs;
  to_json(j["inpainter"], c.inpainter);
  to_json(j["refiner"], c.refiner);
  to_json(j["discriminator"], c.discriminator);
  to_json(j["loss"], c.loss);
  to_json(j["optim_stage1"], c.optim_stage1);
  to_json(j["optim_stage2"], c.optim_stage2);
  to_json(j["optim_disc"], c.optim_disc);
  to_json(j["stage1"], c.stage1);
  to_json(j["stage2"], c.stage2);
  j["stage1_task"] =
      c.stage1_task == Stage1Task::kPairs ? "pairs" : "identity";
  j["ablation"] = to_string(c.ablation);
  j["garment_transfer"] = c.garment_transfer;
  j["out_dir"] = c.out_dir;
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.seed = j.value("seed", c.seed);
  c.data_seed = j.value("data_seed", c.data_seed);
  if (j.contains("scene")) from_json(j.at("scene"), c.scene);
  c.dataset_dir = j.value("dataset_dir", c.dataset_dir);
  c.train_pairs = j.value("train_pairs", c.train_pairs);
  c.heldout_pairs = j.value("heldout_pairs", c.heldout_pairs);
  if (j.contains("inpainter")) from_json(j.at("inpainter"), c.inpainter);
  if (j.contains("refiner")) from_json(j.at("refiner"), c.refiner);
  if (j.contains("discriminator")) {
    from_json(j.at("discriminator"), c.discriminator);
  }
  if (j.contains("loss")) from_json(j.at("loss"), c.loss);
  if (j.contains("optim_stage1")) from_json(j.at("optim_stage1"), c.optim_stage1);
  if (j.contains("optim_stage2")) from_json(j.at("optim_stage2"), c.optim_stage2);
  if (j.contains("optim_disc")) from_json(j.at("optim_disc"), c.optim_disc);
  if (j.contains("stage1")) from_json(j.at("stage1"), c.stage1);
  if (j.contains("stage2")) from_json(j.at("stage2"), c.stage2);
  const std::string task = j.value("stage1_task", "pairs");
  if (task == "pairs") {
    c.stage1_task = Stage1Task::kPairs;
  } else if (task == "identity") {
    c.stage1_task = Stage1Task::kIdentity;
  } else {
    throw std::invalid_argument("config: unknown stage1_task '" + task + "'");
  }
  c.ablation = ablation_from_string(j.value("ablation", "full"));
  c.garment_transfer = j.value("garment_transfer", c.garment_transfer);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.resolve();
  return c;
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text) {
  return config_from_json(json::parse(text));
}

PipelineConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

std::string config_to_json_text(const PipelineConfig& config) {
  return config_to_json(config).dump(2);
}

void config_to_json_file(const PipelineConfig& config,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot open " + path);
  out << config_to_json_text(config) << "\n";
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must look like key.path=value: " +
                                assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json j = config_to_json(config);
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw std::invalid_argument("override: empty key");
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare strings
  }
  (*node)[parts.back()] = parsed;
  config = config_from_json(j);
}

}  // namespace retex
