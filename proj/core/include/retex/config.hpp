#pragma once

#include <cstdint>
#include <string>

#include "retex/adam.hpp"
#include "retex/networks.hpp"
#include "retex/synth.hpp"

namespace retex {

enum class AblationMode { kFull, kNoDeform, kRgbInpainting, kNoTextures };
enum class Stage1Task { kPairs, kIdentity };

std::string to_string(AblationMode mode);
AblationMode ablation_from_string(const std::string& s);

struct LossWeights {
  double stage1_coord = 1.0;
  double stage1_color = 1.0;
  double nn = 1.0;
  int nn_window = 5;
  double feature = 1.0;
  double style = 100.0;
  double adv = 0.1;
  uint64_t feature_seed = 1234;
};

struct StageSchedule {
  int steps = 500;
  int batch = 1;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  int log_every = 1;
};

struct PipelineConfig {
  uint64_t seed = 0;       // training seed (init + sampling order)
  uint64_t data_seed = 7777;  // scene stream; independent of training seed
  SceneConfig scene;
  std::string dataset_dir;  // empty = synthetic scenes on the fly
  int train_pairs = 2048;
  int heldout_pairs = 64;

  InpainterConfig inpainter;
  RefinerConfig refiner;
  DiscriminatorConfig discriminator;
  LossWeights loss;
  AdamConfig optim_stage1;
  AdamConfig optim_stage2;
  AdamConfig optim_disc;
  StageSchedule stage1;
  StageSchedule stage2;
  Stage1Task stage1_task = Stage1Task::kPairs;

  AblationMode ablation = AblationMode::kFull;
  bool garment_transfer = false;
  std::string out_dir = ".";

  // Channel plans and network variants implied by the ablation mode
  // (rgb_inpainting forces the single-encoder refiner since E does not
  // exist there). Call before constructing networks.
  void resolve();
};

PipelineConfig config_from_json_file(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& config);
void config_to_json_file(const PipelineConfig& config, const std::string& path);

// "a.b.c=value" dotted-path override applied on the JSON form.
void apply_override(PipelineConfig& config, const std::string& assignment);

// Channel budget of the refiner input stacks for a mode.
int refiner_target_channels(AblationMode mode, bool garment_transfer);
int refiner_source_channels(AblationMode mode);
int discriminator_channels();

}  // namespace retex
