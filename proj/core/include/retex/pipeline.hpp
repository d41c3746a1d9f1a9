#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "retex/config.hpp"
#include "retex/losses.hpp"
#include "retex/networks.hpp"
#include "retex/synth.hpp"
#include "retex/warp.hpp"

namespace retex {

// Scene stream: sample index → generator seed. Training draws indices in
// [0, train_pairs); held-out evaluation uses [train_pairs, train_pairs +
// heldout_pairs).
uint64_t scene_seed(const PipelineConfig& config, int64_t index);

// ---------------------------------------------------------------------------
// Forward assembly (inference-time, gradients off).

struct TextureEstimate {
  CoordTexture c;                       // coordinate splat (coordinate modes)
  std::optional<ColorSplat> c_rgb;      // color splat (rgb_inpainting)
  std::optional<CoordTexture> d;        // completed coordinate map
  std::optional<ColorTexture> texture;  // T
};

TextureEstimate estimate_texture(const Tensor<float>& source, const UvMap& m_s,
                                 const Inpainter<float>& inpainter,
                                 AblationMode mode, int tex_size);

struct IdentityCond {
  Tensor<float> image;       // person view, 1×3×H×W
  std::vector<float> mask;   // marked identity patch, per pixel
};

struct RefinerInputs {
  Tensor<float> target_stack;
  std::optional<Tensor<float>> source_stack;
  std::vector<DeformField<float>> fields;
  // One label per channel; the wiring tests assert mode contracts on these.
  std::vector<std::string> target_roles;
  std::vector<std::string> source_roles;
};

RefinerInputs build_refiner_inputs(const Tensor<float>& source,
                                   const UvMap& m_s, const UvMap& m_n,
                                   const TextureEstimate* estimate,
                                   const std::optional<WarpedMaps>& warped,
                                   AblationMode mode,
                                   const std::optional<IdentityCond>& identity,
                                   int levels);

// image + M_N + meshgrid conditioning stack for the discriminator.
Tensor<float> discriminator_stack(const Tensor<float>& image, const UvMap& m_n);

struct InferenceOutputs {
  Tensor<float> output;  // N̂ in [0,1]
  TextureEstimate texture;
  std::optional<WarpedMaps> warped;
  std::vector<std::string> target_roles;
  std::vector<std::string> source_roles;
};

// Full test-time path: texture estimation (unless no_textures), warping,
// refinement. Deterministic; inputs are S, M_S, M_N (plus the identity
// conditioning when transferring garments).
InferenceOutputs run_pipeline(const PipelineConfig& config,
                              const Inpainter<float>* inpainter,
                              const Refiner<float>& refiner,
                              const Tensor<float>& source, const UvMap& m_s,
                              const UvMap& m_n,
                              const std::optional<IdentityCond>& identity = {});

// ---------------------------------------------------------------------------
// Training.

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log_csv;
  int steps = 0;
  double final_total = 0.0;
};

std::filesystem::path inpainter_ckpt_path(const PipelineConfig& config);
std::filesystem::path refiner_ckpt_path(const PipelineConfig& config);

// Stage 1: trains the inpainter f on quadruplets (or the identity toy task
// when stage1_task = identity). Writes checkpoint + CSV loss log.
TrainResult train_stage1(const PipelineConfig& config);

// Stage 2: f stays frozen; trains refiner + discriminator with alternating
// 1:1 updates. Requires the stage-1 checkpoint except in no_textures mode.
TrainResult train_stage2(const PipelineConfig& config);

std::unique_ptr<Inpainter<float>> load_inpainter(
    const PipelineConfig& config, const std::filesystem::path& ckpt);
std::unique_ptr<Refiner<float>> load_refiner(
    const PipelineConfig& config, const std::filesystem::path& ckpt);

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalSummary {
  int pairs = 0;
  double mean_ssim = 0.0;
  double mean_l1 = 0.0;
  std::optional<double> mean_tex_l1;
};

EvalSummary evaluate_synthetic(const PipelineConfig& config,
                               const Inpainter<float>* inpainter,
                               const Refiner<float>& refiner,
                               const std::filesystem::path& csv_path = {});

EvalSummary evaluate_dataset(const PipelineConfig& config,
                             const Inpainter<float>* inpainter,
                             const Refiner<float>& refiner,
                             const std::filesystem::path& dir,
                             const std::filesystem::path& csv_path = {});

// Held-out mean per-texel coordinate error in pixels for the identity toy
// task (the <1 px completion check).
double eval_identity_completion(const PipelineConfig& config,
                                const Inpainter<float>& inpainter, int count);

}  // namespace retex
