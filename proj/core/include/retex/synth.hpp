#pragma once

#include <cstdint>
#include <vector>

#include "retex/tensor.hpp"
#include "retex/warp.hpp"

namespace retex {

enum class SurfaceKind { kCylinder, kEllipsoid };
enum class PatternKind { kStripes, kChecker, kBlobs, kMixed };

// Parametric textured surface rendered orthographically at two rigid poses.
// UV maps are analytic and exact: every valid pixel's (u,v) samples the
// ground-truth texture with the same bilinear convention the warp ops use,
// so rendering and splatting agree by construction.
struct SceneConfig {
  int image_size = 64;
  int texture_size = 64;
  SurfaceKind surface = SurfaceKind::kCylinder;
  PatternKind pattern = PatternKind::kMixed;
  // Front and back surface halves carry mirrored texture; with a 180°
  // pose difference the half hidden in the source equals the mirror of
  // the visible half.
  bool mirror_symmetry = true;
  double rotation_diff_deg = 180.0;
  double rotation_jitter_deg = 30.0;
  // Texels with v at or above this band form the marked identity patch
  // (face/hair analog for garment transfer).
  double identity_band_v = 0.85;
};

struct SceneSample {
  Tensor<float> source_image;  // S, white background
  UvMap source_map;            // M_S
  Tensor<float> target_image;  // N
  UvMap target_map;            // M_N
  ColorTexture gt_texture;     // full surface texture
  std::vector<float> identity_mask_source;  // per pixel, marked patch
  std::vector<float> identity_mask_target;
  double rot_source = 0.0;
  double rot_target = 0.0;
};

// Deterministic in seed and config: identical calls are bit-identical.
SceneSample generate_pair(uint64_t seed, const SceneConfig& config);

// Single view of the same subject at the base pose rotated by an extra
// angle; extra 0 gives the pair's source view, rotation_diff_deg gives its
// target view.
struct SceneView {
  Tensor<float> image;
  UvMap map;
  std::vector<float> identity_mask;
  double rot = 0.0;
};
SceneView render_pose(uint64_t seed, const SceneConfig& config,
                      double extra_rotation_deg);
ColorTexture scene_texture(uint64_t seed, const SceneConfig& config);

// Complete analytic pixel-coordinate map of the surface at the sample's
// source pose, visibility ignored (smooth everywhere). Fuel for the
// identity-completion toy task.
CoordTexture full_coord_map(uint64_t seed, const SceneConfig& config);

// Marked-patch mask of an externally supplied map (u,v in the patch and
// valid), matching the generator's convention.
std::vector<float> identity_mask_from_map(const UvMap& map, double band_v);

}  // namespace retex
