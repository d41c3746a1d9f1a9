#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "retex/tensor.hpp"

namespace retex {

// Image-space positions are pixels with the origin at the center of pixel
// (0,0); texture coordinates (u,v) are normalized to [0,1] and map to texel
// centers through u·(texW−1), v·(texH−1). Out-of-range sampling clamps to
// the border.

// Per-pixel mapping from image space into texture space. Pixels with
// valid=0 carry no constraint; readers must not consume their (u,v).
struct UvMap {
  int width = 0;
  int height = 0;
  std::vector<float> u, v, valid;  // height*width each, row-major

  UvMap() = default;
  UvMap(int w, int h)
      : width(w), height(h), u(size_t(w) * h, 0.f), v(size_t(w) * h, 0.f),
        valid(size_t(w) * h, 0.f) {}
  size_t at(int x, int y) const { return size_t(y) * width + x; }
};

// Per-texel source-image coordinates with a known mask. Unknown texels hold
// the sentinel in both channels when serialized or fed to a network. Also
// reused for image-frame warp fields (E), where "texel" reads "pixel".
struct CoordTexture {
  static constexpr float kUnknown = -10.0f;

  int width = 0;
  int height = 0;
  std::vector<float> x, y;     // source coordinates in pixels
  std::vector<float> known;    // {0,1}

  CoordTexture() = default;
  CoordTexture(int w, int h)
      : width(w), height(h), x(size_t(w) * h, kUnknown),
        y(size_t(w) * h, kUnknown), known(size_t(w) * h, 0.f) {}
  size_t at(int tx, int ty) const { return size_t(ty) * width + tx; }
  bool complete() const;
};

// RGB texture, planar CHW layout, clamped to [0,1] on creation.
struct ColorTexture {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;  // 3*height*width

  ColorTexture() = default;
  ColorTexture(int w, int h) : width(w), height(h), rgb(size_t(3) * w * h, 0.f) {}
  size_t at(int c, int tx, int ty) const {
    return (size_t(c) * height + ty) * width + tx;
  }
  void clamp01();
};

// Target-frame warps of Eqs. W = T∘M_N and E = D∘M_N; pixels invalid in
// the target map are zero in rgb and unknown in coords.
struct WarpedMaps {
  ColorTexture rgb;     // W
  CoordTexture coords;  // E, known mask inherited from the target map
};

// Weight threshold deciding texel "known" status after splatting.
constexpr double kSplatWeightEps = 1e-4;

// Forward scattered splat of the source meshgrid: each valid pixel [x,y]
// distributes the values (x,y) to the four texels around its (u,v) with
// bilinear weights into value and weight accumulators; texels with total
// weight above the threshold are normalized, the rest stay unknown.
CoordTexture splat_coordinates(const UvMap& source_map, int tex_w, int tex_h);

struct ColorSplat {
  ColorTexture texture;
  std::vector<float> known;  // per texel {0,1}
};

// Same mechanics splatting image colors; image is 1×3×H×W in [0,1].
ColorSplat splat_colors(const Tensor<float>& image, const UvMap& source_map,
                        int tex_w, int tex_h);

// Differentiable backward sampling. source is N×C×H×W, coords N×2×H′×W′
// holding (x,y) in pixels of the source grid; gradients reach both the
// source and the coordinates.
template <typename S>
Tensor<S> sample_bilinear(const Tensor<S>& source, const Tensor<S>& coords);

// T[u,v] = S[D¹[u,v], D²[u,v]] through the bilinear sampler; D must be
// complete (inpaint first).
ColorTexture texture_from_coords(const Tensor<float>& source,
                                 const CoordTexture& d);

// W[x,y] = T[M_N(x,y)], E[x,y] = D[M_N(x,y)] at valid target pixels.
WarpedMaps warp_to_target(const ColorTexture& texture, const CoordTexture& d,
                          const UvMap& target_map);

// Color half only (the rgb-inpainting ablation has no coordinate map).
ColorTexture warp_texture(const ColorTexture& texture, const UvMap& target_map);

// Block-average a coordinate map over valid entries and rescale so values
// index the factor-downsampled grid: c ↦ (c − 0.5·(factor−1))/factor.
// Blocks without any valid entry become unknown.
CoordTexture downsample_warpfield(const CoordTexture& field, int factor);

// Nearest-known propagation (multi-source BFS); gives a complete map for
// round trips and non-learned baselines.
CoordTexture fill_unknown_nearest(const CoordTexture& ct);

// 1×2×h×w tensor of pixel coordinates (channel 0 = x, channel 1 = y).
template <typename S>
Tensor<S> meshgrid_pixels(int width, int height);

// --- conversions between the plain structs and tensors ---

// (x/(W−1), y/(H−1), mask) with the sentinel kept at unknown texels.
template <typename S>
Tensor<S> coord_texture_to_input(const CoordTexture& ct, int image_w,
                                 int image_h);
// (r, g, b, mask) with the sentinel at unknown texels.
template <typename S>
Tensor<S> color_splat_to_input(const ColorSplat& cs);

template <typename S>
Tensor<S> color_texture_to_tensor(const ColorTexture& ct);
ColorTexture tensor_to_color_texture(const Tensor<float>& t);

// 1×2×h×w pixel-coordinate tensor from a complete-or-not coord map; the
// mask goes to a separate 1×1×h×w tensor.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> coord_texture_to_tensors(
    const CoordTexture& ct);
CoordTexture tensor_to_coord_texture(const Tensor<float>& coords);

template <typename S>
Tensor<S> uvmap_to_tensor(const UvMap& map);  // 1×3×H×W: u, v, valid

}  // namespace retex
