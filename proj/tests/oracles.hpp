// Independent reference implementations the tests check the library
// against. Everything here is written as the most literal possible loop,
// sharing no code with the production paths.
#pragma once

#include <vector>

#include "retex/warp.hpp"

namespace retex::oracle {

// Plain six-nested-loop cross-correlation (batch loop on top).
std::vector<double> conv2d_loops(const std::vector<double>& input, int n,
                                 int cin, int h, int w,
                                 const std::vector<double>& weight, int cout,
                                 int k, const std::vector<double>& bias,
                                 int stride, int padding);

// Scalar bilinear lookup with border clamping, one sample at a time.
double bilinear_scalar(const std::vector<double>& plane, int h, int w,
                       double x, double y);

// Splatting by explicit per-pixel accumulation into value/weight arrays.
struct SplatOracle {
  std::vector<double> value;   // channels * texels
  std::vector<double> weight;  // texels
  std::vector<char> known;
};
SplatOracle splat_loops(const std::vector<double>& values, int channels,
                        const UvMap& map, int tex_w, int tex_h,
                        double weight_eps);

// Block-loop reference of the warp-field downsampling.
CoordTexture downsample_warpfield_loops(const CoordTexture& field, int factor);

// Per-window scalar SSIM (Gaussian window, valid positions only).
double ssim_windows(const std::vector<double>& a, const std::vector<double>& b,
                    int channels, int h, int w, int window, double sigma,
                    double k1, double k2);

// Brute-force per-pixel neighborhood scan of the nearest-neighbour loss.
double nn_loss_scan(const std::vector<double>& pred,
                    const std::vector<double>& target, int c, int h, int w,
                    int window);

// Straightforward Gram-matrix computation.
std::vector<double> gram_loops(const std::vector<double>& x, int n, int c,
                               int h, int w);

// Independent straightforward reimplementation of the stage-1 objective.
double stage1_total_loops(const CoordTexture& c, const std::vector<float>& dx,
                          const std::vector<float>& dy,
                          const std::vector<float>& t_rgb,
                          const ColorTexture& target_tex,
                          const std::vector<float>& target_known, int img_w,
                          int img_h, double w_coord, double w_color);

// Hand-evaluated binary cross-entropy over patch logits (non-saturating).
double bce_g_term(const std::vector<double>& fake_logits);
double bce_d_term(const std::vector<double>& real_logits,
                  const std::vector<double>& fake_logits);

}  // namespace retex::oracle
