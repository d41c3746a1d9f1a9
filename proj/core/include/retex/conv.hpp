#pragma once

#include "retex/tensor.hpp"

namespace retex {

// kDirect is the naive loop reference; kIm2col is the GEMM-backed path.
// Both produce results agreeing to 1e-6 relative; kAuto picks kIm2col.
enum class ConvAlgo { kAuto, kDirect, kIm2col };

// Cross-correlation with square kernels. input N×I×H×W, weight O×I×k×k,
// bias O. Differentiable w.r.t. input, weight and bias.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight,
                 const Tensor<S>& bias, int stride = 1, int padding = 0,
                 ConvAlgo algo = ConvAlgo::kAuto);

enum class ResampleDir { kDown, kUp };

// kDown: 2×2 average pooling (even extents required).
// kUp: nearest-neighbor ×2.
template <typename S>
Tensor<S> resample2x(const Tensor<S>& input, ResampleDir dir);

}  // namespace retex
