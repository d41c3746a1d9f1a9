#pragma once

#include "retex/tensor.hpp"

namespace retex {

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double value_range = 1.0;  // images live in [0,1]
};

// Gaussian-windowed structural similarity, averaged over channels and all
// fully-interior window positions. Images are N×C×H×W; evaluation runs in
// double regardless of S. Result in [−1, 1]; identical inputs give 1.
template <typename S>
double ssim(const Tensor<S>& a, const Tensor<S>& b,
            const SsimConfig& config = {});

}  // namespace retex
