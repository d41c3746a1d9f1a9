#pragma once

#include <functional>
#include <string>
#include <vector>

#include "retex/tensor.hpp"

namespace retex {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  int checks = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite differences in 64-bit against the recorded backward pass.
// The output is reduced to a scalar through a fixed random projection; every
// element of every input marked requires_grad is perturbed.
GradCheckResult gradcheck(const std::string& name,
                          std::vector<Tensor<double>> inputs,
                          const std::function<Tensor<double>()>& forward,
                          double tolerance, uint64_t seed,
                          double step = 1e-5);

// The whole differentiable surface: convolutions (both algorithms), gated
// convolutions, resampling, the bilinear sampler including coordinate
// gradients, pointwise ops, reductions, and every loss. Each op is checked
// on several random shapes.
std::vector<GradCheckResult> run_gradient_suite(uint64_t seed);

}  // namespace retex
