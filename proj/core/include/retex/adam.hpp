#pragma once

#include <vector>

#include "retex/tensor.hpp"

namespace retex {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamState {
  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;
  int64_t step = 0;
};

// One Adam update with bias correction over an ordered parameter list.
// Parameters without an accumulated grad are treated as grad 0. The state
// is lazily sized to match params on first use; a later mismatch throws.
template <typename S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state,
               const AdamConfig& config);

}  // namespace retex
