#pragma once

#include <string>

#include "retex/tensor.hpp"

namespace retex {

// 8-bit RGB PNG only. Values are normalized to [0,1] on load; writing
// clamps to [0,1] and quantizes with rounding.
Tensor<float> read_png(const std::string& path);  // 1×3×H×W
void write_png(const std::string& path, const Tensor<float>& image);

}  // namespace retex
