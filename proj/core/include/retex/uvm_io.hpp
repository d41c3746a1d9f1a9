#pragma once

#include <string>

#include "retex/warp.hpp"

namespace retex {

// UVM1 container: magic "UVM1", width:u32 LE, height:u32 LE, then H·W
// records of (u:f32, v:f32, valid:f32) row-major. Byte length is exactly
// 12 + 12·H·W; round trips are bit-exact.
void write_uvm(const std::string& path, const UvMap& map);
UvMap read_uvm(const std::string& path);

}  // namespace retex
