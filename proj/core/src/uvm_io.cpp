#include "retex/uvm_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace retex {

static_assert(std::endian::native == std::endian::little,
              "UVM1 serialization assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'U', 'V', 'M', '1'};
}

void write_uvm(const std::string& path, const UvMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_uvm: cannot open " + path);
  out.write(kMagic, 4);
  const uint32_t w = map.width, h = map.height;
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> record(3);
  for (size_t i = 0; i < size_t(map.width) * map.height; ++i) {
    record[0] = map.u[i];
    record[1] = map.v[i];
    record[2] = map.valid[i];
    out.write(reinterpret_cast<const char*>(record.data()), 12);
  }
  if (!out) throw std::runtime_error("write_uvm: write failed: " + path);
}

UvMap read_uvm(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("read_uvm: cannot open " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  char magic[4];
  uint32_t w = 0, h = 0;
  if (size < 12 || !in.read(magic, 4) ||
      std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("read_uvm: bad magic in " + path);
  }
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  const uint64_t expected = 12ull + 12ull * w * h;
  if (uint64_t(size) != expected) {
    throw std::runtime_error("read_uvm: truncated payload in " + path);
  }
  UvMap map(static_cast<int>(w), static_cast<int>(h));
  std::vector<float> record(3);
  for (size_t i = 0; i < size_t(w) * h; ++i) {
    if (!in.read(reinterpret_cast<char*>(record.data()), 12)) {
      throw std::runtime_error("read_uvm: truncated payload in " + path);
    }
    map.u[i] = record[0];
    map.v[i] = record[1];
    map.valid[i] = record[2];
  }
  return map;
}

}  // namespace retex
