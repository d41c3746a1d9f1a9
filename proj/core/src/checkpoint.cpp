#include "retex/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace retex {

static_assert(std::endian::native == std::endian::little,
              "CKPT serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};

void append_u32(std::vector<char>& buf, uint32_t v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + 4);
}

uint32_t take_u32(const std::vector<char>& buf, size_t& off) {
  if (off + 4 > buf.size()) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  uint32_t v;
  std::memcpy(&v, buf.data() + off, 4);
  off += 4;
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<CheckpointEntry>& entries) {
  std::vector<char> payload;
  for (const auto& e : entries) {
    append_u32(payload, uint32_t(e.name.size()));
    payload.insert(payload.end(), e.name.begin(), e.name.end());
    append_u32(payload, uint32_t(e.shape.size()));
    for (int extent : e.shape) append_u32(payload, uint32_t(extent));
    if (int64_t(e.data.size()) != shape_numel(e.shape)) {
      throw std::invalid_argument("checkpoint: entry '" + e.name +
                                  "' data does not match shape");
    }
    const char* p = reinterpret_cast<const char*>(e.data.data());
    payload.insert(payload.end(), p, p + e.data.size() * 4);
  }
  const uint32_t crc =
      uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                     uInt(payload.size())));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  const uint32_t version = kCheckpointVersion;
  const uint32_t count = uint32_t(entries.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(payload.data(), std::streamsize(payload.size()));
  out.write(reinterpret_cast<const char*>(&crc), 4);
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  if (size < 16) throw std::runtime_error("checkpoint: truncated file");
  char magic[4];
  uint32_t version = 0, count = 0;
  in.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unknown version " +
                             std::to_string(version));
  }
  std::vector<char> payload(size_t(size) - 16);
  in.read(payload.data(), std::streamsize(payload.size()));
  uint32_t stored_crc = 0;
  in.read(reinterpret_cast<char*>(&stored_crc), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  const uint32_t crc =
      uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                     uInt(payload.size())));
  if (crc != stored_crc) {
    throw std::runtime_error("checkpoint: CRC mismatch in " + path);
  }

  std::vector<CheckpointEntry> entries(count);
  size_t off = 0;
  for (auto& e : entries) {
    const uint32_t name_len = take_u32(payload, off);
    if (off + name_len > payload.size()) {
      throw std::runtime_error("checkpoint: truncated file");
    }
    e.name.assign(payload.data() + off, name_len);
    off += name_len;
    const uint32_t rank = take_u32(payload, off);
    e.shape.resize(rank);
    for (uint32_t i = 0; i < rank; ++i) {
      e.shape[i] = int(take_u32(payload, off));
    }
    const int64_t numel = shape_numel(e.shape);
    if (off + size_t(numel) * 4 > payload.size()) {
      throw std::runtime_error("checkpoint: truncated file");
    }
    e.data.resize(numel);
    std::memcpy(e.data.data(), payload.data() + off, size_t(numel) * 4);
    off += size_t(numel) * 4;
  }
  if (off != payload.size()) {
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  }
  return entries;
}

std::vector<CheckpointEntry> table_to_entries(const ParamTable<float>& params,
                                              const std::string& prefix) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(params.entries().size());
  for (const auto& [name, t] : params.entries()) {
    entries.push_back({prefix + name, t.shape(), t.value()});
  }
  return entries;
}

void load_into_table(const std::vector<CheckpointEntry>& entries,
                     ParamTable<float>& params, const std::string& prefix) {
  std::vector<std::pair<std::string, std::vector<float>>> named;
  for (const auto& e : entries) {
    if (e.name.rfind(prefix, 0) != 0) continue;
    named.emplace_back(e.name.substr(prefix.size()), e.data);
  }
  params.load_values(named);
}

}  // namespace retex
