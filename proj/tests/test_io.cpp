#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "retex/checkpoint.hpp"
#include "retex/dataset.hpp"
#include "retex/png_io.hpp"
#include "retex/uvm_io.hpp"
#include "test_util.hpp"

using namespace retex;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("io");

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("retex_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void flip_byte(const fs::path& file, int64_t offset_from_start) {
  std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(offset_from_start);
  char c;
  f.read(&c, 1);
  c ^= 0x40;
  f.seekp(offset_from_start);
  f.write(&c, 1);
}

void write_gray_png(const fs::path& file) {
  FILE* fp = std::fopen(file.string().c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, fp);
  png_set_IHDR(png, info, 4, 4, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(4, 128);
  for (int y = 0; y < 4; ++y) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

TEST_CASE("uvm: write/read round trip is bit-exact") {
  TempDir dir("uvm");
  Rng rng(1);
  UvMap map(7, 5);
  for (size_t i = 0; i < map.u.size(); ++i) {
    map.u[i] = float(rng.uniform(0.0, 1.0));
    map.v[i] = float(rng.uniform(0.0, 1.0));
    map.valid[i] = rng.uniform(0.0, 1.0) < 0.5 ? 1.f : 0.f;
  }
  const fs::path file = dir.path / "map.uvm";
  write_uvm(file.string(), map);
  CHECK(fs::file_size(file) == 12 + 12 * 7 * 5);
  const UvMap back = read_uvm(file.string());
  CHECK(back.width == map.width);
  CHECK(back.height == map.height);
  CHECK(back.u == map.u);
  CHECK(back.v == map.v);
  CHECK(back.valid == map.valid);
}

TEST_CASE("uvm: truncation and bad magic are rejected") {
  TempDir dir("uvm_err");
  UvMap map(4, 4);
  const fs::path file = dir.path / "map.uvm";
  write_uvm(file.string(), map);
  fs::resize_file(file, fs::file_size(file) - 5);
  CHECK_THROWS_WITH_AS(read_uvm(file.string()),
                       doctest::Contains("truncated payload"),
                       std::runtime_error);

  const fs::path bad = dir.path / "bad.uvm";
  std::ofstream(bad) << "NOPE this is not a uv map";
  CHECK_THROWS_WITH_AS(read_uvm(bad.string()), doctest::Contains("bad magic"),
                       std::runtime_error);
}

TEST_CASE("checkpoint: round trip is bit-exact") {
  TempDir dir("ckpt");
  Rng rng(2);
  std::vector<CheckpointEntry> entries;
  entries.push_back({"f.layer0.w", {4, 3, 3, 3}, {}});
  entries.push_back({"f.layer0.b", {4}, {}});
  for (auto& e : entries) {
    e.data.resize(shape_numel(e.shape));
    for (auto& v : e.data) v = float(rng.uniform(-2.0, 2.0));
  }
  const fs::path file = dir.path / "net.ckpt";
  save_checkpoint(file.string(), entries);
  const auto back = load_checkpoint(file.string());
  REQUIRE(back.size() == entries.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].name == entries[i].name);
    CHECK(back[i].shape == entries[i].shape);
    CHECK(back[i].data == entries[i].data);  // bit-exact
  }
}

TEST_CASE("checkpoint: corruption and version checks") {
  TempDir dir("ckpt_err");
  std::vector<CheckpointEntry> entries = {{"x", {2}, {1.f, 2.f}}};
  const fs::path file = dir.path / "net.ckpt";
  save_checkpoint(file.string(), entries);

  // A flipped payload byte must fail the CRC.
  const fs::path flipped = dir.path / "flipped.ckpt";
  fs::copy_file(file, flipped);
  flip_byte(flipped, 20);
  CHECK_THROWS_WITH_AS(load_checkpoint(flipped.string()),
                       doctest::Contains("CRC"), std::runtime_error);

  // An unknown version is rejected before anything else.
  const fs::path versioned = dir.path / "version.ckpt";
  fs::copy_file(file, versioned);
  flip_byte(versioned, 4);
  CHECK_THROWS_WITH_AS(load_checkpoint(versioned.string()),
                       doctest::Contains("version"), std::runtime_error);

  const fs::path trunc = dir.path / "trunc.ckpt";
  fs::copy_file(file, trunc);
  fs::resize_file(trunc, fs::file_size(trunc) - 6);
  CHECK_THROWS(load_checkpoint(trunc.string()));

  const fs::path bad = dir.path / "bad.ckpt";
  std::ofstream(bad) << "GARBAGEGARBAGEGARBAGE";
  CHECK_THROWS_WITH_AS(load_checkpoint(bad.string()),
                       doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("checkpoint: table round trip through prefixes") {
  TempDir dir("ckpt_table");
  ParamTable<float> table;
  Rng rng(3);
  table.add_conv_weight("conv.w", 2, 3, 3, rng);
  table.add_zeros("conv.b", {2});
  table.at("conv.b").raw_value()[1] = 0.5f;
  const fs::path file = dir.path / "net.ckpt";
  save_checkpoint(file.string(), table_to_entries(table, "g."));

  ParamTable<float> other;
  Rng rng2(4);
  other.add_conv_weight("conv.w", 2, 3, 3, rng2);
  other.add_zeros("conv.b", {2});
  load_into_table(load_checkpoint(file.string()), other, "g.");
  CHECK(other.at("conv.w").value() == table.at("conv.w").value());
  CHECK(other.at("conv.b").value() == table.at("conv.b").value());
}

TEST_CASE("png: quantized round trip") {
  TempDir dir("png");
  Rng rng(5);
  // Start from an already-quantized image so the round trip is exact.
  std::vector<float> data(3 * 6 * 8);
  for (auto& v : data) v = float(rng.uniform_int(0, 255)) / 255.f;
  Tensor<float> image = Tensor<float>::from_data({1, 3, 6, 8}, data);
  const fs::path file = dir.path / "img.png";
  write_png(file.string(), image);
  Tensor<float> back = read_png(file.string());
  CHECK(back.shape() == image.shape());
  CHECK(testutil::max_abs_diff(back.value(), image.value()) == 0.0);
}

TEST_CASE("png: non-RGB input is rejected") {
  TempDir dir("png_gray");
  const fs::path file = dir.path / "gray.png";
  write_gray_png(file);
  CHECK_THROWS_WITH_AS(read_png(file.string()),
                       doctest::Contains("8-bit RGB"), std::runtime_error);
  CHECK_THROWS(read_png((dir.path / "missing.png").string()));
}

TEST_CASE("dataset_index: empty directory") {
  TempDir dir("ds_empty");
  CHECK(dataset_index(dir.path).empty());
  CHECK(dataset_index(dir.path / "nonexistent").empty());
}

TEST_CASE("dataset_index: pose pairs within each id") {
  TempDir dir("ds_pairs");
  auto touch = [&](const std::string& name) {
    std::ofstream(dir.path / name) << "x";
  };
  // Two poses of subject a -> exactly the two ordered pairs.
  touch("a_0.png");
  touch("a_0.uvm");
  touch("a_1.png");
  touch("a_1.uvm");
  touch("a_tex.png");
  // Three poses of subject b -> 6 ordered pairs, no texture.
  for (int p = 0; p < 3; ++p) {
    touch("b_" + std::to_string(p) + ".png");
    touch("b_" + std::to_string(p) + ".uvm");
  }
  // An incomplete view (no uvm) is ignored.
  touch("c_0.png");

  const std::vector<PairRecord> pairs = dataset_index(dir.path);
  int a_pairs = 0, b_pairs = 0, c_pairs = 0;
  for (const auto& p : pairs) {
    if (p.source.id == "a") {
      ++a_pairs;
      CHECK(p.gt_texture.has_value());
      CHECK(p.source.pose != p.target.pose);
    }
    if (p.source.id == "b") {
      ++b_pairs;
      CHECK_FALSE(p.gt_texture.has_value());
    }
    if (p.source.id == "c") ++c_pairs;
  }
  CHECK(a_pairs == 2);
  CHECK(b_pairs == 6);  // n·(n−1) with n = 3
  CHECK(c_pairs == 0);

  // Deterministic ordering regardless of creation order.
  const std::vector<PairRecord> again = dataset_index(dir.path);
  REQUIRE(again.size() == pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].source.id == again[i].source.id);
    CHECK(pairs[i].source.pose == again[i].source.pose);
    CHECK(pairs[i].target.pose == again[i].target.pose);
  }
}

TEST_CASE("id split is stable and partitions ids") {
  // Each id lands in exactly one split, independent of anything else.
  int test_count = 0;
  for (int i = 0; i < 200; ++i) {
    const std::string id = "subject_" + std::to_string(i);
    const Split a = id_split(id);
    const Split b = id_split(id);
    CHECK(a == b);
    if (a == Split::kTest) ++test_count;
  }
  CHECK(test_count > 10);
  CHECK(test_count < 80);
}

TEST_SUITE_END();
