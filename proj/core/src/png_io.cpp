#include "retex/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace retex {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Tensor<float> read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("read_png: cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 ||
      png_sig_cmp(header, 0, 8) != 0) {
    throw std::runtime_error("read_png: not a PNG file: " + path);
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: decode error in " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_RGB || bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: only 8-bit RGB supported: " + path);
  }
  pixels.resize(size_t(3) * w * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    row_ptrs[y] = pixels.data() + size_t(3) * w * y;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int64_t plane = int64_t(w) * h;
  std::vector<float> data(3 * plane);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      const png_byte* px = pixels.data() + (size_t(y) * w + x) * 3;
      const int64_t i = int64_t(y) * w + x;
      data[i] = px[0] / 255.0f;
      data[plane + i] = px[1] / 255.0f;
      data[2 * plane + i] = px[2] / 255.0f;
    }
  }
  return Tensor<float>::from_data({1, 3, int(h), int(w)}, std::move(data));
}

void write_png(const std::string& path, const Tensor<float>& image) {
  if (image.shape().size() != 4 || image.extent(0) != 1 ||
      image.extent(1) != 3) {
    throw std::invalid_argument("write_png: image must be 1×3×H×W");
  }
  const int h = image.extent(2), w = image.extent(3);
  const int64_t plane = int64_t(w) * h;
  const auto& v = image.value();
  std::vector<png_byte> pixels(size_t(3) * w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int64_t i = int64_t(y) * w + x;
      for (int c = 0; c < 3; ++c) {
        const float val = std::fmin(std::fmax(v[c * plane + i], 0.f), 1.f);
        pixels[(size_t(y) * w + x) * 3 + c] =
            png_byte(std::lround(val * 255.0f));
      }
    }
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("write_png: cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: encode error in " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, pixels.data() + size_t(3) * w * y);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace retex
