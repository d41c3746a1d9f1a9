#include <doctest.h>

#include <cmath>

#include "retex/gradcheck.hpp"
#include "retex/ops.hpp"
#include "retex/synth.hpp"
#include "retex/warp.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace retex;

TEST_SUITE_BEGIN("warp");

namespace {

UvMap random_uvmap(Rng& rng, int w, int h, double valid_rate = 0.7) {
  UvMap map(w, h);
  for (size_t i = 0; i < map.u.size(); ++i) {
    if (rng.uniform(0.0, 1.0) < valid_rate) {
      map.u[i] = float(rng.uniform(0.0, 1.0));
      map.v[i] = float(rng.uniform(0.0, 1.0));
      map.valid[i] = 1.f;
    }
  }
  return map;
}

}  // namespace

TEST_CASE("splat: one pixel on an exact texel") {
  UvMap map(8, 8);
  const size_t p = map.at(3, 4);
  map.u[p] = 1.f / 7.f;  // texel column 1 of an 8-wide texture
  map.v[p] = 2.f / 7.f;  // texel row 2
  map.valid[p] = 1.f;
  CoordTexture c = splat_coordinates(map, 8, 8);
  CHECK(c.known[c.at(1, 2)] == 1.f);
  CHECK(c.x[c.at(1, 2)] == doctest::Approx(3.0));
  CHECK(c.y[c.at(1, 2)] == doctest::Approx(4.0));
  int known = 0;
  for (float k : c.known) known += int(k);
  CHECK(known == 1);
  CHECK(c.x[c.at(0, 0)] == CoordTexture::kUnknown);
  CHECK(c.y[c.at(0, 0)] == CoordTexture::kUnknown);
}

TEST_CASE("splat: weight normalization cancels for a midpoint hit") {
  UvMap map(8, 8);
  const size_t p = map.at(3, 4);
  map.u[p] = 1.5f / 7.f;  // halfway between texel columns 1 and 2
  map.v[p] = 2.f / 7.f;
  map.valid[p] = 1.f;
  CoordTexture c = splat_coordinates(map, 8, 8);
  for (int tx : {1, 2}) {
    CHECK(c.known[c.at(tx, 2)] == 1.f);
    CHECK(c.x[c.at(tx, 2)] == doctest::Approx(3.0));
    CHECK(c.y[c.at(tx, 2)] == doctest::Approx(4.0));
  }
}

TEST_CASE("splat: empty input yields an all-unknown texture") {
  UvMap map(4, 4);
  CoordTexture c = splat_coordinates(map, 6, 6);
  for (float k : c.known) CHECK(k == 0.f);
  CHECK_FALSE(c.complete());
}

TEST_CASE("splat_coordinates matches the explicit-loop oracle") {
  Rng rng(31);
  const UvMap map = random_uvmap(rng, 8, 8);
  const CoordTexture c = splat_coordinates(map, 6, 6);
  std::vector<double> values(2 * 64);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      values[y * 8 + x] = x;
      values[64 + y * 8 + x] = y;
    }
  }
  const oracle::SplatOracle ref =
      oracle::splat_loops(values, 2, map, 6, 6, kSplatWeightEps);
  for (int t = 0; t < 36; ++t) {
    CHECK(int(c.known[t]) == int(ref.known[t]));
    if (ref.known[t]) {
      CHECK(c.x[t] == doctest::Approx(ref.value[t]).epsilon(1e-6));
      CHECK(c.y[t] == doctest::Approx(ref.value[36 + t]).epsilon(1e-6));
    }
  }
}

TEST_CASE("splat_colors: exact texel copies the color") {
  Rng rng(33);
  Tensor<float> image = testutil::random_tensor<float>(rng, {1, 3, 8, 8}, 0, 1);
  UvMap map(8, 8);
  const size_t p = map.at(5, 1);
  map.u[p] = 2.f / 5.f;  // texel (2,3) of a 6x6 texture
  map.v[p] = 3.f / 5.f;
  map.valid[p] = 1.f;
  ColorSplat cs = splat_colors(image, map, 6, 6);
  CHECK(cs.known[3 * 6 + 2] == 1.f);
  for (int c = 0; c < 3; ++c) {
    CHECK(cs.texture.rgb[cs.texture.at(c, 2, 3)] ==
          doctest::Approx(image.value()[(c * 8 + 1) * 8 + 5]));
  }
}

TEST_CASE("splat partition of unity: constant fields stay constant") {
  Rng rng(37);
  const UvMap map = random_uvmap(rng, 12, 12, 0.8);
  Tensor<float> constant = Tensor<float>::full({1, 3, 12, 12}, 0.4f);
  ColorSplat cs = splat_colors(constant, map, 8, 8);
  for (int t = 0; t < 64; ++t) {
    if (cs.known[t] == 0.f) continue;
    for (int c = 0; c < 3; ++c) {
      CHECK(cs.texture.rgb[c * 64 + t] == doctest::Approx(0.4).epsilon(1e-6));
    }
  }
}

TEST_CASE("sample_bilinear basics") {
  Tensor<double> img = Tensor<double>::from_data({1, 1, 2, 2}, {0, 1, 2, 3});
  auto sample_at = [&](double x, double y) {
    Tensor<double> coords = Tensor<double>::from_data({1, 2, 1, 1}, {x, y});
    return sample_bilinear(img, coords).item();
  };
  CHECK(sample_at(1.0, 0.0) == 1.0);  // integer coordinate, exact
  CHECK(sample_at(0.5, 0.5) == doctest::Approx(1.5));
  // Border clamping: far out of range sticks to the nearest corner.
  CHECK(sample_at(-3.0, -3.0) == 0.0);
  CHECK(sample_at(10.0, 10.0) == 3.0);
}

TEST_CASE("sampling at exact integer grids equals direct indexing bit-wise") {
  Rng rng(41);
  Tensor<double> img = testutil::random_tensor<double>(rng, {1, 2, 5, 7});
  std::vector<double> coords;
  std::vector<double> xs, ys;
  for (int i = 0; i < 12; ++i) {
    xs.push_back(rng.uniform_int(0, 6));
    ys.push_back(rng.uniform_int(0, 4));
  }
  coords.insert(coords.end(), xs.begin(), xs.end());
  coords.insert(coords.end(), ys.begin(), ys.end());
  Tensor<double> ct = Tensor<double>::from_data({1, 2, 3, 4}, coords);
  Tensor<double> out = sample_bilinear(img, ct);
  for (int c = 0; c < 2; ++c) {
    for (int q = 0; q < 12; ++q) {
      const double direct =
          img.value()[(c * 5 + int(ys[q])) * 7 + int(xs[q])];
      CHECK(out.value()[c * 12 + q] == direct);  // bit-wise
    }
  }
}

TEST_CASE("sampling a constant image returns the constant everywhere") {
  Tensor<double> img = Tensor<double>::full({1, 1, 4, 4}, 0.77);
  Rng rng(43);
  std::vector<double> coords(2 * 9);
  for (auto& c : coords) c = rng.uniform(-5.0, 9.0);  // incl. out of range
  Tensor<double> ct = Tensor<double>::from_data({1, 2, 3, 3}, coords);
  Tensor<double> out = sample_bilinear(img, ct);
  for (double v : out.value()) CHECK(v == doctest::Approx(0.77));
}

TEST_CASE("coordinate gradient matches finite differences") {
  Rng rng(47);
  Tensor<double> img = testutil::random_tensor<double>(rng, {1, 3, 6, 6});
  std::vector<double> coords;
  for (int q = 0; q < 4; ++q) coords.push_back(rng.uniform_int(0, 4) + 0.4);
  for (int q = 0; q < 4; ++q) coords.push_back(rng.uniform_int(0, 4) + 0.6);
  Tensor<double> ct =
      Tensor<double>::from_data({1, 2, 2, 2}, coords, true);
  GradCheckResult r = gradcheck(
      "coords", {ct}, [&] { return sample_bilinear(img, ct); }, 1e-5, 3);
  CHECK(r.pass);
}

TEST_CASE("splat/sample adjointness") {
  // For fixed coords, the sampler's backward w.r.t. the source must equal
  // splatting the output gradient with the same bilinear weights.
  Rng rng(53);
  const int h = 5, w = 5, oh = 3, ow = 3;
  Tensor<double> src = testutil::random_tensor<double>(rng, {1, 1, h, w},
                                                       -1, 1, true);
  std::vector<double> coords(2 * oh * ow);
  for (int q = 0; q < oh * ow; ++q) {
    coords[q] = rng.uniform(0.0, w - 1.0);
    coords[oh * ow + q] = rng.uniform(0.0, h - 1.0);
  }
  Tensor<double> ct = Tensor<double>::from_data({1, 2, oh, ow}, coords);
  Tensor<double> out = sample_bilinear(src, ct);

  std::vector<double> gout(oh * ow);
  for (auto& g : gout) g = rng.uniform(-1.0, 1.0);
  sum(mul(out, Tensor<double>::from_data({1, 1, oh, ow}, gout))).backward();

  // Unnormalized scatter of gout with the same weights.
  std::vector<double> expected(h * w, 0.0);
  for (int q = 0; q < oh * ow; ++q) {
    const double x = coords[q], y = coords[oh * ow + q];
    const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    expected[y0 * w + x0] += (1 - fx) * (1 - fy) * gout[q];
    expected[y0 * w + x1] += fx * (1 - fy) * gout[q];
    expected[y1 * w + x0] += (1 - fx) * fy * gout[q];
    expected[y1 * w + x1] += fx * fy * gout[q];
  }
  CHECK(testutil::max_abs_diff(src.grad(), expected) < 1e-12);
}

TEST_CASE("texture_from_coords requires a complete map") {
  Rng rng(59);
  Tensor<float> img = testutil::random_tensor<float>(rng, {1, 3, 6, 6}, 0, 1);
  CoordTexture incomplete(4, 4);
  CHECK_THROWS(texture_from_coords(img, incomplete));
}

TEST_CASE("texture_from_coords: constant map gives a uniform texture") {
  Rng rng(61);
  Tensor<float> img = testutil::random_tensor<float>(rng, {1, 3, 6, 6}, 0, 1);
  CoordTexture d(4, 4);
  for (size_t i = 0; i < d.x.size(); ++i) {
    d.x[i] = 2.f;
    d.y[i] = 3.f;
    d.known[i] = 1.f;
  }
  ColorTexture t = texture_from_coords(img, d);
  for (int c = 0; c < 3; ++c) {
    const float expected = img.value()[(c * 6 + 3) * 6 + 2];
    for (int i = 0; i < 16; ++i) {
      CHECK(t.rgb[c * 16 + i] == doctest::Approx(expected));
    }
  }
}

TEST_CASE("texture_from_coords matches the scalar bilinear oracle") {
  Rng rng(67);
  Tensor<float> img = testutil::random_tensor<float>(rng, {1, 3, 7, 9}, 0, 1);
  CoordTexture d(5, 4);
  for (size_t i = 0; i < d.x.size(); ++i) {
    d.x[i] = float(rng.uniform(0.0, 8.0));
    d.y[i] = float(rng.uniform(0.0, 6.0));
    d.known[i] = 1.f;
  }
  ColorTexture t = texture_from_coords(img, d);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> plane(63);
    for (int i = 0; i < 63; ++i) plane[i] = img.value()[c * 63 + i];
    for (int i = 0; i < 20; ++i) {
      const double ref = oracle::bilinear_scalar(plane, 7, 9, d.x[i], d.y[i]);
      CHECK(t.rgb[c * 20 + i] == doctest::Approx(ref).epsilon(1e-6));
    }
  }
}

TEST_CASE("warp_to_target handles all-invalid and single-texel cases") {
  ColorTexture tex(4, 4);
  for (auto& v : tex.rgb) v = 0.6f;
  CoordTexture d(4, 4);
  for (size_t i = 0; i < d.x.size(); ++i) {
    d.x[i] = 1.f;
    d.y[i] = 1.f;
    d.known[i] = 1.f;
  }

  UvMap invalid(5, 5);
  WarpedMaps all_invalid = warp_to_target(tex, d, invalid);
  for (float v : all_invalid.rgb.rgb) CHECK(v == 0.f);
  for (float k : all_invalid.coords.known) CHECK(k == 0.f);

  UvMap everywhere(5, 5);
  for (size_t i = 0; i < everywhere.u.size(); ++i) {
    everywhere.u[i] = 0.5f;
    everywhere.v[i] = 0.5f;
    everywhere.valid[i] = 1.f;
  }
  WarpedMaps constant = warp_to_target(tex, d, everywhere);
  for (size_t i = 0; i < constant.coords.known.size(); ++i) {
    CHECK(constant.coords.known[i] == 1.f);
    CHECK(constant.rgb.rgb[i] == doctest::Approx(0.6));
    CHECK(constant.coords.x[i] == doctest::Approx(1.0));
  }
}

TEST_CASE("downsample_warpfield: identity meshgrid maps to identity") {
  const int n = 8;
  CoordTexture e(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      e.x[e.at(x, y)] = float(x);
      e.y[e.at(x, y)] = float(y);
      e.known[e.at(x, y)] = 1.f;
    }
  }
  for (int factor : {2, 4, 8}) {
    CoordTexture down = downsample_warpfield(e, factor);
    for (int y = 0; y < n / factor; ++y) {
      for (int x = 0; x < n / factor; ++x) {
        CHECK(down.known[down.at(x, y)] == 1.f);
        CHECK(down.x[down.at(x, y)] == doctest::Approx(x).epsilon(1e-6));
        CHECK(down.y[down.at(x, y)] == doctest::Approx(y).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("downsample_warpfield: empty blocks stay unknown") {
  CoordTexture e(4, 4);
  // Only the top-left block carries data.
  e.x[e.at(1, 1)] = 3.f;
  e.y[e.at(1, 1)] = 2.f;
  e.known[e.at(1, 1)] = 1.f;
  CoordTexture down = downsample_warpfield(e, 2);
  CHECK(down.known[down.at(0, 0)] == 1.f);
  CHECK(down.known[down.at(1, 0)] == 0.f);
  CHECK(down.known[down.at(0, 1)] == 0.f);
  CHECK(down.known[down.at(1, 1)] == 0.f);
  CHECK(down.x[down.at(1, 1)] == CoordTexture::kUnknown);
}

TEST_CASE("downsample_warpfield matches the block-loop oracle") {
  Rng rng(71);
  CoordTexture e(16, 8);
  for (size_t i = 0; i < e.x.size(); ++i) {
    if (rng.uniform(0.0, 1.0) < 0.6) {
      e.x[i] = float(rng.uniform(0.0, 15.0));
      e.y[i] = float(rng.uniform(0.0, 7.0));
      e.known[i] = 1.f;
    }
  }
  for (int factor : {2, 4}) {
    const CoordTexture a = downsample_warpfield(e, factor);
    const CoordTexture b = oracle::downsample_warpfield_loops(e, factor);
    CHECK(a.known == b.known);
    for (size_t i = 0; i < a.x.size(); ++i) {
      if (a.known[i] == 0.f) continue;
      CHECK(a.x[i] == doctest::Approx(b.x[i]).epsilon(1e-6));
      CHECK(a.y[i] == doctest::Approx(b.y[i]).epsilon(1e-6));
    }
  }
  CHECK_THROWS(downsample_warpfield(e, 3));
  CoordTexture odd(6, 6);
  CHECK_THROWS(downsample_warpfield(odd, 4));  // 4 does not divide 6
}

TEST_CASE("identity-pose round trip reproduces the source") {
  // splat -> fill -> texture -> warp with M_N = M_S at the resolution the
  // texture stage actually runs at (the image must not undersample the
  // texture for the tight tolerance to be meaningful).
  SceneConfig config;
  config.rotation_diff_deg = 0.0;
  config.image_size = 128;
  const size_t plane = size_t(config.image_size) * config.image_size;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const SceneSample sample = generate_pair(seed, config);
    const CoordTexture c = splat_coordinates(sample.source_map, 64, 64);
    const CoordTexture d = fill_unknown_nearest(c);
    const ColorTexture t = texture_from_coords(sample.source_image, d);
    const WarpedMaps warped = warp_to_target(t, d, sample.source_map);
    double err = 0.0;
    int count = 0;
    const auto& src = sample.source_image.value();
    for (size_t i = 0; i < sample.source_map.valid.size(); ++i) {
      if (sample.source_map.valid[i] == 0.f) continue;
      for (int ch = 0; ch < 3; ++ch) {
        err += std::fabs(double(warped.rgb.rgb[ch * plane + i]) -
                         src[ch * plane + i]);
        ++count;
      }
    }
    CHECK(err / count <= 2.0 / 255.0);
  }
}

TEST_CASE("fill_unknown_nearest completes and preserves known texels") {
  Rng rng(73);
  CoordTexture c(8, 8);
  c.x[c.at(2, 2)] = 5.f;
  c.y[c.at(2, 2)] = 6.f;
  c.known[c.at(2, 2)] = 1.f;
  CoordTexture filled = fill_unknown_nearest(c);
  CHECK(filled.complete());
  for (size_t i = 0; i < filled.x.size(); ++i) {
    CHECK(filled.x[i] == 5.f);
    CHECK(filled.y[i] == 6.f);
  }
  CoordTexture empty(4, 4);
  CHECK_THROWS(fill_unknown_nearest(empty));
}

TEST_SUITE_END();
