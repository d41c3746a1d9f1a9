#include "retex/warp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace retex {

bool CoordTexture::complete() const {
  for (float k : known) {
    if (k == 0.f) return false;
  }
  return true;
}

void ColorTexture::clamp01() {
  for (float& v : rgb) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

struct BilinearTaps {
  int x0, x1, y0, y1;
  double fx, fy;
  bool interior_x, interior_y;
};

// Clamp-to-border lookup setup shared by splat, sampling and warping.
inline BilinearTaps bilinear_taps(double x, double y, int w, int h) {
  BilinearTaps t;
  const double xc = std::clamp(x, 0.0, double(w - 1));
  const double yc = std::clamp(y, 0.0, double(h - 1));
  t.interior_x = x > 0.0 && x < double(w - 1);
  t.interior_y = y > 0.0 && y < double(h - 1);
  t.x0 = int(std::floor(xc));
  t.y0 = int(std::floor(yc));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = xc - t.x0;
  t.fy = yc - t.y0;
  return t;
}

// Scatters one value tuple with bilinear weights into per-texel value and
// weight accumulators.
template <int kChannels>
void splat_one(double tu, double tv, const double* values, int tex_w,
               int tex_h, std::vector<double>* acc, std::vector<double>* wacc) {
  const BilinearTaps t = bilinear_taps(tu, tv, tex_w, tex_h);
  const double w00 = (1.0 - t.fx) * (1.0 - t.fy);
  const double w10 = t.fx * (1.0 - t.fy);
  const double w01 = (1.0 - t.fx) * t.fy;
  const double w11 = t.fx * t.fy;
  const int idx[4] = {t.y0 * tex_w + t.x0, t.y0 * tex_w + t.x1,
                      t.y1 * tex_w + t.x0, t.y1 * tex_w + t.x1};
  const double wgt[4] = {w00, w10, w01, w11};
  const size_t plane = size_t(tex_w) * tex_h;
  for (int tap = 0; tap < 4; ++tap) {
    if (wgt[tap] == 0.0) continue;
    (*wacc)[idx[tap]] += wgt[tap];
    for (int c = 0; c < kChannels; ++c) {
      (*acc)[c * plane + idx[tap]] += wgt[tap] * values[c];
    }
  }
}

}  // namespace

CoordTexture splat_coordinates(const UvMap& source_map, int tex_w, int tex_h) {
  const size_t plane = size_t(tex_w) * tex_h;
  std::vector<double> acc(2 * plane, 0.0);
  std::vector<double> wacc(plane, 0.0);
  for (int py = 0; py < source_map.height; ++py) {
    for (int px = 0; px < source_map.width; ++px) {
      const size_t i = source_map.at(px, py);
      if (source_map.valid[i] == 0.f) continue;
      const double tu = std::clamp(double(source_map.u[i]), 0.0, 1.0) * (tex_w - 1);
      const double tv = std::clamp(double(source_map.v[i]), 0.0, 1.0) * (tex_h - 1);
      const double values[2] = {double(px), double(py)};
      splat_one<2>(tu, tv, values, tex_w, tex_h, &acc, &wacc);
    }
  }
  CoordTexture out(tex_w, tex_h);
  for (size_t i = 0; i < plane; ++i) {
    if (wacc[i] > kSplatWeightEps) {
      out.x[i] = float(acc[i] / wacc[i]);
      out.y[i] = float(acc[plane + i] / wacc[i]);
      out.known[i] = 1.f;
    }
  }
  return out;
}

ColorSplat splat_colors(const Tensor<float>& image, const UvMap& source_map,
                        int tex_w, int tex_h) {
  if (image.shape().size() != 4 || image.extent(0) != 1 ||
      image.extent(1) != 3) {
    throw std::invalid_argument("splat_colors: image must be 1×3×H×W");
  }
  if (image.extent(2) != source_map.height ||
      image.extent(3) != source_map.width) {
    throw std::invalid_argument("splat_colors: image/map extents differ");
  }
  const size_t img_plane = size_t(source_map.width) * source_map.height;
  const float* rgb = image.value().data();
  const size_t plane = size_t(tex_w) * tex_h;
  std::vector<double> acc(3 * plane, 0.0);
  std::vector<double> wacc(plane, 0.0);
  for (int py = 0; py < source_map.height; ++py) {
    for (int px = 0; px < source_map.width; ++px) {
      const size_t i = source_map.at(px, py);
      if (source_map.valid[i] == 0.f) continue;
      const double tu = std::clamp(double(source_map.u[i]), 0.0, 1.0) * (tex_w - 1);
      const double tv = std::clamp(double(source_map.v[i]), 0.0, 1.0) * (tex_h - 1);
      const double values[3] = {double(rgb[i]), double(rgb[img_plane + i]),
                                double(rgb[2 * img_plane + i])};
      splat_one<3>(tu, tv, values, tex_w, tex_h, &acc, &wacc);
    }
  }
  ColorSplat out;
  out.texture = ColorTexture(tex_w, tex_h);
  out.known.assign(plane, 0.f);
  for (size_t i = 0; i < plane; ++i) {
    if (wacc[i] > kSplatWeightEps) {
      for (int c = 0; c < 3; ++c) {
        out.texture.rgb[c * plane + i] = float(acc[c * plane + i] / wacc[i]);
      }
      out.known[i] = 1.f;
    }
  }
  out.texture.clamp01();
  return out;
}

template <typename S>
Tensor<S> sample_bilinear(const Tensor<S>& source, const Tensor<S>& coords) {
  if (source.shape().size() != 4 || coords.shape().size() != 4) {
    throw std::invalid_argument("sample_bilinear: expects 4-D tensors");
  }
  if (coords.extent(1) != 2 || coords.extent(0) != source.extent(0)) {
    throw std::invalid_argument(
        "sample_bilinear: coords must be N×2×H'×W' with matching batch");
  }
  const int n = source.extent(0), c = source.extent(1);
  const int h = source.extent(2), w = source.extent(3);
  const int oh = coords.extent(2), ow = coords.extent(3);
  const int64_t splane = int64_t(h) * w;
  const int64_t oplane = int64_t(oh) * ow;
  const auto& sv = source.value();
  const auto& cv = coords.value();
  Shape out_shape = {n, c, oh, ow};
  std::vector<S> out(shape_numel(out_shape));
  for (int b = 0; b < n; ++b) {
    const S* cx = cv.data() + b * 2 * oplane;
    const S* cy = cx + oplane;
    for (int64_t q = 0; q < oplane; ++q) {
      const BilinearTaps t = bilinear_taps(double(cx[q]), double(cy[q]), w, h);
      const S w00 = S((1.0 - t.fx) * (1.0 - t.fy));
      const S w10 = S(t.fx * (1.0 - t.fy));
      const S w01 = S((1.0 - t.fx) * t.fy);
      const S w11 = S(t.fx * t.fy);
      for (int ci = 0; ci < c; ++ci) {
        const S* plane = sv.data() + (int64_t(b) * c + ci) * splane;
        out[(int64_t(b) * c + ci) * oplane + q] =
            w00 * plane[t.y0 * w + t.x0] + w10 * plane[t.y0 * w + t.x1] +
            w01 * plane[t.y1 * w + t.x0] + w11 * plane[t.y1 * w + t.x1];
      }
    }
  }
  auto src_impl = source.impl_ptr();
  auto coord_impl = coords.impl_ptr();
  return Tensor<S>::make_op(
      out_shape, std::move(out), {source, coords},
      [src_impl, coord_impl, n, c, h, w, oh, ow](detail::TensorImpl<S>& self) {
        const int64_t splane = int64_t(h) * w;
        const int64_t oplane = int64_t(oh) * ow;
        const bool need_src = src_impl->requires_grad;
        const bool need_coords = coord_impl->requires_grad;
        if (need_src) src_impl->ensure_grad();
        if (need_coords) coord_impl->ensure_grad();
        for (int b = 0; b < n; ++b) {
          const S* cx = coord_impl->value.data() + b * 2 * oplane;
          const S* cy = cx + oplane;
          S* gx = need_coords ? coord_impl->grad.data() + b * 2 * oplane
                              : nullptr;
          S* gy = need_coords ? gx + oplane : nullptr;
          for (int64_t q = 0; q < oplane; ++q) {
            const BilinearTaps t =
                bilinear_taps(double(cx[q]), double(cy[q]), w, h);
            const S w00 = S((1.0 - t.fx) * (1.0 - t.fy));
            const S w10 = S(t.fx * (1.0 - t.fy));
            const S w01 = S((1.0 - t.fx) * t.fy);
            const S w11 = S(t.fx * t.fy);
            S dx_acc = S(0), dy_acc = S(0);
            for (int ci = 0; ci < c; ++ci) {
              const int64_t base = (int64_t(b) * c + ci) * splane;
              const S g = self.grad[(int64_t(b) * c + ci) * oplane + q];
              if (need_src) {
                // Adjoint of sampling: scatter the output gradient with the
                // same four weights (unnormalized splat).
                S* gp = src_impl->grad.data() + base;
                gp[t.y0 * w + t.x0] += w00 * g;
                gp[t.y0 * w + t.x1] += w10 * g;
                gp[t.y1 * w + t.x0] += w01 * g;
                gp[t.y1 * w + t.x1] += w11 * g;
              }
              if (need_coords) {
                const S* sp = src_impl->value.data() + base;
                const S s00 = sp[t.y0 * w + t.x0], s10 = sp[t.y0 * w + t.x1];
                const S s01 = sp[t.y1 * w + t.x0], s11 = sp[t.y1 * w + t.x1];
                dx_acc += g * S((double(s10) - double(s00)) * (1.0 - t.fy) +
                                (double(s11) - double(s01)) * t.fy);
                dy_acc += g * S((double(s01) - double(s00)) * (1.0 - t.fx) +
                                (double(s11) - double(s10)) * t.fx);
              }
            }
            if (need_coords) {
              if (t.interior_x) gx[q] += dx_acc;
              if (t.interior_y) gy[q] += dy_acc;
            }
          }
        }
      },
      "sample_bilinear");
}

ColorTexture texture_from_coords(const Tensor<float>& source,
                                 const CoordTexture& d) {
  if (!d.complete()) {
    throw std::invalid_argument(
        "texture_from_coords: coordinate map has unknown texels; inpaint "
        "first");
  }
  NoGradGuard no_grad;
  auto [coords, mask] = coord_texture_to_tensors<float>(d);
  (void)mask;
  Tensor<float> sampled = sample_bilinear(source, coords);
  ColorTexture out = tensor_to_color_texture(sampled);
  out.clamp01();
  return out;
}

WarpedMaps warp_to_target(const ColorTexture& texture, const CoordTexture& d,
                          const UvMap& target_map) {
  if (texture.width != d.width || texture.height != d.height) {
    throw std::invalid_argument("warp_to_target: texture/coord extents differ");
  }
  if (!d.complete()) {
    throw std::invalid_argument("warp_to_target: coordinate map incomplete");
  }
  const int tw = texture.width, th = texture.height;
  const size_t tplane = size_t(tw) * th;
  WarpedMaps out;
  out.rgb = ColorTexture(target_map.width, target_map.height);
  out.coords = CoordTexture(target_map.width, target_map.height);
  const size_t plane = size_t(target_map.width) * target_map.height;
  for (int py = 0; py < target_map.height; ++py) {
    for (int px = 0; px < target_map.width; ++px) {
      const size_t i = target_map.at(px, py);
      if (target_map.valid[i] == 0.f) continue;
      const double tu = std::clamp(double(target_map.u[i]), 0.0, 1.0) * (tw - 1);
      const double tv = std::clamp(double(target_map.v[i]), 0.0, 1.0) * (th - 1);
      const BilinearTaps t = bilinear_taps(tu, tv, tw, th);
      const double w00 = (1.0 - t.fx) * (1.0 - t.fy);
      const double w10 = t.fx * (1.0 - t.fy);
      const double w01 = (1.0 - t.fx) * t.fy;
      const double w11 = t.fx * t.fy;
      for (int c = 0; c < 3; ++c) {
        const float* p = texture.rgb.data() + c * tplane;
        out.rgb.rgb[c * plane + i] =
            float(w00 * p[t.y0 * tw + t.x0] + w10 * p[t.y0 * tw + t.x1] +
                  w01 * p[t.y1 * tw + t.x0] + w11 * p[t.y1 * tw + t.x1]);
      }
      const float* dx = d.x.data();
      const float* dy = d.y.data();
      out.coords.x[i] =
          float(w00 * dx[t.y0 * tw + t.x0] + w10 * dx[t.y0 * tw + t.x1] +
                w01 * dx[t.y1 * tw + t.x0] + w11 * dx[t.y1 * tw + t.x1]);
      out.coords.y[i] =
          float(w00 * dy[t.y0 * tw + t.x0] + w10 * dy[t.y0 * tw + t.x1] +
                w01 * dy[t.y1 * tw + t.x0] + w11 * dy[t.y1 * tw + t.x1]);
      out.coords.known[i] = 1.f;
    }
  }
  out.rgb.clamp01();
  return out;
}

ColorTexture warp_texture(const ColorTexture& texture,
                          const UvMap& target_map) {
  const int tw = texture.width, th = texture.height;
  const size_t tplane = size_t(tw) * th;
  ColorTexture out(target_map.width, target_map.height);
  const size_t plane = size_t(target_map.width) * target_map.height;
  for (int py = 0; py < target_map.height; ++py) {
    for (int px = 0; px < target_map.width; ++px) {
      const size_t i = target_map.at(px, py);
      if (target_map.valid[i] == 0.f) continue;
      const double tu = std::clamp(double(target_map.u[i]), 0.0, 1.0) * (tw - 1);
      const double tv = std::clamp(double(target_map.v[i]), 0.0, 1.0) * (th - 1);
      const BilinearTaps t = bilinear_taps(tu, tv, tw, th);
      const double w00 = (1.0 - t.fx) * (1.0 - t.fy);
      const double w10 = t.fx * (1.0 - t.fy);
      const double w01 = (1.0 - t.fx) * t.fy;
      const double w11 = t.fx * t.fy;
      for (int c = 0; c < 3; ++c) {
        const float* p = texture.rgb.data() + c * tplane;
        out.rgb[c * plane + i] =
            float(w00 * p[t.y0 * tw + t.x0] + w10 * p[t.y0 * tw + t.x1] +
                  w01 * p[t.y1 * tw + t.x0] + w11 * p[t.y1 * tw + t.x1]);
      }
    }
  }
  out.clamp01();
  return out;
}

CoordTexture downsample_warpfield(const CoordTexture& field, int factor) {
  if (factor != 2 && factor != 4 && factor != 8) {
    throw std::invalid_argument("downsample_warpfield: factor must be 2, 4 or 8");
  }
  if (field.width % factor != 0 || field.height % factor != 0) {
    throw std::invalid_argument(
        "downsample_warpfield: extents not divisible by factor");
  }
  const int ow = field.width / factor, oh = field.height / factor;
  const double offset = 0.5 * (factor - 1);
  CoordTexture out(ow, oh);
  for (int by = 0; by < oh; ++by) {
    for (int bx = 0; bx < ow; ++bx) {
      double sx = 0.0, sy = 0.0;
      int count = 0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const size_t i = field.at(bx * factor + dx, by * factor + dy);
          if (field.known[i] == 0.f) continue;
          sx += field.x[i];
          sy += field.y[i];
          ++count;
        }
      }
      if (count == 0) continue;
      const size_t o = out.at(bx, by);
      out.x[o] = float((sx / count - offset) / factor);
      out.y[o] = float((sy / count - offset) / factor);
      out.known[o] = 1.f;
    }
  }
  return out;
}

CoordTexture fill_unknown_nearest(const CoordTexture& ct) {
  CoordTexture out = ct;
  std::deque<std::pair<int, int>> frontier;
  for (int ty = 0; ty < ct.height; ++ty) {
    for (int tx = 0; tx < ct.width; ++tx) {
      if (ct.known[ct.at(tx, ty)] != 0.f) frontier.emplace_back(tx, ty);
    }
  }
  if (frontier.empty()) {
    throw std::invalid_argument("fill_unknown_nearest: no known texels");
  }
  const int dx4[4] = {1, -1, 0, 0};
  const int dy4[4] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    auto [tx, ty] = frontier.front();
    frontier.pop_front();
    const size_t i = out.at(tx, ty);
    for (int k = 0; k < 4; ++k) {
      const int nx = tx + dx4[k], ny = ty + dy4[k];
      if (nx < 0 || nx >= out.width || ny < 0 || ny >= out.height) continue;
      const size_t j = out.at(nx, ny);
      if (out.known[j] != 0.f) continue;
      out.x[j] = out.x[i];
      out.y[j] = out.y[i];
      out.known[j] = 1.f;
      frontier.emplace_back(nx, ny);
    }
  }
  return out;
}

template <typename S>
Tensor<S> meshgrid_pixels(int width, int height) {
  const int64_t plane = int64_t(width) * height;
  std::vector<S> data(2 * plane);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      data[y * width + x] = S(x);
      data[plane + y * width + x] = S(y);
    }
  }
  return Tensor<S>::from_data({1, 2, height, width}, std::move(data));
}

template <typename S>
Tensor<S> coord_texture_to_input(const CoordTexture& ct, int image_w,
                                 int image_h) {
  const int64_t plane = int64_t(ct.width) * ct.height;
  std::vector<S> data(3 * plane);
  const S nx = S(1) / S(std::max(image_w - 1, 1));
  const S ny = S(1) / S(std::max(image_h - 1, 1));
  for (int64_t i = 0; i < plane; ++i) {
    const bool known = ct.known[i] != 0.f;
    data[i] = known ? S(ct.x[i]) * nx : S(CoordTexture::kUnknown);
    data[plane + i] = known ? S(ct.y[i]) * ny : S(CoordTexture::kUnknown);
    data[2 * plane + i] = S(ct.known[i]);
  }
  return Tensor<S>::from_data({1, 3, ct.height, ct.width}, std::move(data));
}

template <typename S>
Tensor<S> color_splat_to_input(const ColorSplat& cs) {
  const int64_t plane = int64_t(cs.texture.width) * cs.texture.height;
  std::vector<S> data(4 * plane);
  for (int64_t i = 0; i < plane; ++i) {
    const bool known = cs.known[i] != 0.f;
    for (int c = 0; c < 3; ++c) {
      data[c * plane + i] =
          known ? S(cs.texture.rgb[c * plane + i]) : S(CoordTexture::kUnknown);
    }
    data[3 * plane + i] = S(cs.known[i]);
  }
  return Tensor<S>::from_data({1, 4, cs.texture.height, cs.texture.width},
                              std::move(data));
}

template <typename S>
Tensor<S> color_texture_to_tensor(const ColorTexture& ct) {
  std::vector<S> data(ct.rgb.size());
  std::copy(ct.rgb.begin(), ct.rgb.end(), data.begin());
  return Tensor<S>::from_data({1, 3, ct.height, ct.width}, std::move(data));
}

ColorTexture tensor_to_color_texture(const Tensor<float>& t) {
  if (t.shape().size() != 4 || t.extent(0) != 1 || t.extent(1) != 3) {
    throw std::invalid_argument("tensor_to_color_texture: expects 1×3×H×W");
  }
  ColorTexture out(t.extent(3), t.extent(2));
  std::copy(t.value().begin(), t.value().end(), out.rgb.begin());
  out.clamp01();
  return out;
}

template <typename S>
std::pair<Tensor<S>, Tensor<S>> coord_texture_to_tensors(
    const CoordTexture& ct) {
  const int64_t plane = int64_t(ct.width) * ct.height;
  std::vector<S> coords(2 * plane);
  std::vector<S> mask(plane);
  for (int64_t i = 0; i < plane; ++i) {
    coords[i] = S(ct.x[i]);
    coords[plane + i] = S(ct.y[i]);
    mask[i] = S(ct.known[i]);
  }
  return {Tensor<S>::from_data({1, 2, ct.height, ct.width}, std::move(coords)),
          Tensor<S>::from_data({1, 1, ct.height, ct.width}, std::move(mask))};
}

CoordTexture tensor_to_coord_texture(const Tensor<float>& coords) {
  if (coords.shape().size() != 4 || coords.extent(0) != 1 ||
      coords.extent(1) != 2) {
    throw std::invalid_argument("tensor_to_coord_texture: expects 1×2×H×W");
  }
  CoordTexture out(coords.extent(3), coords.extent(2));
  const int64_t plane = int64_t(out.width) * out.height;
  const auto& v = coords.value();
  for (int64_t i = 0; i < plane; ++i) {
    out.x[i] = v[i];
    out.y[i] = v[plane + i];
    out.known[i] = 1.f;
  }
  return out;
}

template <typename S>
Tensor<S> uvmap_to_tensor(const UvMap& map) {
  const int64_t plane = int64_t(map.width) * map.height;
  std::vector<S> data(3 * plane);
  for (int64_t i = 0; i < plane; ++i) {
    const bool valid = map.valid[i] != 0.f;
    data[i] = valid ? S(map.u[i]) : S(0);
    data[plane + i] = valid ? S(map.v[i]) : S(0);
    data[2 * plane + i] = S(map.valid[i]);
  }
  return Tensor<S>::from_data({1, 3, map.height, map.width}, std::move(data));
}

#define RETEX_INSTANTIATE_WARP(S)                                             \
  template Tensor<S> sample_bilinear(const Tensor<S>&, const Tensor<S>&);     \
  template Tensor<S> meshgrid_pixels(int, int);                               \
  template Tensor<S> coord_texture_to_input(const CoordTexture&, int, int);   \
  template Tensor<S> color_splat_to_input(const ColorSplat&);                 \
  template Tensor<S> color_texture_to_tensor(const ColorTexture&);            \
  template std::pair<Tensor<S>, Tensor<S>> coord_texture_to_tensors(          \
      const CoordTexture&);                                                   \
  template Tensor<S> uvmap_to_tensor(const UvMap&);

RETEX_INSTANTIATE_WARP(float)
RETEX_INSTANTIATE_WARP(double)
#undef RETEX_INSTANTIATE_WARP

}  // namespace retex
