#include "retex/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "retex/rng.hpp"

namespace retex {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap01(double x) { return x - std::floor(x); }

// Canonical pattern parameter for mirror-symmetric textures: maps u so the
// front half [0.25, 0.75) covers [0,1) and each back texel lands on its
// mirrored front texel u ↦ wrap(1.5 − u). Continuous across both seams.
double fold_u(double u, bool mirror) {
  u = wrap01(u);
  if (!mirror) return u;
  if (u >= 0.25 && u < 0.75) return (u - 0.25) * 2.0;
  return (wrap01(1.5 - u) - 0.25) * 2.0;
}

using Color = std::array<double, 3>;

struct PatternParams {
  PatternKind kind = PatternKind::kStripes;
  std::vector<Color> palette;
  Color identity_color{};
  Color identity_accent{};
  int stripes_t = 8;
  int stripes_v = 0;  // 0 = no horizontal overlay
  int checker_t = 6;
  int checker_v = 6;
  struct Blob {
    double t, v, sigma;
    int color;
  };
  std::vector<Blob> blobs;
  int background = 0;
};

struct SceneDef {
  // Geometry in pixel units; camera is orthographic, centered.
  SurfaceKind surface;
  double cx, cy;
  double radius_x;  // azimuthal semi-axis
  double extent_y;  // cylinder half-height / ellipsoid y semi-axis
  double rot_source, rot_target;
  bool mirror;
  double identity_band_v;
  PatternParams pattern;
};

Color random_color(Rng& rng) {
  return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
          rng.uniform(0.05, 0.95)};
}

PatternParams make_pattern(Rng& rng, PatternKind kind) {
  PatternParams p;
  if (kind == PatternKind::kMixed) {
    const int pick = rng.uniform_int(0, 2);
    kind = pick == 0 ? PatternKind::kStripes
                     : (pick == 1 ? PatternKind::kChecker : PatternKind::kBlobs);
  }
  p.kind = kind;
  const int n_colors = rng.uniform_int(3, 5);
  for (int i = 0; i < n_colors; ++i) p.palette.push_back(random_color(rng));
  p.identity_color = random_color(rng);
  p.identity_accent = random_color(rng);
  p.stripes_t = rng.uniform_int(5, 10);
  p.stripes_v = rng.uniform_int(0, 1) ? rng.uniform_int(2, 4) : 0;
  p.checker_t = rng.uniform_int(4, 7);
  p.checker_v = rng.uniform_int(3, 6);
  p.background = rng.uniform_int(0, n_colors - 1);
  const int n_blobs = rng.uniform_int(10, 18);
  for (int i = 0; i < n_blobs; ++i) {
    p.blobs.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                       rng.uniform(0.03, 0.09),
                       rng.uniform_int(0, n_colors - 1)});
  }
  return p;
}

Color mix_colors(const Color& a, const Color& b, double w) {
  return {(1.0 - w) * a[0] + w * b[0], (1.0 - w) * a[1] + w * b[1],
          (1.0 - w) * a[2] + w * b[2]};
}

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Cells along a stripe axis with a smooth crossfade covering ~35% of each
// cell. Patterns stay full-contrast but band-limited, so bilinear texture
// resampling error stays quadratic instead of edge-dominated.
constexpr double kCellBlend = 0.5;

// Index of the cell at parameter s·cells plus the blend toward the next.
void soft_cell(double s, int cells, int* cell, double* blend) {
  const double pos = s * cells;
  const double base = std::floor(pos);
  *cell = int(base);
  const double frac = pos - base;
  *blend = smoothstep01((frac - (1.0 - kCellBlend)) / kCellBlend);
}

Color pattern_color(const PatternParams& p, double t, double v) {
  const int n = static_cast<int>(p.palette.size());
  switch (p.kind) {
    case PatternKind::kStripes: {
      int cell;
      double blend;
      soft_cell(t, p.stripes_t, &cell, &blend);
      Color c = mix_colors(p.palette[cell % n], p.palette[(cell + 1) % n],
                           blend);
      if (p.stripes_v > 0) {
        int vcell;
        double vblend;
        soft_cell(v, p.stripes_v, &vcell, &vblend);
        const double band = (vcell % 2 == 0) ? 1.0 - vblend : vblend;
        c = mix_colors(c, p.palette[(cell + 2) % n], 0.7 * band);
      }
      return c;
    }
    case PatternKind::kChecker: {
      int tc, vc;
      double tb, vb;
      soft_cell(t, p.checker_t, &tc, &tb);
      soft_cell(v, p.checker_v, &vc, &vb);
      const double pt = (tc % 2 == 0) ? tb : 1.0 - tb;
      const double pv = (vc % 2 == 0) ? vb : 1.0 - vb;
      const double w = pt * (1.0 - pv) + pv * (1.0 - pt);
      return mix_colors(p.palette[0], p.palette[1 % n], w);
    }
    case PatternKind::kBlobs: {
      Color c = p.palette[p.background];
      for (const auto& blob : p.blobs) {
        const double dt = t - blob.t, dv = v - blob.v;
        const double w =
            std::exp(-(dt * dt + dv * dv) / (2.0 * blob.sigma * blob.sigma));
        if (w < 1e-3) continue;
        c = mix_colors(c, p.palette[blob.color], w);
      }
      return c;
    }
    default:
      break;
  }
  return p.palette[0];
}

Color texel_color(const SceneDef& def, double u, double v) {
  Color body = pattern_color(def.pattern, fold_u(u, def.mirror), v);
  // Marked identity patch: flat identity color with a soft accent ring;
  // all transitions stay band-limited like the body patterns.
  const double band = (v - def.identity_band_v) /
                      std::max(1.0 - def.identity_band_v, 1e-9);
  if (band <= -0.15) return body;
  const double in_patch = smoothstep01((band + 0.2) / 0.2);
  const double ring = smoothstep01((band - 0.3) / 0.18) *
                      (1.0 - smoothstep01((band - 0.6) / 0.18));
  const Color patch =
      mix_colors(def.pattern.identity_color, def.pattern.identity_accent, ring);
  return mix_colors(body, patch, in_patch);
}

SceneDef make_scene(uint64_t seed, const SceneConfig& config) {
  Rng rng(seed);
  SceneDef def;
  def.surface = config.surface;
  def.cx = (config.image_size - 1) * 0.5;
  def.cy = (config.image_size - 1) * 0.5;
  const double scale = rng.uniform(0.95, 1.05);
  if (config.surface == SurfaceKind::kCylinder) {
    def.radius_x = 0.34 * config.image_size * scale;
    def.extent_y = 0.40 * config.image_size * scale;
  } else {
    def.radius_x = 0.36 * config.image_size * scale;
    def.extent_y = 0.44 * config.image_size * scale;
  }
  const double jitter = config.rotation_jitter_deg * kPi / 180.0;
  def.rot_source = rng.uniform(-jitter, jitter);
  def.rot_target = def.rot_source + config.rotation_diff_deg * kPi / 180.0;
  def.mirror = config.mirror_symmetry;
  def.identity_band_v = config.identity_band_v;
  def.pattern = make_pattern(rng, config.pattern);
  return def;
}

// Margin keeping silhouette-grazing pixels out of the valid set, where a
// single pixel would cover a huge texel range. 0.93 keeps the azimuthal
// pixel spacing within ~1.3 texels at the default resolutions, so forward
// splats stay gap-free near the rim.
constexpr double kRimLimit = 0.90;

bool project_pixel(const SceneDef& def, double px, double py, double rot,
                   double* u, double* v) {
  const double x = px - def.cx;
  const double y = py - def.cy;
  if (def.surface == SurfaceKind::kCylinder) {
    if (std::fabs(y) > def.extent_y) return false;
    const double s = x / def.radius_x;
    if (std::fabs(s) > kRimLimit) return false;
    const double theta_world = std::asin(s) - rot;
    *u = wrap01((theta_world + kPi) / (2.0 * kPi));
    *v = (y + def.extent_y) / (2.0 * def.extent_y);
    return true;
  }
  const double sy = y / def.extent_y;
  if (std::fabs(sy) > kRimLimit) return false;
  const double phi = std::asin(sy);
  const double ring = std::cos(phi) * def.radius_x;
  const double sx = x / ring;
  if (std::fabs(sx) > kRimLimit) return false;
  const double theta_world = std::asin(sx) - rot;
  *u = wrap01((theta_world + kPi) / (2.0 * kPi));
  *v = (phi + kPi / 2.0) / kPi;
  return true;
}

// Analytic inverse of the projection, visibility ignored.
void unproject_texel(const SceneDef& def, double u, double v, double rot,
                     double* px, double* py) {
  const double theta_cam = (2.0 * kPi * u - kPi) + rot;
  if (def.surface == SurfaceKind::kCylinder) {
    *px = def.cx + def.radius_x * std::sin(theta_cam);
    *py = def.cy + (2.0 * v - 1.0) * def.extent_y;
    return;
  }
  const double phi = kPi * v - kPi / 2.0;
  *px = def.cx + def.radius_x * std::cos(phi) * std::sin(theta_cam);
  *py = def.cy + def.extent_y * std::sin(phi);
}

ColorTexture make_gt_texture(const SceneDef& def, int tex_size) {
  ColorTexture tex(tex_size, tex_size);
  const size_t plane = size_t(tex_size) * tex_size;
  for (int j = 0; j < tex_size; ++j) {
    for (int i = 0; i < tex_size; ++i) {
      const double u = double(i) / (tex_size - 1);
      const double v = double(j) / (tex_size - 1);
      const Color c = texel_color(def, u, v);
      for (int k = 0; k < 3; ++k) {
        tex.rgb[k * plane + size_t(j) * tex_size + i] = float(c[k]);
      }
    }
  }
  tex.clamp01();
  return tex;
}

std::array<float, 3> sample_texture_uv(const ColorTexture& tex, double u,
                                       double v) {
  const double tx = std::clamp(u, 0.0, 1.0) * (tex.width - 1);
  const double ty = std::clamp(v, 0.0, 1.0) * (tex.height - 1);
  const int x0 = int(std::floor(tx));
  const int y0 = int(std::floor(ty));
  const int x1 = std::min(x0 + 1, tex.width - 1);
  const int y1 = std::min(y0 + 1, tex.height - 1);
  const double fx = tx - x0, fy = ty - y0;
  const size_t plane = size_t(tex.width) * tex.height;
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const float* p = tex.rgb.data() + c * plane;
    out[c] = float((1.0 - fx) * (1.0 - fy) * p[y0 * tex.width + x0] +
                   fx * (1.0 - fy) * p[y0 * tex.width + x1] +
                   (1.0 - fx) * fy * p[y1 * tex.width + x0] +
                   fx * fy * p[y1 * tex.width + x1]);
  }
  return out;
}

void render_view(const SceneDef& def, const ColorTexture& gt, double rot,
                 int image_size, double band_v, Tensor<float>* image,
                 UvMap* map, std::vector<float>* identity_mask) {
  const int64_t plane = int64_t(image_size) * image_size;
  std::vector<float> data(3 * plane, 1.0f);  // white background
  *map = UvMap(image_size, image_size);
  identity_mask->assign(plane, 0.f);
  for (int py = 0; py < image_size; ++py) {
    for (int px = 0; px < image_size; ++px) {
      double u, v;
      if (!project_pixel(def, px, py, rot, &u, &v)) continue;
      const size_t i = map->at(px, py);
      map->u[i] = float(u);
      map->v[i] = float(v);
      map->valid[i] = 1.f;
      const std::array<float, 3> c = sample_texture_uv(gt, u, v);
      for (int k = 0; k < 3; ++k) data[k * plane + i] = c[k];
      if (v >= band_v) (*identity_mask)[i] = 1.f;
    }
  }
  *image = Tensor<float>::from_data({1, 3, image_size, image_size},
                                    std::move(data));
}

}  // namespace

SceneSample generate_pair(uint64_t seed, const SceneConfig& config) {
  if (config.image_size <= 0 || config.texture_size <= 0) {
    throw std::invalid_argument("generate_pair: degenerate config");
  }
  const SceneDef def = make_scene(seed, config);
  SceneSample sample;
  sample.rot_source = def.rot_source;
  sample.rot_target = def.rot_target;
  sample.gt_texture = make_gt_texture(def, config.texture_size);
  render_view(def, sample.gt_texture, def.rot_source, config.image_size,
              def.identity_band_v, &sample.source_image, &sample.source_map,
              &sample.identity_mask_source);
  render_view(def, sample.gt_texture, def.rot_target, config.image_size,
              def.identity_band_v, &sample.target_image, &sample.target_map,
              &sample.identity_mask_target);
  return sample;
}

SceneView render_pose(uint64_t seed, const SceneConfig& config,
                      double extra_rotation_deg) {
  const SceneDef def = make_scene(seed, config);
  const ColorTexture gt = make_gt_texture(def, config.texture_size);
  SceneView view;
  view.rot = def.rot_source + extra_rotation_deg * kPi / 180.0;
  render_view(def, gt, view.rot, config.image_size, def.identity_band_v,
              &view.image, &view.map, &view.identity_mask);
  return view;
}

ColorTexture scene_texture(uint64_t seed, const SceneConfig& config) {
  return make_gt_texture(make_scene(seed, config), config.texture_size);
}

CoordTexture full_coord_map(uint64_t seed, const SceneConfig& config) {
  const SceneDef def = make_scene(seed, config);
  CoordTexture out(config.texture_size, config.texture_size);
  for (int j = 0; j < config.texture_size; ++j) {
    for (int i = 0; i < config.texture_size; ++i) {
      const double u = double(i) / (config.texture_size - 1);
      const double v = double(j) / (config.texture_size - 1);
      double px, py;
      unproject_texel(def, u, v, def.rot_source, &px, &py);
      const size_t idx = out.at(i, j);
      out.x[idx] = float(px);
      out.y[idx] = float(py);
      out.known[idx] = 1.f;
    }
  }
  return out;
}

std::vector<float> identity_mask_from_map(const UvMap& map, double band_v) {
  std::vector<float> mask(size_t(map.width) * map.height, 0.f);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (map.valid[i] != 0.f && map.v[i] >= band_v) mask[i] = 1.f;
  }
  return mask;
}

}  // namespace retex
