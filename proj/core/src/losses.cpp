#include "retex/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "retex/conv.hpp"
#include "retex/ops.hpp"

namespace retex {

template <typename S>
double LossReport<S>::term(const std::string& name) const {
  for (const auto& [n, v] : terms) {
    if (n == name) return v;
  }
  throw std::out_of_range("loss report: no term named " + name);
}

template <typename S>
Tensor<S> masked_l1(const Tensor<S>& a, const Tensor<S>& b,
                    const Tensor<S>& mask) {
  if (a.shape() != b.shape() || a.shape() != mask.shape()) {
    throw std::invalid_argument("masked_l1: shapes must match");
  }
  double mask_sum = 0.0;
  for (S m : mask.value()) mask_sum += double(m);
  Tensor<S> num = sum(mul(mask.detach(), abs(sub(a, b))));
  return scale(num, 1.0 / std::max(mask_sum, 1.0));
}

namespace {

template <typename S>
Tensor<S> tile_mask(const std::vector<float>& mask, int h, int w, int c) {
  std::vector<S> one(mask.size());
  std::copy(mask.begin(), mask.end(), one.begin());
  Tensor<S> m = Tensor<S>::from_data({1, 1, h, w}, std::move(one));
  Tensor<S> out = m;
  for (int i = 1; i < c; ++i) out = concat_channels(out, m);
  return out;
}

}  // namespace

template <typename S>
LossReport<S> stage1_loss(const CoordTexture& c, const Tensor<S>& d,
                          const Tensor<S>& t_from_d,
                          const ColorTexture& target_tex,
                          const std::vector<float>& target_known, int image_w,
                          int image_h, const Stage1Weights& weights) {
  if (d.shape().size() != 4 || d.extent(1) != 2 || d.extent(2) != c.height ||
      d.extent(3) != c.width) {
    throw std::invalid_argument("stage1_loss: D must be 1×2×texH×texW");
  }
  if (t_from_d.extent(2) != target_tex.height ||
      t_from_d.extent(3) != target_tex.width ||
      target_known.size() != size_t(target_tex.width) * target_tex.height) {
    throw std::invalid_argument("stage1_loss: texture extents mismatch");
  }
  // Term 1: per-texel |Δx|/W + |Δy|/H averaged over C-observed texels.
  auto [c_coords, c_mask] = coord_texture_to_tensors<S>(c);
  const std::vector<double> norm = {1.0 / image_w, 1.0 / image_h};
  Tensor<S> diff = abs(sub(affine_channels(d, norm, {0.0, 0.0}),
                           affine_channels(c_coords, norm, {0.0, 0.0})));
  double known_count = 0.0;
  for (float k : c.known) known_count += k;
  Tensor<S> term1 = scale(sum(mul_mask(diff, c_mask)),
                          1.0 / std::max(known_count, 1.0));

  // Term 2: masked color L1 against the texture splatted from the target.
  Tensor<S> mask3 =
      tile_mask<S>(target_known, target_tex.height, target_tex.width, 3);
  Tensor<S> term2 =
      masked_l1(t_from_d, color_texture_to_tensor<S>(target_tex), mask3);

  LossReport<S> report;
  report.add_term("stage1_coord_l1", double(term1.item()));
  report.add_term("stage1_color_l1", double(term2.item()));
  report.total =
      add(scale(term1, weights.coord), scale(term2, weights.color));
  return report;
}

template <typename S>
LossReport<S> stage1_rgb_loss(const ColorSplat& c, const Tensor<S>& t_pred,
                              const ColorTexture& target_tex,
                              const std::vector<float>& target_known,
                              const Stage1Weights& weights) {
  const int h = c.texture.height, w = c.texture.width;
  if (t_pred.extent(1) != 3 || t_pred.extent(2) != h || t_pred.extent(3) != w) {
    throw std::invalid_argument("stage1_rgb_loss: prediction must be 1×3×texH×texW");
  }
  Tensor<S> in_mask = tile_mask<S>(c.known, h, w, 3);
  Tensor<S> term1 =
      masked_l1(t_pred, color_texture_to_tensor<S>(c.texture), in_mask);
  Tensor<S> out_mask = tile_mask<S>(target_known, h, w, 3);
  Tensor<S> term2 =
      masked_l1(t_pred, color_texture_to_tensor<S>(target_tex), out_mask);
  LossReport<S> report;
  report.add_term("stage1_rgb_in_l1", double(term1.item()));
  report.add_term("stage1_rgb_out_l1", double(term2.item()));
  report.total = add(scale(term1, weights.coord), scale(term2, weights.color));
  return report;
}

template <typename S>
Tensor<S> nn_loss(const Tensor<S>& pred, const Tensor<S>& target, int window) {
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("nn_loss: window must be odd and positive");
  }
  if (pred.shape() != target.shape() || pred.shape().size() != 4) {
    throw std::invalid_argument("nn_loss: shapes must match, NCHW");
  }
  if (target.requires_grad()) {
    throw std::invalid_argument("nn_loss: target must not require gradients");
  }
  const int n = pred.extent(0), c = pred.extent(1);
  const int h = pred.extent(2), w = pred.extent(3);
  const int64_t plane = int64_t(h) * w;
  const int r = window / 2;
  const auto& pv = pred.value();
  const auto& tv = target.value();
  // Chosen offset per pixel, needed by the backward rule.
  auto arg = std::make_shared<std::vector<int16_t>>(size_t(n) * plane * 2);
  double acc = 0.0;
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double best = -1.0;
        int best_dy = 0, best_dx = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int ty = y + dy;
          if (ty < 0 || ty >= h) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int tx = x + dx;
            if (tx < 0 || tx >= w) continue;
            double dist = 0.0;
            for (int ci = 0; ci < c; ++ci) {
              const int64_t base = (int64_t(b) * c + ci) * plane;
              dist += std::fabs(double(pv[base + y * w + x]) -
                                double(tv[base + ty * w + tx]));
            }
            if (best < 0.0 || dist < best) {
              best = dist;
              best_dy = dy;
              best_dx = dx;
            }
          }
        }
        acc += best / c;
        const size_t ai = (size_t(b) * plane + size_t(y) * w + x) * 2;
        (*arg)[ai] = int16_t(best_dx);
        (*arg)[ai + 1] = int16_t(best_dy);
      }
    }
  }
  acc /= double(n) * plane;
  auto pred_impl = pred.impl_ptr();
  auto target_impl = target.impl_ptr();
  return Tensor<S>::make_op(
      {1}, {S(acc)}, {pred, target},
      [pred_impl, target_impl, arg, n, c, h, w,
       plane](detail::TensorImpl<S>& self) {
        pred_impl->ensure_grad();
        const S g = self.grad[0];
        const S unit = g / S(double(n) * plane * c);
        for (int b = 0; b < n; ++b) {
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              const size_t ai = (size_t(b) * plane + size_t(y) * w + x) * 2;
              const int tx = x + (*arg)[ai];
              const int ty = y + (*arg)[ai + 1];
              for (int ci = 0; ci < c; ++ci) {
                const int64_t base = (int64_t(b) * c + ci) * plane;
                const S diff = pred_impl->value[base + y * w + x] -
                               target_impl->value[base + ty * w + tx];
                if (diff > S(0)) {
                  pred_impl->grad[base + y * w + x] += unit;
                } else if (diff < S(0)) {
                  pred_impl->grad[base + y * w + x] -= unit;
                }
              }
            }
          }
        }
      },
      "nn_loss");
}

template <typename S>
GanLossResult<S> gan_losses(const Discriminator<S>& disc,
                            const Tensor<S>& real_stack,
                            const Tensor<S>& fake_stack) {
  if (real_stack.shape() != fake_stack.shape()) {
    throw std::invalid_argument("gan_losses: stack shapes must match");
  }
  GanLossResult<S> out;
  // Generator: −log σ(D(fake)) = softplus(−D(fake)), graph kept into fake.
  out.g_term = mean(softplus(scale(disc.forward(fake_stack), -1.0)));
  // Discriminator: real and detached-fake halves.
  Tensor<S> d_real = mean(softplus(scale(disc.forward(real_stack), -1.0)));
  Tensor<S> d_fake = mean(softplus(disc.forward(fake_stack.detach())));
  out.d_term = add(d_real, d_fake);
  return out;
}

template <typename S>
FeatureExtractor<S>::FeatureExtractor(uint64_t seed, int in_channels,
                                      std::vector<int> widths) {
  Rng rng(seed);
  int in_ch = in_channels;
  for (size_t i = 0; i < widths.size(); ++i) {
    convs_.emplace_back(in_ch, widths[i], 3, 1, 1, Activation::kLeakyRelu,
                        "tap" + std::to_string(i), params_, rng);
    in_ch = widths[i];
  }
  // Frozen: features are a fixed measurement, never trained.
  params_.freeze();
}

template <typename S>
std::vector<Tensor<S>> FeatureExtractor<S>::taps(const Tensor<S>& x) const {
  std::vector<Tensor<S>> out;
  Tensor<S> h = x;
  for (size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i].forward(h);
    out.push_back(h);
    if (i + 1 < convs_.size()) h = resample2x(h, ResampleDir::kDown);
  }
  return out;
}

template <typename S>
Tensor<S> feature_loss(const Tensor<S>& pred, const Tensor<S>& target,
                       const FeatureExtractor<S>& extractor) {
  std::vector<Tensor<S>> fp = extractor.taps(pred);
  std::vector<Tensor<S>> ft = extractor.taps(target);
  Tensor<S> total;
  for (size_t i = 0; i < fp.size(); ++i) {
    Tensor<S> term = mean(abs(sub(fp[i], ft[i])));
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, 1.0 / double(fp.size()));
}

template <typename S>
Tensor<S> style_loss(const Tensor<S>& pred, const Tensor<S>& target,
                     const FeatureExtractor<S>& extractor) {
  std::vector<Tensor<S>> fp = extractor.taps(pred);
  std::vector<Tensor<S>> ft = extractor.taps(target);
  Tensor<S> total;
  for (size_t i = 0; i < fp.size(); ++i) {
    Tensor<S> term = mean(abs(sub(gram(fp[i]), gram(ft[i]))));
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, 1.0 / double(fp.size()));
}

#define RETEX_INSTANTIATE_LOSSES(S)                                          \
  template struct LossReport<S>;                                             \
  template Tensor<S> masked_l1(const Tensor<S>&, const Tensor<S>&,           \
                               const Tensor<S>&);                            \
  template LossReport<S> stage1_loss(const CoordTexture&, const Tensor<S>&,  \
                                     const Tensor<S>&, const ColorTexture&,  \
                                     const std::vector<float>&, int, int,    \
                                     const Stage1Weights&);                  \
  template LossReport<S> stage1_rgb_loss(const ColorSplat&, const Tensor<S>&, \
                                         const ColorTexture&,                \
                                         const std::vector<float>&,          \
                                         const Stage1Weights&);              \
  template Tensor<S> nn_loss(const Tensor<S>&, const Tensor<S>&, int);       \
  template GanLossResult<S> gan_losses(const Discriminator<S>&,              \
                                       const Tensor<S>&, const Tensor<S>&);  \
  template class FeatureExtractor<S>;                                        \
  template Tensor<S> feature_loss(const Tensor<S>&, const Tensor<S>&,        \
                                  const FeatureExtractor<S>&);               \
  template Tensor<S> style_loss(const Tensor<S>&, const Tensor<S>&,          \
                                const FeatureExtractor<S>&);

RETEX_INSTANTIATE_LOSSES(float)
RETEX_INSTANTIATE_LOSSES(double)
#undef RETEX_INSTANTIATE_LOSSES

}  // namespace retex
