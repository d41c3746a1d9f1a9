#pragma once

#include <string>
#include <utility>
#include <vector>

#include "retex/networks.hpp"
#include "retex/tensor.hpp"
#include "retex/warp.hpp"

namespace retex {

// Named scalar terms plus the weighted total kept on the graph.
template <typename S>
struct LossReport {
  std::vector<std::pair<std::string, double>> terms;
  Tensor<S> total;

  double term(const std::string& name) const;
  void add_term(const std::string& name, double value) {
    terms.emplace_back(name, value);
  }
};

// Σ mask·|a−b| / max(Σ mask, 1); mask is constant w.r.t. gradients.
template <typename S>
Tensor<S> masked_l1(const Tensor<S>& a, const Tensor<S>& b,
                    const Tensor<S>& mask);

struct Stage1Weights {
  double coord = 1.0;
  double color = 1.0;
};

// Stage-1 objective: (1) coordinate consistency between D and C over texels
// observed in C, in image-size-normalized units; (2) color consistency
// between T (sampled from the source via D) and the texture splatted from
// the target view, over texels observed there. Gradients reach the
// inpainter through both terms, term 2 via the differentiable sampler.
template <typename S>
LossReport<S> stage1_loss(const CoordTexture& c, const Tensor<S>& d,
                          const Tensor<S>& t_from_d,
                          const ColorTexture& target_tex,
                          const std::vector<float>& target_known, int image_w,
                          int image_h, const Stage1Weights& weights = {});

// Color-inpainting counterpart: both terms are color L1s.
template <typename S>
LossReport<S> stage1_rgb_loss(const ColorSplat& c, const Tensor<S>& t_pred,
                              const ColorTexture& target_tex,
                              const std::vector<float>& target_known,
                              const Stage1Weights& weights = {});

// Per-pixel minimum over a window neighborhood of the target of the mean
// per-channel L1 distance, averaged over pixels; the gradient flows to
// pred through the selected minimum. window must be odd; window 1 is the
// plain mean L1.
template <typename S>
Tensor<S> nn_loss(const Tensor<S>& pred, const Tensor<S>& target,
                  int window = 5);

template <typename S>
struct GanLossResult {
  Tensor<S> g_term;
  Tensor<S> d_term;
};

// Non-saturating logistic losses over patch logits. The generator term
// keeps the graph into fake_stack; the discriminator term sees the fake
// detached, so the two returned graphs are independent.
template <typename S>
GanLossResult<S> gan_losses(const Discriminator<S>& disc,
                            const Tensor<S>& real_stack,
                            const Tensor<S>& fake_stack);

// Fixed (never trained) conv stack with seed-determined weights, tapped at
// three depths. Stands in for an external pretrained feature network; any
// extractor with the same tap interface can be substituted.
template <typename S>
class FeatureExtractor {
 public:
  explicit FeatureExtractor(uint64_t seed, int in_channels = 3,
                            std::vector<int> widths = {8, 16, 32});
  std::vector<Tensor<S>> taps(const Tensor<S>& x) const;
  int num_taps() const { return static_cast<int>(convs_.size()); }

 private:
  ParamTable<S> params_;
  std::vector<ConvLayer<S>> convs_;
};

// Mean L1 over tapped feature maps.
template <typename S>
Tensor<S> feature_loss(const Tensor<S>& pred, const Tensor<S>& target,
                       const FeatureExtractor<S>& extractor);

// Mean L1 over Gram matrices of tapped feature maps.
template <typename S>
Tensor<S> style_loss(const Tensor<S>& pred, const Tensor<S>& target,
                     const FeatureExtractor<S>& extractor);

}  // namespace retex
