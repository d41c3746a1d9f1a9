#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retex/rng.hpp"
#include "retex/tensor.hpp"
#include "retex/warp.hpp"

namespace retex {

enum class Activation { kNone, kLeakyRelu, kElu, kTanh, kSigmoid };

template <typename S>
Tensor<S> apply_activation(const Tensor<S>& x, Activation act,
                           double alpha = 0.2);

// Ordered named-parameter table; names are unique and the order is the
// creation order, which fixes checkpoint layout and optimizer iteration.
template <typename S>
class ParamTable {
 public:
  // He fan-in init for weights (fan_in = elements per output unit), zeros
  // for anything registered with init_zero.
  Tensor<S>& add_conv_weight(const std::string& name, int out_ch, int in_ch,
                             int kernel, Rng& rng);
  Tensor<S>& add_zeros(const std::string& name, const Shape& shape);

  Tensor<S>& at(const std::string& name);
  const Tensor<S>& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor<S>>>& entries() const {
    return entries_;
  }
  std::vector<Tensor<S>> tensors() const;
  void zero_grads();
  // Drops requires_grad on every entry (frozen networks).
  void freeze();
  // Writes values in place so layer handles stay aliased.
  void load_values(const std::vector<std::pair<std::string, std::vector<S>>>&
                       named_values);

 private:
  std::vector<std::pair<std::string, Tensor<S>>> entries_;
};

template <typename S>
int64_t count_params(const ParamTable<S>& params);

// Convolution whose output is modulated per element by a sigmoid gate from
// a parallel convolution sharing the spatial configuration:
// out = act(conv_f(x)) ⊙ σ(conv_g(x)).
struct GatedConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  Activation activation = Activation::kLeakyRelu;
  double alpha = 0.2;
};

template <typename S>
class GatedConv {
 public:
  GatedConv() = default;
  GatedConv(const GatedConvSpec& spec, const std::string& name,
            ParamTable<S>& params, Rng& rng);
  Tensor<S> forward(const Tensor<S>& x) const;
  const GatedConvSpec& spec() const { return spec_; }

 private:
  GatedConvSpec spec_;
  Tensor<S> wf_, bf_, wg_, bg_;
};

// Plain convolution + activation (discriminator, output heads).
template <typename S>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(int in_ch, int out_ch, int kernel, int stride, int padding,
            Activation act, const std::string& name, ParamTable<S>& params,
            Rng& rng);
  Tensor<S> forward(const Tensor<S>& x) const;

 private:
  int stride_ = 1, padding_ = 0;
  Activation act_ = Activation::kNone;
  Tensor<S> w_, b_;
};

// ---------------------------------------------------------------------------
// Inpainter f: gated-conv hourglass without skip connections. Completes a
// coordinate (or color) texture carrying the −10 sentinel at unknowns.

enum class InpainterHead { kCoords, kColors };

struct InpainterConfig {
  int in_channels = 3;   // x, y, known-mask (colors mode: r, g, b, mask)
  int out_channels = 2;
  std::vector<int> widths = {32, 64, 128};  // full, /2, /4; bottleneck at /8
  int convs_per_level = 1;
  int bottleneck_convs = 2;
  Activation activation = Activation::kLeakyRelu;
  InpainterHead head = InpainterHead::kCoords;

  int levels() const { return static_cast<int>(widths.size()); }
  // 14 gated convolution layers plus the projection head.
  static InpainterConfig paper_faithful(int in_ch = 3, int out_ch = 2);
  static InpainterConfig rgb(const InpainterConfig& base);
};

template <typename S>
class Inpainter {
 public:
  Inpainter(const InpainterConfig& config, uint64_t seed);

  // x: 1×in_channels×texH×texW. For the coords head, image_w/image_h set
  // the output range: tanh scaled to [−0.1·W, 1.1·W] × [−0.1·H, 1.1·H] so
  // slightly out-of-frame coordinates stay representable but bounded.
  Tensor<S> forward(const Tensor<S>& x, int image_w = 0,
                    int image_h = 0) const;

  ParamTable<S>& params() { return params_; }
  const ParamTable<S>& params() const { return params_; }
  const InpainterConfig& config() const { return config_; }

 private:
  InpainterConfig config_;
  ParamTable<S> params_;
  std::vector<GatedConv<S>> encoder_;     // per level, convs_per_level each
  std::vector<GatedConv<S>> bottleneck_;
  std::vector<GatedConv<S>> decoder_;
  ConvLayer<S> head_;
};

// ---------------------------------------------------------------------------
// Refiner g: U-Net with two encoders (target-aligned and source-aligned),
// residual bottleneck, and skips at three resolutions. In deformable mode
// the source-encoder skips are resampled by the warp field E before
// entering the decoder.

enum class RefinerArch { kDualDeformable, kSingle };

struct RefinerConfig {
  RefinerArch arch = RefinerArch::kDualDeformable;
  int target_channels = 11;
  int source_channels = 8;  // ignored for kSingle
  std::vector<int> widths = {16, 32, 64};
  int res_blocks = 4;
  Activation activation = Activation::kLeakyRelu;
  int levels() const { return static_cast<int>(widths.size()); }
};

// Warp field guiding one deformable skip: pixel coordinates on the level's
// source grid plus a validity mask (entries without data contribute zeros).
template <typename S>
struct DeformField {
  Tensor<S> coords;  // 1×2×h×w
  Tensor<S> mask;    // 1×1×h×w
};

template <typename S>
class Refiner {
 public:
  Refiner(const RefinerConfig& config, uint64_t seed);

  // Deformable arch: target_stack 1×Ct×H×W, source_stack 1×Cs×H×W, fields
  // at the encoder's skip resolutions (full, /2, /4). Single arch: a single
  // stack, source_stack/fields must be empty.
  Tensor<S> forward(const Tensor<S>& target_stack,
                    const std::optional<Tensor<S>>& source_stack,
                    const std::vector<DeformField<S>>& fields) const;

  // Bilinear feature resampling used by the deformable skips; identity
  // fields make it a pass-through of the plain skip.
  static Tensor<S> deform_resample(const Tensor<S>& features,
                                   const DeformField<S>& field);

  ParamTable<S>& params() { return params_; }
  const ParamTable<S>& params() const { return params_; }
  const RefinerConfig& config() const { return config_; }

 private:
  struct Encoder {
    std::vector<GatedConv<S>> levels;  // one per resolution
    GatedConv<S> to_bottleneck;
  };
  Tensor<S> run_encoder(const Encoder& enc, const Tensor<S>& x,
                        std::vector<Tensor<S>>* skips) const;

  RefinerConfig config_;
  ParamTable<S> params_;
  Encoder target_enc_;
  Encoder source_enc_;                    // dual arch only
  GatedConv<S> fuse_;
  std::vector<GatedConv<S>> res_convs_;   // 2 per residual block
  std::vector<GatedConv<S>> decoder_;
  ConvLayer<S> head_;
};

// ---------------------------------------------------------------------------
// Patch discriminator: three stride-2 convolutions then a logit map at /8
// resolution, one logit per receptive-field patch.

struct DiscriminatorConfig {
  int in_channels = 8;  // image + conditioning pose stack
  std::vector<int> widths = {32, 64, 128};
};

template <typename S>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, uint64_t seed);
  Tensor<S> forward(const Tensor<S>& x) const;
  ParamTable<S>& params() { return params_; }
  const ParamTable<S>& params() const { return params_; }

 private:
  DiscriminatorConfig config_;
  ParamTable<S> params_;
  std::vector<ConvLayer<S>> layers_;
};

}  // namespace retex
