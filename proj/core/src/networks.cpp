#include "retex/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "retex/conv.hpp"
#include "retex/ops.hpp"

namespace retex {

template <typename S>
Tensor<S> apply_activation(const Tensor<S>& x, Activation act, double alpha) {
  switch (act) {
    case Activation::kNone:
      return x;
    case Activation::kLeakyRelu:
      return leaky_relu(x, alpha);
    case Activation::kElu:
      return elu(x, 1.0);
    case Activation::kTanh:
      return tanh(x);
    case Activation::kSigmoid:
      return sigmoid(x);
  }
  throw std::logic_error("apply_activation: unknown activation");
}

template <typename S>
Tensor<S>& ParamTable<S>::add_conv_weight(const std::string& name, int out_ch,
                                          int in_ch, int kernel, Rng& rng) {
  if (contains(name)) {
    throw std::invalid_argument("params: duplicate name " + name);
  }
  const int64_t fan_in = int64_t(in_ch) * kernel * kernel;
  const double stddev = std::sqrt(2.0 / double(fan_in));
  Shape shape = {out_ch, in_ch, kernel, kernel};
  std::vector<S> data(shape_numel(shape));
  for (auto& v : data) v = S(rng.normal(0.0, stddev));
  entries_.emplace_back(name,
                        Tensor<S>::from_data(shape, std::move(data), true));
  return entries_.back().second;
}

template <typename S>
Tensor<S>& ParamTable<S>::add_zeros(const std::string& name,
                                    const Shape& shape) {
  if (contains(name)) {
    throw std::invalid_argument("params: duplicate name " + name);
  }
  entries_.emplace_back(name, Tensor<S>::zeros(shape, true));
  return entries_.back().second;
}

template <typename S>
Tensor<S>& ParamTable<S>::at(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("params: no entry named " + name);
}

template <typename S>
const Tensor<S>& ParamTable<S>::at(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("params: no entry named " + name);
}

template <typename S>
bool ParamTable<S>::contains(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

template <typename S>
std::vector<Tensor<S>> ParamTable<S>::tensors() const {
  std::vector<Tensor<S>> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

template <typename S>
void ParamTable<S>::zero_grads() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

template <typename S>
void ParamTable<S>::freeze() {
  for (auto& [n, t] : entries_) t.set_requires_grad(false);
}

template <typename S>
void ParamTable<S>::load_values(
    const std::vector<std::pair<std::string, std::vector<S>>>& named_values) {
  for (const auto& [name, values] : named_values) {
    Tensor<S>& t = at(name);
    if (t.numel() != static_cast<int64_t>(values.size())) {
      throw std::invalid_argument("params: size mismatch loading " + name);
    }
    t.raw_value() = values;
  }
}

template <typename S>
int64_t count_params(const ParamTable<S>& params) {
  int64_t total = 0;
  for (const auto& [n, t] : params.entries()) total += t.numel();
  return total;
}

template <typename S>
GatedConv<S>::GatedConv(const GatedConvSpec& spec, const std::string& name,
                        ParamTable<S>& params, Rng& rng)
    : spec_(spec) {
  wf_ = params.add_conv_weight(name + ".feat.w", spec.out_channels,
                               spec.in_channels, spec.kernel, rng);
  bf_ = params.add_zeros(name + ".feat.b", {spec.out_channels});
  wg_ = params.add_conv_weight(name + ".gate.w", spec.out_channels,
                               spec.in_channels, spec.kernel, rng);
  bg_ = params.add_zeros(name + ".gate.b", {spec.out_channels});
}

template <typename S>
Tensor<S> GatedConv<S>::forward(const Tensor<S>& x) const {
  Tensor<S> feat = conv2d(x, wf_, bf_, spec_.stride, spec_.padding);
  Tensor<S> gate = conv2d(x, wg_, bg_, spec_.stride, spec_.padding);
  return mul(apply_activation(feat, spec_.activation, spec_.alpha),
             sigmoid(gate));
}

template <typename S>
ConvLayer<S>::ConvLayer(int in_ch, int out_ch, int kernel, int stride,
                        int padding, Activation act, const std::string& name,
                        ParamTable<S>& params, Rng& rng)
    : stride_(stride), padding_(padding), act_(act) {
  w_ = params.add_conv_weight(name + ".w", out_ch, in_ch, kernel, rng);
  b_ = params.add_zeros(name + ".b", {out_ch});
}

template <typename S>
Tensor<S> ConvLayer<S>::forward(const Tensor<S>& x) const {
  return apply_activation(conv2d(x, w_, b_, stride_, padding_), act_);
}

// ---------------------------------------------------------------------------

InpainterConfig InpainterConfig::paper_faithful(int in_ch, int out_ch) {
  // 14 gated conv layers at ~2.8M parameters.
  InpainterConfig c;
  c.in_channels = in_ch;
  c.out_channels = out_ch;
  c.widths = {44, 88, 176};
  c.convs_per_level = 2;
  c.bottleneck_convs = 2;
  return c;
}

InpainterConfig InpainterConfig::rgb(const InpainterConfig& base) {
  InpainterConfig c = base;
  c.in_channels = 4;
  c.out_channels = 3;
  c.head = InpainterHead::kColors;
  return c;
}

template <typename S>
Inpainter<S>::Inpainter(const InpainterConfig& config, uint64_t seed)
    : config_(config) {
  Rng rng(seed);
  const auto& w = config.widths;
  const int levels = config.levels();
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < config.convs_per_level; ++j) {
      GatedConvSpec spec;
      spec.in_channels = (j == 0) ? (i == 0 ? config.in_channels : w[i - 1])
                                  : w[i];
      spec.out_channels = w[i];
      spec.activation = config.activation;
      encoder_.emplace_back(spec,
                            "enc" + std::to_string(i) + "_" + std::to_string(j),
                            params_, rng);
    }
  }
  for (int j = 0; j < config.bottleneck_convs; ++j) {
    GatedConvSpec spec;
    spec.in_channels = w.back();
    spec.out_channels = w.back();
    spec.activation = config.activation;
    bottleneck_.emplace_back(spec, "bott" + std::to_string(j), params_, rng);
  }
  for (int i = levels - 1; i >= 0; --i) {
    const int in_w = (i == levels - 1) ? w.back() : w[i];
    const int out_w = (i == 0) ? w[0] : w[i - 1];
    for (int j = 0; j < config.convs_per_level; ++j) {
      GatedConvSpec spec;
      spec.in_channels = (j == 0) ? in_w : out_w;
      spec.out_channels = out_w;
      spec.activation = config.activation;
      decoder_.emplace_back(spec,
                            "dec" + std::to_string(i) + "_" + std::to_string(j),
                            params_, rng);
    }
  }
  head_ = ConvLayer<S>(w[0], config.out_channels, 3, 1, 1, Activation::kNone,
                       "head", params_, rng);
}

template <typename S>
Tensor<S> Inpainter<S>::forward(const Tensor<S>& x, int image_w,
                                int image_h) const {
  if (x.shape().size() != 4 || x.extent(1) != config_.in_channels) {
    throw std::invalid_argument("inpainter: input must be 1×" +
                                std::to_string(config_.in_channels) +
                                "×H×W, got " + shape_str(x.shape()));
  }
  const int levels = config_.levels();
  const int div = 1 << levels;
  if (x.extent(2) % div != 0 || x.extent(3) % div != 0) {
    throw std::invalid_argument(
        "inpainter: texture extents " + shape_str(x.shape()) +
        " incompatible with downsampling depth " + std::to_string(levels));
  }
  Tensor<S> h = x;
  size_t e = 0;
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < config_.convs_per_level; ++j) h = encoder_[e++].forward(h);
    h = resample2x(h, ResampleDir::kDown);
  }
  for (const auto& b : bottleneck_) h = b.forward(h);
  size_t d = 0;
  for (int i = levels - 1; i >= 0; --i) {
    h = resample2x(h, ResampleDir::kUp);
    for (int j = 0; j < config_.convs_per_level; ++j) h = decoder_[d++].forward(h);
  }
  h = head_.forward(h);
  if (config_.head == InpainterHead::kColors) {
    return sigmoid(h);
  }
  if (image_w <= 0 || image_h <= 0) {
    throw std::invalid_argument("inpainter: coords head needs image extents");
  }
  // tanh in [−1,1] mapped to [−0.1·W, 1.1·W] (resp. H).
  Tensor<S> t = tanh(h);
  return affine_channels(t, {0.6 * image_w, 0.6 * image_h},
                         {0.5 * image_w, 0.5 * image_h});
}

// ---------------------------------------------------------------------------

template <typename S>
Refiner<S>::Refiner(const RefinerConfig& config, uint64_t seed)
    : config_(config) {
  Rng rng(seed);
  const auto& w = config.widths;
  const int levels = config.levels();
  auto build_encoder = [&](const std::string& prefix, int in_ch) {
    Encoder enc;
    for (int i = 0; i < levels; ++i) {
      GatedConvSpec spec;
      spec.in_channels = i == 0 ? in_ch : w[i - 1];
      spec.out_channels = w[i];
      spec.activation = config.activation;
      enc.levels.emplace_back(spec, prefix + std::to_string(i), params_, rng);
    }
    GatedConvSpec spec;
    spec.in_channels = w.back();
    spec.out_channels = w.back();
    spec.activation = config.activation;
    enc.to_bottleneck = GatedConv<S>(spec, prefix + "bott", params_, rng);
    return enc;
  };
  const bool dual = config.arch == RefinerArch::kDualDeformable;
  target_enc_ = build_encoder("enc_t", config.target_channels);
  if (dual) source_enc_ = build_encoder("enc_s", config.source_channels);

  GatedConvSpec fuse_spec;
  fuse_spec.in_channels = dual ? 2 * w.back() : w.back();
  fuse_spec.out_channels = w.back();
  fuse_spec.activation = config.activation;
  fuse_ = GatedConv<S>(fuse_spec, "fuse", params_, rng);

  for (int r = 0; r < config.res_blocks; ++r) {
    GatedConvSpec s1;
    s1.in_channels = w.back();
    s1.out_channels = w.back();
    s1.activation = config.activation;
    res_convs_.emplace_back(s1, "res" + std::to_string(r) + "_0", params_, rng);
    GatedConvSpec s2 = s1;
    s2.activation = Activation::kNone;
    res_convs_.emplace_back(s2, "res" + std::to_string(r) + "_1", params_, rng);
  }

  const int skip_mult = dual ? 2 : 1;
  for (int i = levels - 1; i >= 0; --i) {
    const int carry = (i == levels - 1) ? w.back() : (i == 0 ? w[0] : w[i]);
    const int in_ch = carry + skip_mult * w[i];
    const int out_w = (i == 0) ? w[0] : w[i - 1];
    GatedConvSpec spec;
    spec.in_channels = in_ch;
    spec.out_channels = out_w;
    spec.activation = config.activation;
    decoder_.emplace_back(spec, "dec" + std::to_string(i), params_, rng);
  }
  head_ = ConvLayer<S>(w[0], 3, 3, 1, 1, Activation::kNone, "head", params_,
                       rng);
}

template <typename S>
Tensor<S> Refiner<S>::run_encoder(const Encoder& enc, const Tensor<S>& x,
                                  std::vector<Tensor<S>>* skips) const {
  Tensor<S> h = x;
  for (const auto& level : enc.levels) {
    h = level.forward(h);
    skips->push_back(h);
    h = resample2x(h, ResampleDir::kDown);
  }
  return enc.to_bottleneck.forward(h);
}

template <typename S>
Tensor<S> Refiner<S>::deform_resample(const Tensor<S>& features,
                                      const DeformField<S>& field) {
  return mul_mask(sample_bilinear(features, field.coords), field.mask);
}

template <typename S>
Tensor<S> Refiner<S>::forward(const Tensor<S>& target_stack,
                              const std::optional<Tensor<S>>& source_stack,
                              const std::vector<DeformField<S>>& fields) const {
  const bool dual = config_.arch == RefinerArch::kDualDeformable;
  const int levels = config_.levels();
  if (dual) {
    if (!source_stack.has_value()) {
      throw std::invalid_argument("refiner: deformable mode needs the source stack");
    }
    if (static_cast<int>(fields.size()) != levels) {
      throw std::invalid_argument(
          "refiner: deformable mode needs a warp field per skip resolution");
    }
  } else if (source_stack.has_value() || !fields.empty()) {
    throw std::invalid_argument(
        "refiner: single-encoder mode takes one stack and no warp fields");
  }
  const int div = 1 << levels;
  if (target_stack.extent(2) % div != 0 || target_stack.extent(3) % div != 0) {
    throw std::invalid_argument("refiner: extents incompatible with depth");
  }

  std::vector<Tensor<S>> skips_t, skips_s;
  Tensor<S> bt = run_encoder(target_enc_, target_stack, &skips_t);
  Tensor<S> h;
  if (dual) {
    Tensor<S> bs = run_encoder(source_enc_, *source_stack, &skips_s);
    h = fuse_.forward(concat_channels(bt, bs));
  } else {
    h = fuse_.forward(bt);
  }
  for (size_t r = 0; r + 1 < res_convs_.size(); r += 2) {
    h = add(h, res_convs_[r + 1].forward(res_convs_[r].forward(h)));
  }
  size_t d = 0;
  for (int i = levels - 1; i >= 0; --i, ++d) {
    h = resample2x(h, ResampleDir::kUp);
    Tensor<S> cat = concat_channels(h, skips_t[i]);
    if (dual) {
      cat = concat_channels(cat, deform_resample(skips_s[i], fields[i]));
    }
    h = decoder_[d].forward(cat);
  }
  return sigmoid(head_.forward(h));
}

// ---------------------------------------------------------------------------

template <typename S>
Discriminator<S>::Discriminator(const DiscriminatorConfig& config,
                                uint64_t seed)
    : config_(config) {
  Rng rng(seed);
  int in_ch = config.in_channels;
  for (size_t i = 0; i < config.widths.size(); ++i) {
    layers_.emplace_back(in_ch, config.widths[i], 4, 2, 1,
                         Activation::kLeakyRelu, "conv" + std::to_string(i),
                         params_, rng);
    in_ch = config.widths[i];
  }
  layers_.emplace_back(in_ch, 1, 3, 1, 1, Activation::kNone, "logits", params_,
                       rng);
}

template <typename S>
Tensor<S> Discriminator<S>::forward(const Tensor<S>& x) const {
  Tensor<S> h = x;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h;
}

#define RETEX_INSTANTIATE_NETWORKS(S)                                      \
  template Tensor<S> apply_activation(const Tensor<S>&, Activation, double); \
  template class ParamTable<S>;                                            \
  template int64_t count_params(const ParamTable<S>&);                     \
  template class GatedConv<S>;                                             \
  template class ConvLayer<S>;                                             \
  template class Inpainter<S>;                                             \
  template class Refiner<S>;                                               \
  template class Discriminator<S>;

RETEX_INSTANTIATE_NETWORKS(float)
RETEX_INSTANTIATE_NETWORKS(double)
#undef RETEX_INSTANTIATE_NETWORKS

}  // namespace retex
