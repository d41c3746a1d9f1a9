#include "retex/gradcheck.hpp"

#include <cmath>

#include "retex/conv.hpp"
#include "retex/losses.hpp"
#include "retex/networks.hpp"
#include "retex/ops.hpp"
#include "retex/rng.hpp"
#include "retex/warp.hpp"

namespace retex {

namespace {

constexpr double kTolElementwise = 1e-6;
constexpr double kTolGeneral = 1e-5;

double rel_err(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-4});
  return std::fabs(a - b) / scale;
}

Tensor<double> random_tensor(Rng& rng, const Shape& shape, double lo = -1.0,
                             double hi = 1.0, bool requires_grad = true) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor<double>::from_data(shape, std::move(data), requires_grad);
}

// Values bounded away from zero, for ops with a kink there.
Tensor<double> random_tensor_off_zero(Rng& rng, const Shape& shape) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) {
    const double mag = rng.uniform(0.2, 1.2);
    v = rng.uniform(0.0, 1.0) < 0.5 ? -mag : mag;
  }
  return Tensor<double>::from_data(shape, std::move(data), true);
}

}  // namespace

GradCheckResult gradcheck(const std::string& name,
                          std::vector<Tensor<double>> inputs,
                          const std::function<Tensor<double>()>& forward,
                          double tolerance, uint64_t seed, double step) {
  GradCheckResult result;
  result.name = name;
  result.tolerance = tolerance;

  Tensor<double> out = forward();
  Rng rng(mix_seed(seed, 0x9a0c));
  std::vector<double> projection(out.numel());
  for (auto& p : projection) {
    p = rng.uniform(0.5, 1.5) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
  }
  auto project = [&projection](const Tensor<double>& t) {
    double acc = 0.0;
    const auto& v = t.value();
    for (size_t i = 0; i < v.size(); ++i) acc += projection[i] * v[i];
    return acc;
  };

  // One analytic pass; shared leaves may carry grads from earlier checks.
  for (auto& in : inputs) in.zero_grad();
  Tensor<double> loss = sum(
      mul(out, Tensor<double>::from_data(out.shape(), projection)));
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& in : inputs) {
    analytic.push_back(in.has_grad() ? in.grad()
                                     : std::vector<double>(in.numel(), 0.0));
  }

  // Numeric probes re-run the forward on perturbed leaves; no graphs needed.
  NoGradGuard no_grad;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto& value = inputs[i].raw_value();
    for (size_t j = 0; j < value.size(); ++j) {
      const double original = value[j];
      const double h = step * std::max(1.0, std::fabs(original));
      value[j] = original + h;
      const double up = project(forward());
      value[j] = original - h;
      const double down = project(forward());
      value[j] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double err = rel_err(analytic[i][j], numeric);
      result.max_rel_err = std::max(result.max_rel_err, err);
      ++result.checks;
    }
  }
  result.pass = result.max_rel_err <= tolerance;
  return result;
}

namespace {

void check_conv(std::vector<GradCheckResult>& out, Rng& rng, ConvAlgo algo,
                const char* name) {
  const struct {
    int n, ci, h, w, co, k, stride, padding;
  } cases[] = {
      {1, 1, 5, 5, 1, 3, 1, 1}, {2, 3, 6, 5, 4, 3, 1, 1},
      {1, 2, 7, 7, 3, 3, 2, 1}, {1, 4, 4, 4, 2, 1, 1, 0},
      {2, 2, 8, 6, 2, 3, 2, 0}, {1, 3, 5, 6, 2, 5, 1, 2},
  };
  int idx = 0;
  for (const auto& c : cases) {
    Tensor<double> input = random_tensor(rng, {c.n, c.ci, c.h, c.w});
    Tensor<double> weight = random_tensor(rng, {c.co, c.ci, c.k, c.k});
    Tensor<double> bias = random_tensor(rng, {c.co});
    out.push_back(gradcheck(
        std::string(name) + "/" + std::to_string(idx++),
        {input, weight, bias},
        [=] { return conv2d(input, weight, bias, c.stride, c.padding, algo); },
        kTolGeneral, rng.next_u64()));
  }
}

void check_elementwise(std::vector<GradCheckResult>& out, Rng& rng) {
  const Shape shapes[] = {{3}, {2, 5}, {1, 2, 3, 4}, {7, 1}, {2, 2, 2}};
  int idx = 0;
  for (const Shape& shape : shapes) {
    const std::string tag = "/" + std::to_string(idx++);
    {
      Tensor<double> a = random_tensor(rng, shape);
      Tensor<double> b = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.add" + tag, {a, b},
                              [=] { return add(a, b); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      Tensor<double> b = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.sub" + tag, {a, b},
                              [=] { return sub(a, b); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      Tensor<double> b = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.mul" + tag, {a, b},
                              [=] { return mul(a, b); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      Tensor<double> s = random_tensor(rng, {1});
      out.push_back(gradcheck("elementwise.mul_scalar_bcast" + tag, {a, s},
                              [=] { return mul(a, s); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.sigmoid" + tag, {a},
                              [=] { return sigmoid(a); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.tanh" + tag, {a},
                              [=] { return tanh(a); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor_off_zero(rng, shape);
      out.push_back(gradcheck("elementwise.leaky_relu" + tag, {a},
                              [=] { return leaky_relu(a, 0.2); },
                              kTolElementwise, rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor_off_zero(rng, shape);
      out.push_back(gradcheck("elementwise.elu" + tag, {a},
                              [=] { return elu(a, 1.0); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor_off_zero(rng, shape);
      out.push_back(gradcheck("elementwise.abs" + tag, {a},
                              [=] { return abs(a); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.softplus" + tag, {a},
                              [=] { return softplus(a); }, kTolElementwise,
                              rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, shape);
      out.push_back(gradcheck("elementwise.scale" + tag, {a},
                              [=] { return scale(a, -1.7); }, kTolElementwise,
                              rng.next_u64()));
    }
  }
}

void check_structural(std::vector<GradCheckResult>& out, Rng& rng) {
  for (int i = 0; i < 5; ++i) {
    const int h = 2 * rng.uniform_int(1, 3), w = 2 * rng.uniform_int(1, 3);
    const std::string tag = "/" + std::to_string(i);
    {
      Tensor<double> a = random_tensor(rng, {1, rng.uniform_int(1, 3), h, w});
      Tensor<double> b = random_tensor(rng, {1, rng.uniform_int(1, 3), h, w});
      out.push_back(gradcheck("concat_channels" + tag, {a, b},
                              [=] { return concat_channels(a, b); },
                              kTolElementwise, rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, {1, 2, h, w});
      out.push_back(gradcheck(
          "resample2x.down" + tag, {a},
          [=] { return resample2x(a, ResampleDir::kDown); }, kTolGeneral,
          rng.next_u64()));
      out.push_back(gradcheck(
          "resample2x.up" + tag, {a},
          [=] { return resample2x(a, ResampleDir::kUp); }, kTolGeneral,
          rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, {2, 3, h, w});
      out.push_back(gradcheck("sum" + tag, {a}, [=] { return sum(a); },
                              kTolElementwise, rng.next_u64()));
      out.push_back(gradcheck("mean" + tag, {a}, [=] { return mean(a); },
                              kTolElementwise, rng.next_u64()));
      out.push_back(gradcheck("gram" + tag, {a}, [=] { return gram(a); },
                              kTolGeneral, rng.next_u64()));
    }
    {
      Tensor<double> a = random_tensor(rng, {1, 3, h, w});
      Tensor<double> m = random_tensor(rng, {1, 1, h, w}, 0.0, 1.0, false);
      out.push_back(gradcheck("mul_mask" + tag, {a},
                              [=] { return mul_mask(a, m); }, kTolElementwise,
                              rng.next_u64()));
      out.push_back(gradcheck(
          "affine_channels" + tag, {a},
          [=] { return affine_channels(a, {2.0, -1.0, 0.5}, {0.3, 0.0, 1.0}); },
          kTolElementwise, rng.next_u64()));
    }
  }
}

void check_sampler(std::vector<GradCheckResult>& out, Rng& rng) {
  for (int i = 0; i < 5; ++i) {
    const int h = rng.uniform_int(4, 7), w = rng.uniform_int(4, 7);
    const int oh = rng.uniform_int(2, 4), ow = rng.uniform_int(2, 4);
    Tensor<double> src = random_tensor(rng, {1, 2, h, w});
    // Interior fractional coordinates, away from the integer lattice where
    // the interpolation has derivative kinks.
    std::vector<double> coords(size_t(2) * oh * ow);
    for (int q = 0; q < oh * ow; ++q) {
      coords[q] = rng.uniform_int(0, w - 2) + rng.uniform(0.25, 0.75);
      coords[oh * ow + q] = rng.uniform_int(0, h - 2) + rng.uniform(0.25, 0.75);
    }
    Tensor<double> coord_t =
        Tensor<double>::from_data({1, 2, oh, ow}, std::move(coords), true);
    out.push_back(gradcheck(
        "sample_bilinear/" + std::to_string(i), {src, coord_t},
        [=] { return sample_bilinear(src, coord_t); }, kTolGeneral,
        rng.next_u64()));
  }
}

void check_networks(std::vector<GradCheckResult>& out, Rng& rng) {
  for (int i = 0; i < 5; ++i) {
    GatedConvSpec spec;
    spec.in_channels = rng.uniform_int(1, 3);
    spec.out_channels = rng.uniform_int(1, 3);
    ParamTable<double> params;
    Rng init(rng.next_u64());
    GatedConv<double> layer(spec, "gc", params, init);
    const int h = rng.uniform_int(4, 6), w = rng.uniform_int(4, 6);
    Tensor<double> x = random_tensor(rng, {1, spec.in_channels, h, w});
    std::vector<Tensor<double>> inputs = params.tensors();
    inputs.push_back(x);
    out.push_back(gradcheck("gated_conv/" + std::to_string(i), inputs,
                            [=] { return layer.forward(x); }, kTolGeneral,
                            rng.next_u64()));
  }
  for (int i = 0; i < 5; ++i) {
    DiscriminatorConfig config;
    config.in_channels = rng.uniform_int(2, 4);
    config.widths = {3, 4, 4};
    Discriminator<double> disc(config, rng.next_u64());
    Tensor<double> x = random_tensor(rng, {1, config.in_channels, 8, 8});
    std::vector<Tensor<double>> inputs = disc.params().tensors();
    inputs.push_back(x);
    out.push_back(gradcheck("discriminator_logits/" + std::to_string(i),
                            inputs, [&disc, x] { return disc.forward(x); },
                            kTolGeneral, rng.next_u64()));
  }
}

void check_losses(std::vector<GradCheckResult>& out, Rng& rng) {
  for (int i = 0; i < 5; ++i) {
    const int h = rng.uniform_int(4, 6), w = rng.uniform_int(4, 6);
    const std::string tag = "/" + std::to_string(i);
    {
      Tensor<double> a = random_tensor(rng, {1, 2, h, w});
      Tensor<double> b = random_tensor(rng, {1, 2, h, w}, -1.0, 1.0, false);
      std::vector<double> mdata(size_t(2) * h * w);
      for (auto& m : mdata) m = rng.uniform(0.0, 1.0) < 0.6 ? 1.0 : 0.0;
      Tensor<double> mask =
          Tensor<double>::from_data({1, 2, h, w}, std::move(mdata));
      out.push_back(gradcheck("masked_l1" + tag, {a},
                              [=] { return masked_l1(a, b, mask); },
                              kTolGeneral, rng.next_u64()));
    }
    {
      Tensor<double> pred = random_tensor(rng, {1, 3, h, w}, 0.0, 1.0);
      Tensor<double> target = random_tensor(rng, {1, 3, h, w}, 0.0, 1.0, false);
      out.push_back(gradcheck("nn_loss" + tag, {pred},
                              [=] { return nn_loss(pred, target, 3); },
                              kTolGeneral, rng.next_u64()));
    }
    {
      DiscriminatorConfig config;
      config.in_channels = 3;
      config.widths = {3, 3, 4};
      Discriminator<double> disc(config, rng.next_u64());
      Tensor<double> real = random_tensor(rng, {1, 3, 8, 8}, 0.0, 1.0, false);
      Tensor<double> fake = random_tensor(rng, {1, 3, 8, 8}, 0.0, 1.0);
      std::vector<Tensor<double>> inputs = disc.params().tensors();
      inputs.push_back(fake);
      out.push_back(gradcheck(
          "gan_g_term" + tag, inputs,
          [&disc, real, fake] { return gan_losses(disc, real, fake).g_term; },
          kTolGeneral, rng.next_u64()));
      out.push_back(gradcheck(
          "gan_d_term" + tag, disc.params().tensors(),
          [&disc, real, fake] { return gan_losses(disc, real, fake).d_term; },
          kTolGeneral, rng.next_u64()));
    }
    {
      FeatureExtractor<double> fx(rng.next_u64(), 3, {3, 4, 4});
      Tensor<double> pred = random_tensor(rng, {1, 3, 8, 8}, 0.0, 1.0);
      Tensor<double> target = random_tensor(rng, {1, 3, 8, 8}, 0.0, 1.0, false);
      out.push_back(gradcheck("feature_loss" + tag, {pred},
                              [&fx, pred, target] {
                                return feature_loss(pred, target, fx);
                              },
                              kTolGeneral, rng.next_u64()));
      out.push_back(gradcheck("style_loss" + tag, {pred},
                              [&fx, pred, target] {
                                return style_loss(pred, target, fx);
                              },
                              kTolGeneral, rng.next_u64()));
    }
    {
      // Stage-1 terms w.r.t. the completed coordinate map D.
      const int tex = 8;
      CoordTexture c(tex, tex);
      Rng crng(rng.next_u64());
      for (int t = 0; t < tex * tex; ++t) {
        if (crng.uniform(0.0, 1.0) < 0.7) {
          c.x[t] = float(crng.uniform(0.0, double(w - 1)));
          c.y[t] = float(crng.uniform(0.0, double(h - 1)));
          c.known[t] = 1.f;
        }
      }
      ColorTexture target_tex(tex, tex);
      std::vector<float> target_known(size_t(tex) * tex);
      for (auto& v : target_tex.rgb) v = float(crng.uniform(0.0, 1.0));
      for (auto& k : target_known) k = crng.uniform(0.0, 1.0) < 0.7 ? 1.f : 0.f;
      Tensor<double> source = random_tensor(rng, {1, 3, h, w}, 0.0, 1.0, false);
      std::vector<double> ddata(size_t(2) * tex * tex);
      for (int q = 0; q < tex * tex; ++q) {
        ddata[q] = crng.uniform_int(0, w - 2) + crng.uniform(0.25, 0.75);
        ddata[tex * tex + q] =
            crng.uniform_int(0, h - 2) + crng.uniform(0.25, 0.75);
      }
      Tensor<double> d =
          Tensor<double>::from_data({1, 2, tex, tex}, std::move(ddata), true);
      out.push_back(gradcheck(
          "stage1_loss" + tag, {d},
          [=] {
            Tensor<double> t = sample_bilinear(source, d);
            return stage1_loss(c, d, t, target_tex, target_known, w, h).total;
          },
          kTolGeneral, rng.next_u64()));
    }
  }
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(uint64_t seed) {
  std::vector<GradCheckResult> out;
  Rng rng(seed);
  check_conv(out, rng, ConvAlgo::kDirect, "conv2d.direct");
  check_conv(out, rng, ConvAlgo::kIm2col, "conv2d.im2col");
  check_elementwise(out, rng);
  check_structural(out, rng);
  check_sampler(out, rng);
  check_networks(out, rng);
  check_losses(out, rng);
  return out;
}

}  // namespace retex
