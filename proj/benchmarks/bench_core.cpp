// Microbenchmarks for the hot paths: convolution algorithms, the bilinear
// sampler, splatting and one full stage-1 training step.

#include <benchmark/benchmark.h>

#include "retex/config.hpp"
#include "retex/conv.hpp"
#include "retex/losses.hpp"
#include "retex/networks.hpp"
#include "retex/ops.hpp"
#include "retex/rng.hpp"
#include "retex/synth.hpp"
#include "retex/warp.hpp"

namespace {

using namespace retex;

Tensor<float> random_f(Rng& rng, const Shape& shape, bool grad = false) {
  std::vector<float> data(shape_numel(shape));
  for (auto& v : data) v = float(rng.uniform(-1.0, 1.0));
  return Tensor<float>::from_data(shape, std::move(data), grad);
}

void BM_conv2d(benchmark::State& state, ConvAlgo algo) {
  Rng rng(1);
  const int c = int(state.range(0));
  const int hw = int(state.range(1));
  Tensor<float> input = random_f(rng, {1, c, hw, hw});
  Tensor<float> weight = random_f(rng, {c, c, 3, 3});
  Tensor<float> bias = random_f(rng, {c});
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(input, weight, bias, 1, 1, algo));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(c) * c * 9 * hw * hw);
}

void BM_conv_direct(benchmark::State& state) {
  BM_conv2d(state, ConvAlgo::kDirect);
}
void BM_conv_im2col(benchmark::State& state) {
  BM_conv2d(state, ConvAlgo::kIm2col);
}
BENCHMARK(BM_conv_direct)->Args({16, 32})->Args({32, 64});
BENCHMARK(BM_conv_im2col)->Args({16, 32})->Args({32, 64})->Args({32, 128});

void BM_sample_bilinear(benchmark::State& state) {
  Rng rng(2);
  const int hw = int(state.range(0));
  Tensor<float> src = random_f(rng, {1, 3, hw, hw});
  std::vector<float> coords(size_t(2) * hw * hw);
  for (auto& v : coords) v = float(rng.uniform(0.0, hw - 1.0));
  Tensor<float> c = Tensor<float>::from_data({1, 2, hw, hw}, std::move(coords));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_bilinear(src, c));
  }
}
BENCHMARK(BM_sample_bilinear)->Arg(64)->Arg(128);

void BM_splat_coordinates(benchmark::State& state) {
  SceneConfig config;
  config.image_size = int(state.range(0));
  config.texture_size = 64;
  const SceneSample sample = generate_pair(3, config);
  for (auto _ : state) {
    benchmark::DoNotOptimize(splat_coordinates(sample.source_map, 64, 64));
  }
}
BENCHMARK(BM_splat_coordinates)->Arg(64)->Arg(128);

void BM_stage1_step(benchmark::State& state) {
  SceneConfig scene;
  scene.image_size = int(state.range(0));
  scene.texture_size = 64;
  InpainterConfig cfg;
  cfg.widths = {16, 32, 64};
  Inpainter<float> f(cfg, 11);
  std::vector<Tensor<float>> params = f.params().tensors();
  AdamState<float> st;
  const AdamConfig adam;
  uint64_t seed = 0;
  for (auto _ : state) {
    const SceneSample sample = generate_pair(seed++, scene);
    const CoordTexture c = splat_coordinates(sample.source_map, 64, 64);
    Tensor<float> d = f.forward(
        coord_texture_to_input<float>(c, scene.image_size, scene.image_size),
        scene.image_size, scene.image_size);
    Tensor<float> t = sample_bilinear(sample.source_image, d);
    const ColorSplat tgt =
        splat_colors(sample.target_image, sample.target_map, 64, 64);
    LossReport<float> rep = stage1_loss(c, d, t, tgt.texture, tgt.known,
                                        scene.image_size, scene.image_size);
    rep.total.backward();
    adam_step(params, st, adam);
    f.params().zero_grads();
  }
}
BENCHMARK(BM_stage1_step)->Unit(benchmark::kMillisecond)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
