#include <doctest.h>

#include "retex/conv.hpp"
#include "retex/gradcheck.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace retex;

TEST_SUITE_BEGIN("conv");

TEST_CASE("all-ones 3x3 window sums to 9") {
  Tensor<float> input = Tensor<float>::full({1, 1, 3, 3}, 1.f);
  Tensor<float> weight = Tensor<float>::full({1, 1, 3, 3}, 1.f);
  Tensor<float> bias = Tensor<float>::zeros({1});
  for (ConvAlgo algo : {ConvAlgo::kDirect, ConvAlgo::kIm2col}) {
    Tensor<float> out = conv2d(input, weight, bias, 1, 0, algo);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    CHECK(out.item() == doctest::Approx(9.0));
  }
}

TEST_CASE("identity-delta kernel reproduces the input") {
  Rng rng(3);
  Tensor<double> input = testutil::random_tensor<double>(rng, {2, 2, 6, 7});
  std::vector<double> wdata(2 * 2 * 3 * 3, 0.0);
  // Delta at the center, wired channel i -> channel i.
  wdata[(0 * 2 + 0) * 9 + 4] = 1.0;
  wdata[(1 * 2 + 1) * 9 + 4] = 1.0;
  Tensor<double> weight = Tensor<double>::from_data({2, 2, 3, 3}, wdata);
  Tensor<double> bias = Tensor<double>::zeros({2});
  Tensor<double> out = conv2d(input, weight, bias, 1, 1);
  CHECK(testutil::max_abs_diff(out.value(), input.value()) == 0.0);
}

TEST_CASE("random case matches the six-nested-loop reference") {
  Rng rng(17);
  Tensor<double> input = testutil::random_tensor<double>(rng, {2, 3, 8, 8});
  Tensor<double> weight = testutil::random_tensor<double>(rng, {4, 3, 3, 3});
  Tensor<double> bias = testutil::random_tensor<double>(rng, {4});
  const std::vector<double> expected =
      oracle::conv2d_loops(input.value(), 2, 3, 8, 8, weight.value(), 4, 3,
                           bias.value(), 1, 0);
  for (ConvAlgo algo : {ConvAlgo::kDirect, ConvAlgo::kIm2col}) {
    Tensor<double> out = conv2d(input, weight, bias, 1, 0, algo);
    CHECK(testutil::max_rel_diff(out.value(), expected) < 1e-6);
  }
}

TEST_CASE("direct and im2col agree on assorted strides and paddings") {
  Rng rng(19);
  const struct {
    int n, ci, h, w, co, k, stride, padding;
  } cases[] = {
      {1, 1, 5, 5, 2, 3, 1, 1},  {2, 3, 9, 7, 4, 3, 2, 1},
      {1, 4, 6, 6, 3, 1, 1, 0},  {1, 2, 8, 8, 2, 5, 1, 2},
      {2, 2, 10, 6, 5, 4, 2, 1},
  };
  for (const auto& c : cases) {
    Tensor<float> input =
        testutil::random_tensor<float>(rng, {c.n, c.ci, c.h, c.w});
    Tensor<float> weight =
        testutil::random_tensor<float>(rng, {c.co, c.ci, c.k, c.k});
    Tensor<float> bias = testutil::random_tensor<float>(rng, {c.co});
    Tensor<float> direct =
        conv2d(input, weight, bias, c.stride, c.padding, ConvAlgo::kDirect);
    Tensor<float> im2col =
        conv2d(input, weight, bias, c.stride, c.padding, ConvAlgo::kIm2col);
    // Agreement to 1e-6 relative to the output scale (the two paths order
    // their float accumulations differently).
    double scale = 0.0;
    for (float v : direct.value()) scale = std::max(scale, double(std::fabs(v)));
    CHECK(testutil::max_abs_diff(direct.value(), im2col.value()) <=
          1e-6 * std::max(scale, 1.0));
  }
}

TEST_CASE("channel mismatch and geometry errors") {
  Tensor<float> input = Tensor<float>::zeros({1, 3, 8, 8});
  Tensor<float> weight = Tensor<float>::zeros({4, 2, 3, 3});
  Tensor<float> bias = Tensor<float>::zeros({4});
  CHECK_THROWS(conv2d(input, weight, bias, 1, 1));

  Tensor<float> rect = Tensor<float>::zeros({4, 3, 3, 2});
  CHECK_THROWS(conv2d(input, rect, bias, 1, 1));

  Tensor<float> huge = Tensor<float>::zeros({4, 3, 9, 9});
  CHECK_THROWS(conv2d(input, huge, bias, 1, 0));

  Tensor<float> bad_bias = Tensor<float>::zeros({3});
  Tensor<float> ok = Tensor<float>::zeros({4, 3, 3, 3});
  CHECK_THROWS(conv2d(input, ok, bad_bias, 1, 1));
}

TEST_CASE("stride-2 gradient sanity") {
  Rng rng(23);
  Tensor<double> input =
      testutil::random_tensor<double>(rng, {1, 2, 6, 6}, -1, 1, true);
  Tensor<double> weight =
      testutil::random_tensor<double>(rng, {3, 2, 3, 3}, -1, 1, true);
  Tensor<double> bias =
      testutil::random_tensor<double>(rng, {3}, -1, 1, true);
  GradCheckResult r = gradcheck(
      "conv_s2", {input, weight, bias},
      [&] { return conv2d(input, weight, bias, 2, 1); }, 1e-5, 7);
  CHECK(r.pass);
}

TEST_SUITE_END();
