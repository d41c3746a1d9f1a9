#include <doctest.h>

#include <cmath>

#include "retex/adam.hpp"
#include "retex/conv.hpp"
#include "retex/gradcheck.hpp"
#include "retex/ops.hpp"
#include "retex/tensor.hpp"
#include "test_util.hpp"

using namespace retex;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("shape and element count stay consistent") {
  CHECK_THROWS(Tensor<float>::from_data({2, 3}, std::vector<float>(5)));
  Tensor<float> t = Tensor<float>::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.shape() == Shape{2, 3, 4});
}

TEST_CASE("pointwise examples") {
  Tensor<double> zero = Tensor<double>::scalar(0.0);
  CHECK(sigmoid(zero).item() == doctest::Approx(0.5));
  Tensor<double> neg = Tensor<double>::scalar(-1.0);
  CHECK(leaky_relu(neg, 0.2).item() == doctest::Approx(-0.2));
  CHECK(elu(neg, 1.0).item() == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(softplus(zero).item() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("scalar broadcasting and shape errors") {
  Tensor<float> a = Tensor<float>::from_data({2, 2}, {1, 2, 3, 4});
  Tensor<float> s = Tensor<float>::scalar(2.0f);
  Tensor<float> prod = mul(a, s);
  CHECK(prod.value() == std::vector<float>{2, 4, 6, 8});
  Tensor<float> sum_t = add(s, a);
  CHECK(sum_t.value() == std::vector<float>{3, 4, 5, 6});
  Tensor<float> b = Tensor<float>::zeros({3, 2});
  CHECK_THROWS(add(a, b));
}

TEST_CASE("tanh derivative matches central differences in 64-bit") {
  Tensor<double> x = Tensor<double>::scalar(0.3);
  x.set_requires_grad(true);
  Tensor<double> y = tanh(x);
  y.backward();
  const double h = 1e-6;
  const double numeric = (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2 * h);
  CHECK(std::fabs(x.grad()[0] - numeric) / std::fabs(numeric) < 1e-6);
}

TEST_CASE("resample2x examples") {
  Tensor<double> t = Tensor<double>::from_data({1, 1, 2, 2}, {1, 3, 5, 7});
  CHECK(resample2x(t, ResampleDir::kDown).item() == doctest::Approx(4.0));

  Rng rng(5);
  Tensor<double> any = testutil::random_tensor<double>(rng, {1, 2, 4, 6});
  Tensor<double> round =
      resample2x(resample2x(any, ResampleDir::kUp), ResampleDir::kDown);
  CHECK(testutil::max_abs_diff(round.value(), any.value()) == 0.0);

  Tensor<double> odd = Tensor<double>::zeros({1, 1, 3, 4});
  CHECK_THROWS(resample2x(odd, ResampleDir::kDown));
}

TEST_CASE("resample2x down gradient vs finite differences") {
  Rng rng(7);
  Tensor<double> x =
      testutil::random_tensor<double>(rng, {1, 2, 4, 4}, -1, 1, true);
  GradCheckResult r = gradcheck(
      "down", {x}, [&] { return resample2x(x, ResampleDir::kDown); }, 1e-6,
      99);
  CHECK(r.pass);
}

TEST_CASE("concat_channels shapes") {
  Tensor<float> a = Tensor<float>::zeros({1, 2, 4, 4});
  Tensor<float> b = Tensor<float>::zeros({1, 3, 4, 4});
  CHECK(concat_channels(a, b).shape() == Shape{1, 5, 4, 4});
  Tensor<float> bad = Tensor<float>::zeros({1, 3, 4, 5});
  CHECK_THROWS(concat_channels(a, bad));
}

TEST_CASE("adam: zero grad leaves params unchanged") {
  Tensor<float> p = Tensor<float>::from_data({2}, {1.5f, -0.5f}, true);
  std::vector<Tensor<float>> params = {p};
  AdamState<float> state;
  adam_step(params, state, AdamConfig{});
  CHECK(p.value()[0] == 1.5f);
  CHECK(p.value()[1] == -0.5f);
}

TEST_CASE("adam: one step with unit gradient") {
  // param 1.0, grad 1.0, lr 1e-3, betas (0.9, 0.999), eps 1e-8:
  // mhat = vhat = 1 after bias correction, update = lr/(1+eps) -> 0.999.
  Tensor<double> p = Tensor<double>::from_data({1}, {1.0}, true);
  Tensor<double> loss = mul(p, Tensor<double>::scalar(1.0));
  loss.backward();
  std::vector<Tensor<double>> params = {p};
  AdamState<double> state;
  adam_step(params, state, AdamConfig{});
  CHECK(p.value()[0] == doctest::Approx(0.999).epsilon(1e-9));
}

TEST_CASE("backward accumulates over graph branches") {
  Rng rng(11);
  Tensor<double> x = testutil::random_tensor<double>(rng, {3}, -1, 1, true);
  // f = sum(x*x) + sum(3x); leaf grad must be 2x + 3.
  Tensor<double> f = add(sum(mul(x, x)), sum(scale(x, 3.0)));
  f.backward();
  for (int i = 0; i < 3; ++i) {
    CHECK(x.grad()[i] ==
          doctest::Approx(2 * x.value()[i] + 3.0).epsilon(1e-12));
  }
}

TEST_CASE("backward is linear in the loss combination") {
  Rng rng(13);
  const Shape shape = {4};
  Tensor<double> base = testutil::random_tensor<double>(rng, shape);

  auto grad_of = [&](double wf, double wg) {
    Tensor<double> x = base.clone(true);
    Tensor<double> f = sum(mul(x, x));
    Tensor<double> g = sum(sigmoid(x));
    add(scale(f, wf), scale(g, wg)).backward();
    return x.grad();
  };
  const std::vector<double> gf = grad_of(1.0, 0.0);
  const std::vector<double> gg = grad_of(0.0, 1.0);
  const std::vector<double> combined = grad_of(2.5, -1.25);
  for (size_t i = 0; i < combined.size(); ++i) {
    CHECK(combined[i] ==
          doctest::Approx(2.5 * gf[i] - 1.25 * gg[i]).epsilon(1e-10));
  }
}

TEST_CASE("second backward without re-recording is an error") {
  Tensor<double> x = Tensor<double>::from_data({1}, {2.0}, true);
  Tensor<double> y = mul(x, x);
  y.backward();
  CHECK_THROWS_AS(y.backward(), std::logic_error);

  // Building further ops on a consumed graph is also rejected.
  Tensor<double> z = scale(y, 2.0);
  CHECK_THROWS_AS(z.backward(), std::logic_error);

  // A re-recorded graph on the same leaf works and accumulates.
  Tensor<double> y2 = mul(x, x);
  y2.backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0));  // two passes of d(x²) = 4
}

TEST_CASE("backward requires scalar roots") {
  Tensor<double> x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  Tensor<double> y = mul(x, x);
  CHECK_THROWS_AS(y.backward(), std::logic_error);
}

TEST_CASE("graph records every op exactly once, parents first") {
  Tensor<double> x = Tensor<double>::from_data({1}, {1.0}, true);
  Tensor<double> a = mul(x, x);
  Tensor<double> b = add(a, a);  // diamond
  Tensor<double> loss = sum(b);
  Graph<double> graph = Graph<double>::record(loss);
  CHECK(graph.order.size() == 4);
  CHECK(graph.order.front() == x.impl());
  CHECK(graph.order.back() == loss.impl());
}

TEST_CASE("no-grad mode records nothing") {
  Tensor<double> x = Tensor<double>::from_data({1}, {1.0}, true);
  NoGradGuard guard;
  Tensor<double> y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("forward determinism: identical seeds give identical bits") {
  auto run = [] {
    Rng rng(42);
    Tensor<float> x = testutil::random_tensor<float>(rng, {1, 3, 8, 8});
    Tensor<float> w = testutil::random_tensor<float>(rng, {4, 3, 3, 3});
    Tensor<float> b = testutil::random_tensor<float>(rng, {4});
    Tensor<float> out = sigmoid(conv2d(x, w, b, 1, 1));
    return out.value();
  };
  const std::vector<float> a = run();
  const std::vector<float> b = run();
  CHECK(a == b);
}

TEST_SUITE_END();
