#include "retex/ssim.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace retex {

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size_t(size) * size);
  const int r = size / 2;
  double total = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - r, dy = y - r;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w[size_t(y) * size + x] = v;
      total += v;
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

template <typename S>
double ssim(const Tensor<S>& a, const Tensor<S>& b, const SsimConfig& config) {
  if (a.shape() != b.shape() || a.shape().size() != 4) {
    throw std::invalid_argument("ssim: images must share an NCHW shape");
  }
  const int n = a.extent(0), c = a.extent(1);
  const int h = a.extent(2), w = a.extent(3);
  if (h < config.window || w < config.window) {
    throw std::invalid_argument("ssim: image smaller than the window");
  }
  const std::vector<double> win = gaussian_window(config.window, config.sigma);
  const double c1 = (config.k1 * config.value_range) * (config.k1 * config.value_range);
  const double c2 = (config.k2 * config.value_range) * (config.k2 * config.value_range);
  const int64_t plane = int64_t(h) * w;
  const auto& av = a.value();
  const auto& bv = b.value();
  double total = 0.0;
  int64_t count = 0;
  for (int p = 0; p < n * c; ++p) {
    const S* pa = av.data() + int64_t(p) * plane;
    const S* pb = bv.data() + int64_t(p) * plane;
    for (int y = 0; y + config.window <= h; ++y) {
      for (int x = 0; x + config.window <= w; ++x) {
        double mu_a = 0.0, mu_b = 0.0;
        double saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int wy = 0; wy < config.window; ++wy) {
          const S* ra = pa + int64_t(y + wy) * w + x;
          const S* rb = pb + int64_t(y + wy) * w + x;
          const double* wr = win.data() + int64_t(wy) * config.window;
          for (int wx = 0; wx < config.window; ++wx) {
            const double va = ra[wx], vb = rb[wx];
            mu_a += wr[wx] * va;
            mu_b += wr[wx] * vb;
            saa += wr[wx] * va * va;
            sbb += wr[wx] * vb * vb;
            sab += wr[wx] * va * vb;
          }
        }
        const double var_a = saa - mu_a * mu_a;
        const double var_b = sbb - mu_b * mu_b;
        const double cov = sab - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den =
            (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        total += num / den;
        ++count;
      }
    }
  }
  return total / double(count);
}

template double ssim(const Tensor<float>&, const Tensor<float>&,
                     const SsimConfig&);
template double ssim(const Tensor<double>&, const Tensor<double>&,
                     const SsimConfig&);

}  // namespace retex
