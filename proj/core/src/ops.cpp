#include "retex/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace retex {

namespace {

template <typename S>
void check_binary_shapes(const Tensor<S>& a, const Tensor<S>& b,
                         const char* op) {
  if (a.numel() == 1 || b.numel() == 1 || a.shape() == b.shape()) return;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
}

// Shared skeleton for the equal-shape/scalar binary ops. fwd(x, y) gives the
// value, dfdx/dfdy give the local derivatives at (x, y).
template <typename S, typename Fwd, typename DfDx, typename DfDy>
Tensor<S> binary_op(const Tensor<S>& a, const Tensor<S>& b, const char* name,
                    Fwd fwd, DfDx dfdx, DfDy dfdy) {
  check_binary_shapes(a, b, name);
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  const Shape& out_shape = b_scalar || !a_scalar ? a.shape() : b.shape();
  const int64_t n = shape_numel(out_shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<S> out(n);
  for (int64_t i = 0; i < n; ++i) {
    out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  auto a_impl = a.impl_ptr();
  auto b_impl = b.impl_ptr();
  return Tensor<S>::make_op(
      out_shape, std::move(out), {a, b},
      [a_impl, b_impl, a_scalar, b_scalar, dfdx,
       dfdy](detail::TensorImpl<S>& self) {
        const int64_t n = static_cast<int64_t>(self.value.size());
        if (a_impl->requires_grad) {
          a_impl->ensure_grad();
          for (int64_t i = 0; i < n; ++i) {
            const S x = a_impl->value[a_scalar ? 0 : i];
            const S y = b_impl->value[b_scalar ? 0 : i];
            a_impl->grad[a_scalar ? 0 : i] += dfdx(x, y) * self.grad[i];
          }
        }
        if (b_impl->requires_grad) {
          b_impl->ensure_grad();
          for (int64_t i = 0; i < n; ++i) {
            const S x = a_impl->value[a_scalar ? 0 : i];
            const S y = b_impl->value[b_scalar ? 0 : i];
            b_impl->grad[b_scalar ? 0 : i] += dfdy(x, y) * self.grad[i];
          }
        }
      },
      name);
}

template <typename S, typename Fwd, typename Df>
Tensor<S> unary_op(const Tensor<S>& t, const char* name, Fwd fwd, Df df) {
  const auto& v = t.value();
  std::vector<S> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = fwd(v[i]);
  auto t_impl = t.impl_ptr();
  return Tensor<S>::make_op(
      t.shape(), std::move(out), {t},
      [t_impl, df](detail::TensorImpl<S>& self) {
        t_impl->ensure_grad();
        for (size_t i = 0; i < self.value.size(); ++i) {
          // df receives (input, output) so rules can reuse the forward value.
          t_impl->grad[i] += df(t_impl->value[i], self.value[i]) * self.grad[i];
        }
      },
      name);
}

}  // namespace

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  return binary_op(
      a, b, "add", [](S x, S y) { return x + y; }, [](S, S) { return S(1); },
      [](S, S) { return S(1); });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  return binary_op(
      a, b, "sub", [](S x, S y) { return x - y; }, [](S, S) { return S(1); },
      [](S, S) { return S(-1); });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  return binary_op(
      a, b, "mul", [](S x, S y) { return x * y; }, [](S, S y) { return y; },
      [](S x, S) { return x; });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& t, double factor) {
  const S f = static_cast<S>(factor);
  return unary_op(
      t, "scale", [f](S x) { return f * x; }, [f](S, S) { return f; });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& t, double shift) {
  const S c = static_cast<S>(shift);
  return unary_op(
      t, "add_scalar", [c](S x) { return x + c; }, [](S, S) { return S(1); });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& t) {
  return unary_op(
      t, "sigmoid",
      [](S x) {
        // Evaluate on the negative half-axis only; stable for large |x|.
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        const S e = std::exp(x);
        return e / (S(1) + e);
      },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& t) {
  return unary_op(
      t, "tanh", [](S x) { return std::tanh(x); },
      [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& t, double alpha) {
  const S a = static_cast<S>(alpha);
  return unary_op(
      t, "leaky_relu", [a](S x) { return x > S(0) ? x : a * x; },
      [a](S x, S) { return x > S(0) ? S(1) : a; });
}

template <typename S>
Tensor<S> elu(const Tensor<S>& t, double alpha) {
  const S a = static_cast<S>(alpha);
  return unary_op(
      t, "elu", [a](S x) { return x > S(0) ? x : a * (std::exp(x) - S(1)); },
      [a](S x, S y) { return x > S(0) ? S(1) : y + a; });
}

template <typename S>
Tensor<S> abs(const Tensor<S>& t) {
  return unary_op(
      t, "abs", [](S x) { return std::fabs(x); },
      [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

template <typename S>
Tensor<S> softplus(const Tensor<S>& t) {
  return unary_op(
      t, "softplus",
      [](S x) {
        return std::max(x, S(0)) + std::log1p(std::exp(-std::fabs(x)));
      },
      [](S x, S) {
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        const S e = std::exp(x);
        return e / (S(1) + e);
      });
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape().size() != 4 || b.shape().size() != 4) {
    throw std::invalid_argument("concat_channels: expects NCHW tensors");
  }
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw std::invalid_argument("concat_channels: N/H/W mismatch " +
                                shape_str(sa) + " vs " + shape_str(sb));
  }
  const int n = sa[0], ca = sa[1], cb = sb[1], h = sa[2], w = sa[3];
  const int64_t plane = static_cast<int64_t>(h) * w;
  Shape out_shape = {n, ca + cb, h, w};
  std::vector<S> out(shape_numel(out_shape));
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int i = 0; i < n; ++i) {
    std::copy(av.begin() + i * ca * plane, av.begin() + (i + 1) * ca * plane,
              out.begin() + i * (ca + cb) * plane);
    std::copy(bv.begin() + i * cb * plane, bv.begin() + (i + 1) * cb * plane,
              out.begin() + (i * (ca + cb) + ca) * plane);
  }
  auto a_impl = a.impl_ptr();
  auto b_impl = b.impl_ptr();
  return Tensor<S>::make_op(
      out_shape, std::move(out), {a, b},
      [a_impl, b_impl, n, ca, cb, plane](detail::TensorImpl<S>& self) {
        if (a_impl->requires_grad) {
          a_impl->ensure_grad();
          for (int i = 0; i < n; ++i) {
            const S* g = self.grad.data() + i * (ca + cb) * plane;
            S* dst = a_impl->grad.data() + i * ca * plane;
            for (int64_t j = 0; j < ca * plane; ++j) dst[j] += g[j];
          }
        }
        if (b_impl->requires_grad) {
          b_impl->ensure_grad();
          for (int i = 0; i < n; ++i) {
            const S* g = self.grad.data() + (i * (ca + cb) + ca) * plane;
            S* dst = b_impl->grad.data() + i * cb * plane;
            for (int64_t j = 0; j < cb * plane; ++j) dst[j] += g[j];
          }
        }
      },
      "concat_channels");
}

template <typename S>
Tensor<S> sum(const Tensor<S>& t) {
  S acc = S(0);
  for (S v : t.value()) acc += v;
  auto t_impl = t.impl_ptr();
  return Tensor<S>::make_op(
      {1}, {acc}, {t},
      [t_impl](detail::TensorImpl<S>& self) {
        t_impl->ensure_grad();
        const S g = self.grad[0];
        for (auto& gv : t_impl->grad) gv += g;
      },
      "sum");
}

template <typename S>
Tensor<S> mean(const Tensor<S>& t) {
  return scale(sum(t), 1.0 / static_cast<double>(t.numel()));
}

template <typename S>
Tensor<S> mul_mask(const Tensor<S>& x, const Tensor<S>& mask) {
  if (x.shape().size() != 4 || mask.shape().size() != 4 ||
      mask.extent(1) != 1 || mask.extent(0) != x.extent(0) ||
      mask.extent(2) != x.extent(2) || mask.extent(3) != x.extent(3)) {
    throw std::invalid_argument("mul_mask: mask must be N×1×H×W matching x");
  }
  const int n = x.extent(0), c = x.extent(1);
  const int64_t plane = int64_t(x.extent(2)) * x.extent(3);
  const auto& xv = x.value();
  const auto& mv = mask.value();
  std::vector<S> out(xv.size());
  for (int b = 0; b < n; ++b) {
    const S* m = mv.data() + b * plane;
    for (int ci = 0; ci < c; ++ci) {
      const S* src = xv.data() + (int64_t(b) * c + ci) * plane;
      S* dst = out.data() + (int64_t(b) * c + ci) * plane;
      for (int64_t p = 0; p < plane; ++p) dst[p] = src[p] * m[p];
    }
  }
  auto x_impl = x.impl_ptr();
  auto m_impl = mask.impl_ptr();
  return Tensor<S>::make_op(
      x.shape(), std::move(out), {x, mask},
      [x_impl, m_impl, n, c, plane](detail::TensorImpl<S>& self) {
        if (x_impl->requires_grad) {
          x_impl->ensure_grad();
          for (int b = 0; b < n; ++b) {
            const S* m = m_impl->value.data() + b * plane;
            for (int ci = 0; ci < c; ++ci) {
              const int64_t base = (int64_t(b) * c + ci) * plane;
              for (int64_t p = 0; p < plane; ++p) {
                x_impl->grad[base + p] += m[p] * self.grad[base + p];
              }
            }
          }
        }
        if (m_impl->requires_grad) {
          m_impl->ensure_grad();
          for (int b = 0; b < n; ++b) {
            S* mg = m_impl->grad.data() + b * plane;
            for (int ci = 0; ci < c; ++ci) {
              const int64_t base = (int64_t(b) * c + ci) * plane;
              for (int64_t p = 0; p < plane; ++p) {
                mg[p] += x_impl->value[base + p] * self.grad[base + p];
              }
            }
          }
        }
      },
      "mul_mask");
}

template <typename S>
Tensor<S> affine_channels(const Tensor<S>& x, std::vector<double> mul,
                          std::vector<double> add) {
  if (x.shape().size() != 4 ||
      static_cast<size_t>(x.extent(1)) != mul.size() ||
      mul.size() != add.size()) {
    throw std::invalid_argument("affine_channels: coefficient count mismatch");
  }
  const int n = x.extent(0), c = x.extent(1);
  const int64_t plane = int64_t(x.extent(2)) * x.extent(3);
  const auto& xv = x.value();
  std::vector<S> out(xv.size());
  for (int b = 0; b < n; ++b) {
    for (int ci = 0; ci < c; ++ci) {
      const int64_t base = (int64_t(b) * c + ci) * plane;
      const S m = S(mul[ci]), a = S(add[ci]);
      for (int64_t p = 0; p < plane; ++p) out[base + p] = m * xv[base + p] + a;
    }
  }
  auto x_impl = x.impl_ptr();
  return Tensor<S>::make_op(
      x.shape(), std::move(out), {x},
      [x_impl, n, c, plane, mul](detail::TensorImpl<S>& self) {
        x_impl->ensure_grad();
        for (int b = 0; b < n; ++b) {
          for (int ci = 0; ci < c; ++ci) {
            const int64_t base = (int64_t(b) * c + ci) * plane;
            const S m = S(mul[ci]);
            for (int64_t p = 0; p < plane; ++p) {
              x_impl->grad[base + p] += m * self.grad[base + p];
            }
          }
        }
      },
      "affine_channels");
}

template <typename S>
Tensor<S> gram(const Tensor<S>& x) {
  if (x.shape().size() != 4) {
    throw std::invalid_argument("gram: expects NCHW tensor");
  }
  const int n = x.extent(0), c = x.extent(1);
  const int64_t plane = static_cast<int64_t>(x.extent(2)) * x.extent(3);
  const S norm = S(1) / static_cast<S>(c * plane);
  const auto& xv = x.value();
  Shape out_shape = {n, c, c};
  std::vector<S> out(shape_numel(out_shape), S(0));
  for (int b = 0; b < n; ++b) {
    const S* base = xv.data() + b * c * plane;
    for (int i = 0; i < c; ++i) {
      for (int j = i; j < c; ++j) {
        S acc = S(0);
        const S* xi = base + i * plane;
        const S* xj = base + j * plane;
        for (int64_t p = 0; p < plane; ++p) acc += xi[p] * xj[p];
        acc *= norm;
        out[(b * c + i) * c + j] = acc;
        out[(b * c + j) * c + i] = acc;
      }
    }
  }
  auto x_impl = x.impl_ptr();
  return Tensor<S>::make_op(
      out_shape, std::move(out), {x},
      [x_impl, n, c, plane, norm](detail::TensorImpl<S>& self) {
        x_impl->ensure_grad();
        for (int b = 0; b < n; ++b) {
          const S* xbase = x_impl->value.data() + b * c * plane;
          S* gbase = x_impl->grad.data() + b * c * plane;
          const S* gg = self.grad.data() + b * c * c;
          for (int i = 0; i < c; ++i) {
            for (int j = 0; j < c; ++j) {
              // G[i,j] touches rows i and j; both transposed entries apply.
              const S w = (gg[i * c + j] + gg[j * c + i]) * norm;
              if (w == S(0)) continue;
              const S* xj = xbase + j * plane;
              S* gi = gbase + i * plane;
              for (int64_t p = 0; p < plane; ++p) gi[p] += w * xj[p];
            }
          }
        }
      },
      "gram");
}

#define RETEX_INSTANTIATE_OPS(S)                                        \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);           \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);           \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);           \
  template Tensor<S> scale(const Tensor<S>&, double);                   \
  template Tensor<S> add_scalar(const Tensor<S>&, double);              \
  template Tensor<S> sigmoid(const Tensor<S>&);                         \
  template Tensor<S> tanh(const Tensor<S>&);                            \
  template Tensor<S> leaky_relu(const Tensor<S>&, double);              \
  template Tensor<S> elu(const Tensor<S>&, double);                     \
  template Tensor<S> abs(const Tensor<S>&);                             \
  template Tensor<S> softplus(const Tensor<S>&);                        \
  template Tensor<S> concat_channels(const Tensor<S>&, const Tensor<S>&); \
  template Tensor<S> sum(const Tensor<S>&);                             \
  template Tensor<S> mean(const Tensor<S>&);                            \
  template Tensor<S> mul_mask(const Tensor<S>&, const Tensor<S>&);      \
  template Tensor<S> affine_channels(const Tensor<S>&, std::vector<double>, \
                                     std::vector<double>);              \
  template Tensor<S> gram(const Tensor<S>&);

RETEX_INSTANTIATE_OPS(float)
RETEX_INSTANTIATE_OPS(double)
#undef RETEX_INSTANTIATE_OPS

}  // namespace retex
