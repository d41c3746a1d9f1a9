#include "retex/conv.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace retex {

namespace {

struct ConvDims {
  int n, cin, h, w;
  int cout, k, stride, padding;
  int oh, ow;
};

template <typename S>
ConvDims conv_dims(const Tensor<S>& input, const Tensor<S>& weight, int stride,
                   int padding) {
  if (input.shape().size() != 4 || weight.shape().size() != 4) {
    throw std::invalid_argument("conv2d: input and weight must be 4-D");
  }
  ConvDims d;
  d.n = input.extent(0);
  d.cin = input.extent(1);
  d.h = input.extent(2);
  d.w = input.extent(3);
  d.cout = weight.extent(0);
  d.k = weight.extent(2);
  d.stride = stride;
  d.padding = padding;
  if (weight.extent(2) != weight.extent(3)) {
    throw std::invalid_argument("conv2d: kernel must be square");
  }
  if (weight.extent(1) != d.cin) {
    throw std::invalid_argument(
        "conv2d: input channels " + std::to_string(d.cin) +
        " do not match weight's input extent " +
        std::to_string(weight.extent(1)));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int eh = d.h + 2 * padding - d.k;
  const int ew = d.w + 2 * padding - d.k;
  if (eh < 0 || ew < 0) {
    throw std::invalid_argument("conv2d: kernel does not fit padded input");
  }
  d.oh = eh / stride + 1;
  d.ow = ew / stride + 1;
  return d;
}

template <typename S>
using MatRM =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// col is K×M with K = cin·k·k and M = oh·ow, row-major.
template <typename S>
void im2col(const S* in, const ConvDims& d, S* col) {
  const int64_t m = static_cast<int64_t>(d.oh) * d.ow;
  for (int ci = 0; ci < d.cin; ++ci) {
    for (int kh = 0; kh < d.k; ++kh) {
      for (int kw = 0; kw < d.k; ++kw) {
        S* row = col + ((static_cast<int64_t>(ci) * d.k + kh) * d.k + kw) * m;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.stride + kh - d.padding;
          if (ih < 0 || ih >= d.h) {
            std::fill(row + oh * d.ow, row + (oh + 1) * d.ow, S(0));
            continue;
          }
          const S* src = in + (static_cast<int64_t>(ci) * d.h + ih) * d.w;
          for (int ow = 0; ow < d.ow; ++ow) {
            const int iw = ow * d.stride + kw - d.padding;
            row[oh * d.ow + ow] = (iw < 0 || iw >= d.w) ? S(0) : src[iw];
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const S* col, const ConvDims& d, S* din) {
  const int64_t m = static_cast<int64_t>(d.oh) * d.ow;
  for (int ci = 0; ci < d.cin; ++ci) {
    for (int kh = 0; kh < d.k; ++kh) {
      for (int kw = 0; kw < d.k; ++kw) {
        const S* row =
            col + ((static_cast<int64_t>(ci) * d.k + kh) * d.k + kw) * m;
        for (int oh = 0; oh < d.oh; ++oh) {
          const int ih = oh * d.stride + kh - d.padding;
          if (ih < 0 || ih >= d.h) continue;
          S* dst = din + (static_cast<int64_t>(ci) * d.h + ih) * d.w;
          for (int ow = 0; ow < d.ow; ++ow) {
            const int iw = ow * d.stride + kw - d.padding;
            if (iw >= 0 && iw < d.w) dst[iw] += row[oh * d.ow + ow];
          }
        }
      }
    }
  }
}

template <typename S>
std::vector<S>& col_scratch() {
  static thread_local std::vector<S> buf;
  return buf;
}

template <typename S>
void conv_forward_im2col(const S* in, const S* w, const S* b, const ConvDims& d,
                         S* out) {
  const int64_t kdim = static_cast<int64_t>(d.cin) * d.k * d.k;
  const int64_t m = static_cast<int64_t>(d.oh) * d.ow;
  auto& col = col_scratch<S>();
  col.resize(kdim * m);
  Eigen::Map<const MatRM<S>> wmat(w, d.cout, kdim);
  for (int n = 0; n < d.n; ++n) {
    im2col(in + static_cast<int64_t>(n) * d.cin * d.h * d.w, d, col.data());
    Eigen::Map<const MatRM<S>> cmat(col.data(), kdim, m);
    Eigen::Map<MatRM<S>> omat(out + static_cast<int64_t>(n) * d.cout * m,
                              d.cout, m);
    omat.noalias() = wmat * cmat;
    for (int o = 0; o < d.cout; ++o) omat.row(o).array() += b[o];
  }
}

template <typename S>
void conv_forward_direct(const S* in, const S* w, const S* b, const ConvDims& d,
                         S* out) {
  for (int n = 0; n < d.n; ++n) {
    const S* in_n = in + static_cast<int64_t>(n) * d.cin * d.h * d.w;
    for (int o = 0; o < d.cout; ++o) {
      S* dst = out + (static_cast<int64_t>(n) * d.cout + o) * d.oh * d.ow;
      const S* w_o = w + static_cast<int64_t>(o) * d.cin * d.k * d.k;
      for (int oh = 0; oh < d.oh; ++oh) {
        for (int ow = 0; ow < d.ow; ++ow) {
          S acc = b[o];
          for (int ci = 0; ci < d.cin; ++ci) {
            for (int kh = 0; kh < d.k; ++kh) {
              const int ih = oh * d.stride + kh - d.padding;
              if (ih < 0 || ih >= d.h) continue;
              for (int kw = 0; kw < d.k; ++kw) {
                const int iw = ow * d.stride + kw - d.padding;
                if (iw < 0 || iw >= d.w) continue;
                acc += in_n[(static_cast<int64_t>(ci) * d.h + ih) * d.w + iw] *
                       w_o[(static_cast<int64_t>(ci) * d.k + kh) * d.k + kw];
              }
            }
          }
          dst[oh * d.ow + ow] = acc;
        }
      }
    }
  }
}

}  // namespace

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight,
                 const Tensor<S>& bias, int stride, int padding,
                 ConvAlgo algo) {
  const ConvDims d = conv_dims(input, weight, stride, padding);
  if (bias.numel() != d.cout) {
    throw std::invalid_argument("conv2d: bias extent must equal out channels");
  }
  Shape out_shape = {d.n, d.cout, d.oh, d.ow};
  std::vector<S> out(shape_numel(out_shape));
  if (algo == ConvAlgo::kDirect) {
    conv_forward_direct(input.value().data(), weight.value().data(),
                        bias.value().data(), d, out.data());
  } else {
    conv_forward_im2col(input.value().data(), weight.value().data(),
                        bias.value().data(), d, out.data());
  }

  auto in_impl = input.impl_ptr();
  auto w_impl = weight.impl_ptr();
  auto b_impl = bias.impl_ptr();
  return Tensor<S>::make_op(
      out_shape, std::move(out), {input, weight, bias},
      [in_impl, w_impl, b_impl, d](detail::TensorImpl<S>& self) {
        const int64_t kdim = static_cast<int64_t>(d.cin) * d.k * d.k;
        const int64_t m = static_cast<int64_t>(d.oh) * d.ow;
        if (b_impl->requires_grad) {
          b_impl->ensure_grad();
          for (int n = 0; n < d.n; ++n) {
            for (int o = 0; o < d.cout; ++o) {
              const S* g =
                  self.grad.data() + (static_cast<int64_t>(n) * d.cout + o) * m;
              S acc = S(0);
              for (int64_t i = 0; i < m; ++i) acc += g[i];
              b_impl->grad[o] += acc;
            }
          }
        }
        const bool need_w = w_impl->requires_grad;
        const bool need_in = in_impl->requires_grad;
        if (!need_w && !need_in) return;
        if (need_w) w_impl->ensure_grad();
        if (need_in) in_impl->ensure_grad();
        std::vector<S> col(kdim * m);
        std::vector<S> colg(need_in ? kdim * m : 0);
        Eigen::Map<const MatRM<S>> wmat(w_impl->value.data(), d.cout, kdim);
        Eigen::Map<MatRM<S>> wgrad(w_impl->grad.data(), d.cout, kdim);
        for (int n = 0; n < d.n; ++n) {
          Eigen::Map<const MatRM<S>> gmat(
              self.grad.data() + static_cast<int64_t>(n) * d.cout * m, d.cout,
              m);
          if (need_w) {
            im2col(in_impl->value.data() +
                       static_cast<int64_t>(n) * d.cin * d.h * d.w,
                   d, col.data());
            Eigen::Map<const MatRM<S>> cmat(col.data(), kdim, m);
            wgrad.noalias() += gmat * cmat.transpose();
          }
          if (need_in) {
            Eigen::Map<MatRM<S>> cgrad(colg.data(), kdim, m);
            cgrad.noalias() = wmat.transpose() * gmat;
            col2im_add(colg.data(), d,
                       in_impl->grad.data() +
                           static_cast<int64_t>(n) * d.cin * d.h * d.w);
          }
        }
      },
      "conv2d");
}

template <typename S>
Tensor<S> resample2x(const Tensor<S>& input, ResampleDir dir) {
  if (input.shape().size() != 4) {
    throw std::invalid_argument("resample2x: expects NCHW tensor");
  }
  const int n = input.extent(0), c = input.extent(1);
  const int h = input.extent(2), w = input.extent(3);
  const auto& in = input.value();
  auto in_impl = input.impl_ptr();
  if (dir == ResampleDir::kDown) {
    if (h % 2 != 0 || w % 2 != 0) {
      throw std::invalid_argument("resample2x: down requires even extents, " +
                                  shape_str(input.shape()));
    }
    const int oh = h / 2, ow = w / 2;
    Shape out_shape = {n, c, oh, ow};
    std::vector<S> out(shape_numel(out_shape));
    for (int p = 0; p < n * c; ++p) {
      const S* src = in.data() + static_cast<int64_t>(p) * h * w;
      S* dst = out.data() + static_cast<int64_t>(p) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const S* r0 = src + (2 * y) * w + 2 * x;
          const S* r1 = r0 + w;
          dst[y * ow + x] = (r0[0] + r0[1] + r1[0] + r1[1]) * S(0.25);
        }
      }
    }
    return Tensor<S>::make_op(
        out_shape, std::move(out), {input},
        [in_impl, n, c, h, w, oh, ow](detail::TensorImpl<S>& self) {
          in_impl->ensure_grad();
          for (int p = 0; p < n * c; ++p) {
            const S* g = self.grad.data() + static_cast<int64_t>(p) * oh * ow;
            S* dst = in_impl->grad.data() + static_cast<int64_t>(p) * h * w;
            for (int y = 0; y < oh; ++y) {
              for (int x = 0; x < ow; ++x) {
                const S gv = g[y * ow + x] * S(0.25);
                S* r0 = dst + (2 * y) * w + 2 * x;
                S* r1 = r0 + w;
                r0[0] += gv;
                r0[1] += gv;
                r1[0] += gv;
                r1[1] += gv;
              }
            }
          }
        },
        "resample2x_down");
  }

  const int oh = h * 2, ow = w * 2;
  Shape out_shape = {n, c, oh, ow};
  std::vector<S> out(shape_numel(out_shape));
  for (int p = 0; p < n * c; ++p) {
    const S* src = in.data() + static_cast<int64_t>(p) * h * w;
    S* dst = out.data() + static_cast<int64_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const S* row = src + (y / 2) * w;
      for (int x = 0; x < ow; ++x) dst[y * ow + x] = row[x / 2];
    }
  }
  return Tensor<S>::make_op(
      out_shape, std::move(out), {input},
      [in_impl, n, c, h, w, oh, ow](detail::TensorImpl<S>& self) {
        in_impl->ensure_grad();
        for (int p = 0; p < n * c; ++p) {
          const S* g = self.grad.data() + static_cast<int64_t>(p) * oh * ow;
          S* dst = in_impl->grad.data() + static_cast<int64_t>(p) * h * w;
          for (int y = 0; y < oh; ++y) {
            S* row = dst + (y / 2) * w;
            for (int x = 0; x < ow; ++x) row[x / 2] += g[y * ow + x];
          }
        }
      },
      "resample2x_up");
}

#define RETEX_INSTANTIATE_CONV(S)                                          \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&,            \
                            const Tensor<S>&, int, int, ConvAlgo);         \
  template Tensor<S> resample2x(const Tensor<S>&, ResampleDir);

RETEX_INSTANTIATE_CONV(float)
RETEX_INSTANTIATE_CONV(double)
#undef RETEX_INSTANTIATE_CONV

}  // namespace retex
