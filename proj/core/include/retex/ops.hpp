#pragma once

#include "retex/tensor.hpp"

namespace retex {

// Pointwise ops support equal shapes plus scalar-with-tensor broadcasting
// (one operand of a single element); nothing fancier.
template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);

// Multiplication/shift by a plain constant.
template <typename S>
Tensor<S> scale(const Tensor<S>& t, double factor);
template <typename S>
Tensor<S> add_scalar(const Tensor<S>& t, double shift);

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& t);
template <typename S>
Tensor<S> tanh(const Tensor<S>& t);
template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& t, double alpha = 0.2);
template <typename S>
Tensor<S> elu(const Tensor<S>& t, double alpha = 1.0);
template <typename S>
Tensor<S> abs(const Tensor<S>& t);
template <typename S>
Tensor<S> softplus(const Tensor<S>& t);

// NCHW channel concatenation; N, H, W must match.
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b);

template <typename S>
Tensor<S> sum(const Tensor<S>& t);
template <typename S>
Tensor<S> mean(const Tensor<S>& t);

// x is N×C×H×W, mask N×1×H×W, broadcast over channels.
template <typename S>
Tensor<S> mul_mask(const Tensor<S>& x, const Tensor<S>& mask);

// Per-channel y[c] = mul[c]·x[c] + add[c] on NCHW tensors.
template <typename S>
Tensor<S> affine_channels(const Tensor<S>& x, std::vector<double> mul,
                          std::vector<double> add);

// Channel Gram matrices: x is N×C×H×W, result N×C×C scaled by 1/(C·H·W).
template <typename S>
Tensor<S> gram(const Tensor<S>& x);

}  // namespace retex
