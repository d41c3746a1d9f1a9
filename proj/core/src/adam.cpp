#include "retex/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace retex {

template <typename S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state,
               const AdamConfig& config) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), S(0));
      state.v[i].assign(params[i].numel(), S(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state/param count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, double(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].raw_value();
    if (state.m[i].size() != value.size()) {
      throw std::invalid_argument("adam_step: state/param shape mismatch");
    }
    const bool has_grad = params[i].has_grad();
    const std::vector<S>* grad = has_grad ? &params[i].grad() : nullptr;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < value.size(); ++j) {
      const double g = has_grad ? double((*grad)[j]) : 0.0;
      m[j] = S(config.beta1 * double(m[j]) + (1.0 - config.beta1) * g);
      v[j] = S(config.beta2 * double(v[j]) + (1.0 - config.beta2) * g * g);
      const double mhat = double(m[j]) / bc1;
      const double vhat = double(v[j]) / bc2;
      value[j] = S(double(value[j]) -
                   config.lr * mhat / (std::sqrt(vhat) + config.eps));
    }
  }
}

template void adam_step(std::vector<Tensor<float>>&, AdamState<float>&,
                        const AdamConfig&);
template void adam_step(std::vector<Tensor<double>>&, AdamState<double>&,
                        const AdamConfig&);

}  // namespace retex
