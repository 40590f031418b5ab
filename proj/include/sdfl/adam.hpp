#pragma once

#include "sdfl/graph.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdfl {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter tensor.
template <typename T>
struct AdamState {
  std::size_t step = 0;
  std::vector<T> m;
  std::vector<T> v;
  AdamOptions options{};

  AdamState() = default;
  explicit AdamState(std::size_t size, AdamOptions opt = {})
      : m(size, T(0)), v(size, T(0)), options(opt) {}

  bool operator==(const AdamState& o) const { return step == o.step && m == o.m && v == o.v; }
};

/// One bias-corrected Adam update of `params` in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               const std::string& name = "parameter") {
  if (!(lr > 0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient size mismatch for " + name);
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), T(0));
    state.v.assign(params.size(), T(0));
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state size mismatch for " + name);
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("adam_step: non-finite gradient in " + name + " at index " +
                               std::to_string(i));
    }
  }
  ++state.step;
  const T b1 = static_cast<T>(state.options.beta1);
  const T b2 = static_cast<T>(state.options.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(state.options.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(state.options.beta2, static_cast<double>(state.step)));
  const T eps = static_cast<T>(state.options.eps);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T mhat = state.m[i] / c1;
    const T vhat = state.v[i] / c2;
    params[i] -= rate * mhat / (std::sqrt(vhat) + eps);
  }
}

/// Applies adam_step to a parameter using its accumulated gradient, then
/// clears the gradient.
template <typename T>
void adam_step(Var<T>& param, AdamState<T>& state, double lr, const std::string& name = "parameter") {
  const auto g = param.grad();
  adam_step<T>(param.mutable_value().values(), std::span<const T>(g), state, lr, name);
  param.zero_grad();
}

}  // namespace sdfl
