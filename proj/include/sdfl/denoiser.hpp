#pragma once

#include "sdfl/init.hpp"
#include "sdfl/ops.hpp"
#include "sdfl/rng.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdfl {

enum class Mode { train, infer, frozen = infer };

template <typename T>
struct NamedParam {
  std::string name;
  Var<T>* var;
};

struct DenoiserConfig {
  std::size_t width = 64;
  std::size_t layers = 14;  // intermediate dilated layers

  /// Dilation of intermediate layer k (0-based): 2^k, except the last which is 1.
  std::size_t dilation(std::size_t k) const {
    return k + 1 < layers ? std::size_t{1} << k : std::size_t{1};
  }

  /// Input samples that can influence one output sample.
  std::size_t receptive_field() const {
    std::size_t reach = 0;
    for (std::size_t k = 0; k < layers; ++k) reach += dilation(k);
    return 2 * reach + 1;
  }

  bool operator==(const DenoiserConfig&) const = default;
};

/// Learned state of the context-aggregation network.
template <typename T>
struct DenoiserParams {
  DenoiserConfig config;
  std::vector<Var<T>> kernels;  // (3, C_in, width) per layer
  std::vector<Var<T>> alphas;   // (1) per layer
  std::vector<Var<T>> betas;    // (1) per layer
  std::vector<BatchNormStats<T>> bn;
  Var<T> out_kernel;  // (width, 1)
  Var<T> out_bias;    // (1)

  void validate() const {
    const auto& c = config;
    auto fail = [](const std::string& m) { throw std::invalid_argument("DenoiserParams: " + m); };
    if (c.layers == 0 || c.width == 0) fail("empty architecture");
    if (kernels.size() != c.layers || alphas.size() != c.layers || betas.size() != c.layers ||
        bn.size() != c.layers) {
      fail("layer count mismatch");
    }
    for (std::size_t k = 0; k < c.layers; ++k) {
      const Shape want{3, k == 0 ? std::size_t{1} : c.width, c.width};
      if (!kernels[k] || kernels[k].shape() != want) {
        fail("kernel " + std::to_string(k) + " has shape " +
             (kernels[k] ? shape_string(kernels[k].shape()) : "()") + ", expected " +
             shape_string(want));
      }
      if (!alphas[k] || alphas[k].size() != 1 || !betas[k] || betas[k].size() != 1) {
        fail("adaptive-norm weights of layer " + std::to_string(k) + " must be scalars");
      }
      if (bn[k].initialized() && (bn[k].mean.size() != c.width || bn[k].var.size() != c.width)) {
        fail("running stats of layer " + std::to_string(k) + " have wrong width");
      }
    }
    if (!out_kernel || out_kernel.shape() != Shape{c.width, 1}) fail("output kernel shape");
    if (!out_bias || out_bias.size() != 1) fail("output bias must be a scalar");
  }

  std::vector<NamedParam<T>> named_parameters() {
    std::vector<NamedParam<T>> out;
    for (std::size_t k = 0; k < config.layers; ++k) {
      const std::string p = "layer" + std::to_string(k + 1) + ".";
      out.push_back({p + "kernel", &kernels[k]});
      out.push_back({p + "alpha", &alphas[k]});
      out.push_back({p + "beta", &betas[k]});
    }
    out.push_back({"output.kernel", &out_kernel});
    out.push_back({"output.bias", &out_bias});
    return out;
  }
};

/// Xavier kernels, zero bias, alpha = 1, beta = 0, empty running stats.
template <typename T>
DenoiserParams<T> denoiser_init(Rng& rng, DenoiserConfig config = {}) {
  DenoiserParams<T> p;
  p.config = config;
  for (std::size_t k = 0; k < config.layers; ++k) {
    const std::size_t cin = k == 0 ? 1 : config.width;
    p.kernels.push_back(Var<T>::parameter(xavier_init<T>({3, cin, config.width}, rng)));
    p.alphas.push_back(Var<T>::parameter(Tensor<T>::scalar(T(1))));
    p.betas.push_back(Var<T>::parameter(Tensor<T>::scalar(T(0))));
    p.bn.emplace_back();
  }
  p.out_kernel = Var<T>::parameter(xavier_init<T>({config.width, 1}, rng));
  p.out_bias = Var<T>::parameter(Tensor<T>::scalar(T(0)));
  p.validate();
  return p;
}

namespace detail {

template <typename T>
Var<T> as_input(const Var<T>& p, Mode mode) {
  return mode == Mode::train ? p : p.detached();
}

// Inference-time normalization: running statistics when available, otherwise
// the statistics of the input itself (a single sample normalizes to zero).
template <typename T>
Var<T> infer_norm(const Var<T>& x, const Var<T>& alpha, const Var<T>& beta, BatchNormStats<T>& stats) {
  if (stats.initialized()) return adaptive_norm<T>(x, alpha, beta, StatsMode::running, &stats);
  if (x.value().rows() >= 2) return adaptive_norm<T>(x, alpha, beta, StatsMode::batch, nullptr);
  return axpby<T>(alpha, x, beta, Var<T>::constant(Tensor<T>(x.shape())));
}

}  // namespace detail

/// Output of every stage, for probes and tests.
template <typename T>
struct DenoiserTrace {
  std::vector<Var<T>> layers;  // post-LReLU activations, one per intermediate layer
  Var<T> output;
};

/// Runs the network on x (N, 1) and returns (N, 1).
///
/// Train mode normalizes with the statistics of x, updates the running
/// statistics, and records a graph through the parameters. Infer mode uses
/// the running statistics and treats parameters as constants; gradients
/// still flow to x if x requires them.
template <typename T>
DenoiserTrace<T> denoiser_trace(const Var<T>& x, DenoiserParams<T>& params, Mode mode) {
  params.validate();
  if (!x || x.value().rows() == 0) throw std::invalid_argument("denoiser_forward: empty input");
  if (x.value().cols() != 1) {
    throw std::invalid_argument("denoiser_forward: expected mono (N, 1) input, got " +
                                shape_string(x.shape()));
  }
  DenoiserTrace<T> trace;
  Var<T> h = x;
  for (std::size_t k = 0; k < params.config.layers; ++k) {
    const auto kernel = detail::as_input(params.kernels[k], mode);
    const auto alpha = detail::as_input(params.alphas[k], mode);
    const auto beta = detail::as_input(params.betas[k], mode);
    Var<T> z = conv1d_dilated<T>(h, kernel, params.config.dilation(k));
    z = mode == Mode::train ? adaptive_norm<T>(z, alpha, beta, StatsMode::batch, &params.bn[k])
                            : detail::infer_norm<T>(z, alpha, beta, params.bn[k]);
    h = lrelu<T>(z);
    trace.layers.push_back(h);
  }
  trace.output = linear<T>(h, detail::as_input(params.out_kernel, mode),
                           detail::as_input(params.out_bias, mode));
  return trace;
}

template <typename T>
Var<T> denoiser_forward(const Var<T>& x, DenoiserParams<T>& params, Mode mode) {
  return denoiser_trace(x, params, mode).output;
}

/// Convenience inference on a sample buffer.
template <typename T>
std::vector<T> denoise(std::span<const T> samples, DenoiserParams<T>& params) {
  auto y = denoiser_forward<T>(Var<T>::constant(Tensor<T>::column(samples)), params, Mode::infer);
  return y.value().storage();
}

}  // namespace sdfl
