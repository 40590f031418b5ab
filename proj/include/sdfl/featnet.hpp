#pragma once

#include "sdfl/denoiser.hpp"
#include "sdfl/init.hpp"
#include "sdfl/ops.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdfl {

struct TaskSpec {
  std::string name;
  std::size_t classes = 0;
  LabelMode mode = LabelMode::softmax;

  bool operator==(const TaskSpec&) const = default;
};

struct FeatureNetConfig {
  std::size_t base_width = 32;
  std::size_t layers = 14;

  /// Width of feature layer m (1-based); doubles every 5 layers.
  std::size_t width(std::size_t m) const { return base_width << ((m - 1) / 5); }

  /// Input span that one sample of the deepest decimated layer depends on.
  std::size_t receptive_field() const { return (std::size_t{1} << (layers + 1)) - 1; }

  bool operator==(const FeatureNetConfig&) const = default;
};

/// VGG-style decimating classifier used as the loss network.
template <typename T>
struct FeatureNetParams {
  FeatureNetConfig config;
  std::vector<TaskSpec> tasks;
  std::vector<Var<T>> kernels;    // (3, W_{m-1}, W_m)
  std::vector<Var<T>> bn_scale;   // (W_m)
  std::vector<Var<T>> bn_shift;   // (W_m)
  std::vector<BatchNormStats<T>> bn;
  std::vector<Var<T>> head_weights;  // (W_L, C_p)
  std::vector<Var<T>> head_biases;   // (C_p)

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("FeatureNetParams: " + m); };
    const auto& c = config;
    if (c.layers == 0 || c.base_width == 0) fail("empty architecture");
    if (kernels.size() != c.layers || bn_scale.size() != c.layers ||
        bn_shift.size() != c.layers || bn.size() != c.layers) {
      fail("layer count mismatch");
    }
    for (std::size_t m = 1; m <= c.layers; ++m) {
      const std::size_t cin = m == 1 ? 1 : c.width(m - 1);
      if (!kernels[m - 1] || kernels[m - 1].shape() != Shape{3, cin, c.width(m)}) {
        fail("kernel of layer " + std::to_string(m) + " has wrong shape");
      }
      if (bn_scale[m - 1].size() != c.width(m) || bn_shift[m - 1].size() != c.width(m)) {
        fail("normalization affine of layer " + std::to_string(m) + " has wrong width");
      }
    }
    if (tasks.empty()) fail("no tasks");
    if (head_weights.size() != tasks.size() || head_biases.size() != tasks.size()) {
      fail("head count mismatch");
    }
    for (std::size_t p = 0; p < tasks.size(); ++p) {
      if (head_weights[p].shape() != Shape{c.width(c.layers), tasks[p].classes} ||
          head_biases[p].size() != tasks[p].classes) {
        fail("head " + std::to_string(p) + " has wrong shape");
      }
    }
  }

  std::vector<NamedParam<T>> shared_parameters() {
    std::vector<NamedParam<T>> out;
    for (std::size_t m = 0; m < config.layers; ++m) {
      const std::string p = "layer" + std::to_string(m + 1) + ".";
      out.push_back({p + "kernel", &kernels[m]});
      out.push_back({p + "bn_scale", &bn_scale[m]});
      out.push_back({p + "bn_shift", &bn_shift[m]});
    }
    return out;
  }

  std::vector<NamedParam<T>> head_parameters(std::size_t task) {
    const std::string p = "head" + std::to_string(task) + ".";
    return {{p + "weights", &head_weights.at(task)}, {p + "bias", &head_biases.at(task)}};
  }

  std::vector<NamedParam<T>> named_parameters() {
    auto out = shared_parameters();
    for (std::size_t p = 0; p < tasks.size(); ++p) {
      for (auto& h : head_parameters(p)) out.push_back(h);
    }
    return out;
  }
};

template <typename T>
FeatureNetParams<T> featnet_init(const std::vector<TaskSpec>& tasks, Rng& rng,
                                 FeatureNetConfig config = {}) {
  if (tasks.empty()) throw std::invalid_argument("featnet_init: at least one task is required");
  for (const auto& t : tasks) {
    if (t.classes == 0) throw std::invalid_argument("featnet_init: task '" + t.name + "' has no classes");
  }
  FeatureNetParams<T> p;
  p.config = config;
  p.tasks = tasks;
  for (std::size_t m = 1; m <= config.layers; ++m) {
    const std::size_t cin = m == 1 ? 1 : config.width(m - 1);
    const std::size_t w = config.width(m);
    p.kernels.push_back(Var<T>::parameter(xavier_init<T>({3, cin, w}, rng)));
    p.bn_scale.push_back(Var<T>::parameter(Tensor<T>({w}, T(1))));
    p.bn_shift.push_back(Var<T>::parameter(Tensor<T>({w}, T(0))));
    p.bn.emplace_back();
  }
  const std::size_t top = config.width(config.layers);
  for (const auto& t : tasks) {
    p.head_weights.push_back(Var<T>::parameter(xavier_init<T>({top, t.classes}, rng)));
    p.head_biases.push_back(Var<T>::parameter(Tensor<T>({t.classes}, T(0))));
  }
  p.validate();
  return p;
}

/// Feature layers of one forward pass.
template <typename T>
struct FeatureStack {
  std::vector<Var<T>> layers;  // decimated outputs, layer m at index m-1
  Var<T> top_undecimated;      // last computed layer before decimation
};

/// Computes layers 1..depth on x (N, 1). Layer m has ceil(N / 2^m) rows.
///
/// Frozen mode normalizes with running statistics and treats parameters as
/// constants; gradients still reach x when x requires them.
template <typename T>
FeatureStack<T> feature_forward(const Var<T>& x, FeatureNetParams<T>& params, std::size_t depth,
                                Mode mode) {
  params.validate();
  if (depth < 1 || depth > params.config.layers) {
    throw std::invalid_argument("feature_forward: depth " + std::to_string(depth) +
                                " outside [1, " + std::to_string(params.config.layers) + "]");
  }
  if (!x || x.value().rows() == 0) throw std::invalid_argument("feature_forward: empty input");
  if (x.value().cols() != 1) throw std::invalid_argument("feature_forward: expected (N, 1) input");

  FeatureStack<T> out;
  Var<T> h = x;
  for (std::size_t m = 0; m < depth; ++m) {
    const BatchNormAffine<T> affine{detail::as_input(params.bn_scale[m], mode),
                                    detail::as_input(params.bn_shift[m], mode)};
    Var<T> z = conv1d_dilated<T>(h, detail::as_input(params.kernels[m], mode), 1);
    z = batch_norm<T>(z, mode == Mode::train ? StatsMode::batch : StatsMode::running,
                      &params.bn[m], &affine);
    z = lrelu<T>(z);
    if (m + 1 == depth) out.top_undecimated = z;
    h = decimate2<T>(z);
    out.layers.push_back(h);
  }
  return out;
}

/// Logits (1, C_p) of task p from the pooled top layer.
template <typename T>
Var<T> classify_logits(const Var<T>& x, FeatureNetParams<T>& params, std::size_t task, Mode mode) {
  if (task >= params.tasks.size()) {
    throw std::invalid_argument("classify: unknown task " + std::to_string(task));
  }
  const auto stack = feature_forward<T>(x, params, params.config.layers, mode);
  const auto pooled = avg_pool_time<T>(stack.top_undecimated);
  return linear<T>(pooled, detail::as_input(params.head_weights[task], mode),
                   detail::as_input(params.head_biases[task], mode));
}

template <typename T>
std::vector<T> probabilities(std::span<const T> logits, LabelMode mode) {
  if (mode == LabelMode::softmax) return softmax<T>(logits);
  std::vector<T> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(logits[i]);
  return p;
}

/// Class probabilities of task p for a waveform (frozen statistics).
template <typename T>
std::vector<T> classify(std::span<const T> samples, FeatureNetParams<T>& params, std::size_t task) {
  const auto logits =
      classify_logits<T>(Var<T>::constant(Tensor<T>::column(samples)), params, task, Mode::frozen);
  return probabilities<T>(logits.value().values(), params.tasks[task].mode);
}

// ---------------------------------------------------------------------------
// Deep feature loss

struct LossWeights {
  std::vector<double> lambda;
  bool calibrated = false;

  /// Uncalibrated weights: all ones over the first `depth` layers.
  static LossWeights ones(std::size_t depth) { return {std::vector<double>(depth, 1.0), false}; }

  std::size_t depth() const { return lambda.size(); }
  bool operator==(const LossWeights&) const = default;
};

template <typename T>
struct FeatureLoss {
  Var<T> total;
  std::vector<double> terms;  // unweighted per-layer L1 distances
};

/// sum_m lambda_m * |Phi^m(s) - Phi^m(y)|_1 over the first weights.depth()
/// layers, with the loss network frozen.
template <typename T>
FeatureLoss<T> feature_loss(const Var<T>& s, const Var<T>& y, FeatureNetParams<T>& params,
                            const LossWeights& weights) {
  if (s.shape() != y.shape()) {
    throw std::invalid_argument("feature_loss: length mismatch " + shape_string(s.shape()) +
                                " vs " + shape_string(y.shape()));
  }
  const std::size_t depth = weights.depth();
  if (depth < 1 || depth > params.config.layers) {
    throw std::invalid_argument("feature_loss: depth out of range");
  }
  for (double l : weights.lambda) {
    if (!(l >= 0) || !std::isfinite(l)) throw std::invalid_argument("feature_loss: bad weight");
  }
  const auto ref = feature_forward<T>(s.detached(), params, depth, Mode::frozen);
  const auto est = feature_forward<T>(y, params, depth, Mode::frozen);
  FeatureLoss<T> out;
  for (std::size_t m = 0; m < depth; ++m) {
    const auto term = l1_loss<T>(ref.layers[m], est.layers[m]);
    out.terms.push_back(static_cast<double>(term.value()[0]));
    const auto weighted = scale<T>(term, static_cast<T>(weights.lambda[m]));
    out.total = m == 0 ? weighted : add<T>(out.total, weighted);
  }
  return out;
}

/// Balances the layers: lambda_m = mean(T) / T_m, so every lambda_m * T_m
/// equals mean(T) on the calibration snapshot.
inline LossWeights calibrate_lambda(std::span<const double> term_sums) {
  if (term_sums.empty()) throw std::invalid_argument("calibrate_lambda: no terms");
  for (std::size_t m = 0; m < term_sums.size(); ++m) {
    if (!(term_sums[m] > 0) || !std::isfinite(term_sums[m])) {
      throw std::invalid_argument("calibrate_lambda: term " + std::to_string(m + 1) +
                                  " is not positive (dead layer or empty epoch)");
    }
  }
  const double mean = std::accumulate(term_sums.begin(), term_sums.end(), 0.0) /
                      static_cast<double>(term_sums.size());
  LossWeights w;
  for (double t : term_sums) w.lambda.push_back(mean / t);
  w.calibrated = true;
  return w;
}

}  // namespace sdfl
