#pragma once

#include "sdfl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdfl {

namespace detail {

// Records the branch taken at every non-smooth point evaluated while set.
// Finite-difference checks use it to reject probes that straddle a kink.
inline thread_local std::vector<std::uint8_t>* branch_log = nullptr;

inline void log_branch(bool b) {
  if (branch_log) branch_log->push_back(b ? 1 : 0);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace detail

/// Scoped capture of the branch pattern of lrelu/l1 evaluations.
class BranchRecorder {
 public:
  BranchRecorder() : previous_(detail::branch_log) { detail::branch_log = &log_; }
  ~BranchRecorder() { detail::branch_log = previous_; }
  BranchRecorder(const BranchRecorder&) = delete;
  BranchRecorder& operator=(const BranchRecorder&) = delete;
  const std::vector<std::uint8_t>& pattern() const { return log_; }

 private:
  std::vector<std::uint8_t> log_;
  std::vector<std::uint8_t>* previous_;
};

// ---------------------------------------------------------------------------
// Dilated 3-tap convolution

/// out[n, o] = sum_{m=-1..1} sum_i K[m+1, i, o] * in[n - r*m, i], with
/// out-of-range input samples read as zero. Output length equals N.
template <typename T>
Var<T> conv1d_dilated(const Var<T>& input, const Var<T>& kernels, std::size_t dilation) {
  detail::require(dilation >= 1, "conv1d_dilated: dilation must be >= 1");
  const auto& x = input.value();
  const auto& k = kernels.value();
  detail::require(x.rank() == 1 || x.rank() == 2,
                  "conv1d_dilated: input must be (N, C), got " + shape_string(x.shape()));
  detail::require(k.rank() == 3 && k.shape()[0] == 3,
                  "conv1d_dilated: kernels must be (3, C_in, C_out), got " +
                      shape_string(k.shape()));
  const std::size_t n = x.rows();
  const std::size_t cin = x.cols();
  const std::size_t cout = k.shape()[2];
  detail::require(n >= 1, "conv1d_dilated: empty input");
  detail::require(k.shape()[1] == cin, "conv1d_dilated: kernel expects " +
                                           std::to_string(k.shape()[1]) +
                                           " input channels, input has " + std::to_string(cin));

  const auto N = static_cast<std::ptrdiff_t>(n);
  const auto r = static_cast<std::ptrdiff_t>(dilation);
  // Valid output row range [lo, hi) for tap offset s: input row = out row - s.
  auto span_for = [N](std::ptrdiff_t s) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, s);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(N, N + s);
    return std::pair{lo, hi};
  };

  Tensor<T> out({n, cout});
  {
    auto in_m = as_matrix(x.data(), n, cin);
    auto out_m = as_matrix(out.data(), n, cout);
    for (std::ptrdiff_t tap = 0; tap < 3; ++tap) {
      const std::ptrdiff_t s = r * (tap - 1);
      const auto [lo, hi] = span_for(s);
      if (hi <= lo) continue;
      auto k_m = as_matrix(k.data() + tap * cin * cout, cin, cout);
      out_m.middleRows(lo, hi - lo).noalias() += in_m.middleRows(lo - s, hi - lo) * k_m;
    }
  }

  return make_result<T>(
      "conv1d_dilated", std::move(out), {input.shared(), kernels.shared()},
      [n, cin, cout, r, span_for](detail::Node<T>& self) {
        auto& in_node = *self.parents[0];
        auto& k_node = *self.parents[1];
        auto dout = as_matrix(static_cast<const T*>(self.grad.data()), n, cout);
        for (std::ptrdiff_t tap = 0; tap < 3; ++tap) {
          const std::ptrdiff_t s = r * (tap - 1);
          const auto [lo, hi] = span_for(s);
          if (hi <= lo) continue;
          if (in_node.requires_grad) {
            auto din = as_matrix(in_node.ensure_grad().data(), n, cin);
            auto k_m = as_matrix(static_cast<const T*>(k_node.value.data()) + tap * cin * cout,
                                 cin, cout);
            din.middleRows(lo - s, hi - lo).noalias() +=
                dout.middleRows(lo, hi - lo) * k_m.transpose();
          }
          if (k_node.requires_grad) {
            auto dk = as_matrix(k_node.ensure_grad().data() + tap * cin * cout, cin, cout);
            auto in_m = as_matrix(static_cast<const T*>(in_node.value.data()), n, cin);
            dk.noalias() += in_m.middleRows(lo - s, hi - lo).transpose() *
                            dout.middleRows(lo, hi - lo);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Pointwise

inline constexpr double kLeakySlope = 0.2;

/// max(0.2 x, x). The derivative at exactly 0 is taken as 1.
template <typename T>
Var<T> lrelu(const Var<T>& x) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  const T slope = static_cast<T>(kLeakySlope);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    out[i] = v >= T(0) ? v : slope * v;
    detail::log_branch(v >= T(0));
  }
  return make_result<T>("lrelu", std::move(out), {x.shared()}, [slope](detail::Node<T>& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += p.value[i] >= T(0) ? self.grad[i] : slope * self.grad[i];
    }
  });
}

/// a * x + b * y with learned scalars a, b.
template <typename T>
Var<T> axpby(const Var<T>& a, const Var<T>& x, const Var<T>& b, const Var<T>& y) {
  detail::require(a.size() == 1 && b.size() == 1, "axpby: weights must be scalars");
  detail::require(x.shape() == y.shape(), "axpby: shape mismatch " + shape_string(x.shape()) +
                                              " vs " + shape_string(y.shape()));
  const T av = a.value()[0];
  const T bv = b.value()[0];
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  const auto& yv = y.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av * xv[i] + bv * yv[i];
  return make_result<T>(
      "axpby", std::move(out), {a.shared(), x.shared(), b.shared(), y.shared()},
      [](detail::Node<T>& self) {
        auto& a = *self.parents[0];
        auto& x = *self.parents[1];
        auto& b = *self.parents[2];
        auto& y = *self.parents[3];
        const auto& g = self.grad;
        if (x.requires_grad) {
          auto& gx = x.ensure_grad();
          const T av = a.value[0];
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += av * g[i];
        }
        if (y.requires_grad) {
          auto& gy = y.ensure_grad();
          const T bv = b.value[0];
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] += bv * g[i];
        }
        if (a.requires_grad) {
          T acc = 0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x.value[i];
          a.ensure_grad()[0] += acc;
        }
        if (b.requires_grad) {
          T acc = 0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * y.value[i];
          b.ensure_grad()[0] += acc;
        }
      });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require(a.shape() == b.shape(), "add: shape mismatch");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>("add", std::move(out), {a.shared(), b.shared()},
                        [](detail::Node<T>& self) {
                          for (auto& p : self.parents) {
                            if (!p->requires_grad) continue;
                            auto& g = p->ensure_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                          }
                        });
}

/// Multiplication by a constant.
template <typename T>
Var<T> scale(const Var<T>& x, T c) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.value()[i];
  return make_result<T>("scale", std::move(out), {x.shared()}, [c](detail::Node<T>& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T acc = 0;
  for (T v : x.value().values()) acc += v;
  return make_result<T>("sum", Tensor<T>::scalar(acc), {x.shared()},
                        [](detail::Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (auto& v : g) v += self.grad[0];
                        });
}

// ---------------------------------------------------------------------------
// Batch normalization over the time axis

enum class StatsMode { batch, running };

/// Per-channel running statistics. Empty until the first batch-mode pass.
template <typename T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;

  bool initialized() const { return !mean.empty(); }
  bool operator==(const BatchNormStats&) const = default;
};

template <typename T>
struct BatchNormAffine {
  Var<T> scale;  // (C)
  Var<T> shift;  // (C)
};

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.99;
};

/// Normalizes each channel of x (N, C) to zero mean and unit variance.
///
/// Batch mode uses the biased statistics of the current input and, when
/// `stats` is given, folds them into the running averages (the first batch
/// initializes them directly). Running mode reads `stats` and leaves them
/// untouched.
template <typename T>
Var<T> batch_norm(const Var<T>& x, StatsMode mode, BatchNormStats<T>* stats,
                  const BatchNormAffine<T>* affine = nullptr, BatchNormOptions opt = {}) {
  const auto& xv = x.value();
  detail::require(xv.rank() == 2 || xv.rank() == 1,
                  "batch_norm: input must be (N, C), got " + shape_string(xv.shape()));
  detail::require(opt.eps > 0, "batch_norm: eps must be positive");
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  if (affine) {
    detail::require(affine->scale.size() == c && affine->shift.size() == c,
                    "batch_norm: affine parameters do not match channel count");
  }

  std::vector<T> mean(c, T(0)), var(c, T(0));
  if (mode == StatsMode::batch) {
    detail::require(n >= 2, "batch_norm: batch statistics need at least 2 samples, got " +
                                std::to_string(n));
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < c; ++j) mean[j] += xv[t * c + j];
    for (auto& m : mean) m /= static_cast<T>(n);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < c; ++j) {
        const T d = xv[t * c + j] - mean[j];
        var[j] += d * d;
      }
    for (auto& v : var) v /= static_cast<T>(n);
    if (stats) {
      if (!stats->initialized()) {
        stats->mean = mean;
        stats->var = var;
      } else {
        detail::require(stats->mean.size() == c, "batch_norm: running stats channel mismatch");
        const T mom = static_cast<T>(opt.momentum);
        for (std::size_t j = 0; j < c; ++j) {
          stats->mean[j] = mom * stats->mean[j] + (T(1) - mom) * mean[j];
          stats->var[j] = mom * stats->var[j] + (T(1) - mom) * var[j];
        }
      }
    }
  } else {
    if (!stats || !stats->initialized()) {
      throw std::invalid_argument("batch_norm: running mode requested with uninitialized stats");
    }
    detail::require(stats->mean.size() == c && stats->var.size() == c,
                    "batch_norm: running stats channel mismatch");
    mean = stats->mean;
    var = stats->var;
  }

  std::vector<T> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = T(1) / std::sqrt(var[j] + static_cast<T>(opt.eps));

  Tensor<T> xhat(xv.shape());
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < c; ++j) xhat[t * c + j] = (xv[t * c + j] - mean[j]) * inv_std[j];

  Tensor<T> out = xhat;
  std::vector<std::shared_ptr<detail::Node<T>>> parents{x.shared()};
  if (affine) {
    const auto& g = affine->scale.value();
    const auto& b = affine->shift.value();
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < c; ++j) out[t * c + j] = g[j] * xhat[t * c + j] + b[j];
    parents.push_back(affine->scale.shared());
    parents.push_back(affine->shift.shared());
  }

  const bool batch = mode == StatsMode::batch;
  const bool has_affine = affine != nullptr;
  return make_result<T>(
      "batch_norm", std::move(out), std::move(parents),
      [n, c, batch, has_affine, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        const auto& dy = self.grad;
        // Gradient w.r.t. the normalized value.
        std::vector<T> dxhat(dy.begin(), dy.end());
        if (has_affine) {
          auto& sn = *self.parents[1];
          auto& bn = *self.parents[2];
          for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 0; j < c; ++j) dxhat[t * c + j] *= sn.value[j];
          if (sn.requires_grad) {
            auto& gs = sn.ensure_grad();
            for (std::size_t t = 0; t < n; ++t)
              for (std::size_t j = 0; j < c; ++j) gs[j] += dy[t * c + j] * xhat[t * c + j];
          }
          if (bn.requires_grad) {
            auto& gb = bn.ensure_grad();
            for (std::size_t t = 0; t < n; ++t)
              for (std::size_t j = 0; j < c; ++j) gb[j] += dy[t * c + j];
          }
        }
        if (!xn.requires_grad) return;
        auto& gx = xn.ensure_grad();
        if (!batch) {
          for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 0; j < c; ++j) gx[t * c + j] += dxhat[t * c + j] * inv_std[j];
          return;
        }
        std::vector<T> mean_d(c, T(0)), mean_dx(c, T(0));
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < c; ++j) {
            mean_d[j] += dxhat[t * c + j];
            mean_dx[j] += dxhat[t * c + j] * xhat[t * c + j];
          }
        for (std::size_t j = 0; j < c; ++j) {
          mean_d[j] /= static_cast<T>(n);
          mean_dx[j] /= static_cast<T>(n);
        }
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t j = 0; j < c; ++j) {
            const std::size_t i = t * c + j;
            gx[i] += inv_std[j] * (dxhat[i] - mean_d[j] - xhat[i] * mean_dx[j]);
          }
      });
}

/// alpha * x + beta * BN(x), with scalar learned alpha and beta and no
/// per-channel affine inside the normalization.
template <typename T>
Var<T> adaptive_norm(const Var<T>& x, const Var<T>& alpha, const Var<T>& beta, StatsMode mode,
                     BatchNormStats<T>* stats, BatchNormOptions opt = {}) {
  return axpby(alpha, x, beta, batch_norm<T>(x, mode, stats, nullptr, opt));
}

// ---------------------------------------------------------------------------
// Resampling and pooling

/// Keeps rows 0, 2, 4, ...; output has ceil(N/2) rows.
template <typename T>
Var<T> decimate2(const Var<T>& x) {
  const auto& xv = x.value();
  detail::require(xv.rows() >= 1, "decimate2: empty input");
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  const std::size_t m = (n + 1) / 2;
  Shape shape = xv.shape();
  shape[0] = m;
  Tensor<T> out(shape);
  for (std::size_t t = 0; t < m; ++t)
    std::copy_n(xv.data() + 2 * t * c, c, out.data() + t * c);
  return make_result<T>("decimate2", std::move(out), {x.shared()},
                        [m, c](detail::Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t t = 0; t < m; ++t)
                            for (std::size_t j = 0; j < c; ++j)
                              g[2 * t * c + j] += self.grad[t * c + j];
                        });
}

/// Per-channel mean over time: (N, C) -> (1, C).
template <typename T>
Var<T> avg_pool_time(const Var<T>& x) {
  const auto& xv = x.value();
  detail::require(xv.rows() >= 1, "avg_pool_time: empty input");
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  Tensor<T> out({1, c});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[t * c + j];
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<T>(n);
  return make_result<T>("avg_pool_time", std::move(out), {x.shared()},
                        [n, c](detail::Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          const T w = T(1) / static_cast<T>(n);
                          for (std::size_t t = 0; t < n; ++t)
                            for (std::size_t j = 0; j < c; ++j) g[t * c + j] += w * self.grad[j];
                        });
}

/// Per-row affine map: x (N, C_in) * W (C_in, C_out) + b (C_out).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weights, const Var<T>& bias) {
  const auto& xv = x.value();
  const auto& w = weights.value();
  detail::require(w.rank() == 2, "linear: weights must be (C_in, C_out)");
  const std::size_t n = xv.rows();
  const std::size_t cin = xv.cols();
  const std::size_t cout = w.shape()[1];
  detail::require(w.shape()[0] == cin, "linear: weights expect " + std::to_string(w.shape()[0]) +
                                           " inputs, got " + std::to_string(cin));
  detail::require(bias.size() == cout, "linear: bias size " + std::to_string(bias.size()) +
                                           " != output width " + std::to_string(cout));
  Tensor<T> out({n, cout});
  auto out_m = as_matrix(out.data(), n, cout);
  out_m.noalias() = as_matrix(xv.data(), n, cin) * as_matrix(w.data(), cin, cout);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < cout; ++j) out[t * cout + j] += bias.value()[j];
  return make_result<T>(
      "linear", std::move(out), {x.shared(), weights.shared(), bias.shared()},
      [n, cin, cout](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        auto dout = as_matrix(static_cast<const T*>(self.grad.data()), n, cout);
        if (xn.requires_grad) {
          as_matrix(xn.ensure_grad().data(), n, cin).noalias() +=
              dout * as_matrix(static_cast<const T*>(wn.value.data()), cin, cout).transpose();
        }
        if (wn.requires_grad) {
          as_matrix(wn.ensure_grad().data(), cin, cout).noalias() +=
              as_matrix(static_cast<const T*>(xn.value.data()), n, cin).transpose() * dout;
        }
        if (bn.requires_grad) {
          auto& gb = bn.ensure_grad();
          for (std::size_t t = 0; t < n; ++t)
            for (std::size_t j = 0; j < cout; ++j) gb[j] += self.grad[t * cout + j];
        }
      });
}

// ---------------------------------------------------------------------------
// Losses

enum class LabelMode { softmax, sigmoid };

inline const char* to_string(LabelMode m) { return m == LabelMode::softmax ? "softmax" : "sigmoid"; }

template <typename T>
std::vector<T> softmax(std::span<const T> z) {
  std::vector<T> p(z.size());
  if (z.empty()) return p;
  const T mx = *std::max_element(z.begin(), z.end());
  T s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (auto& v : p) v /= s;
  return p;
}

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

/// Cross-entropy of softmax (one-hot target) or per-class sigmoid
/// (binary target vector) applied to a (1, C) logit row.
template <typename T>
Var<T> classify_loss(const Var<T>& logits, std::span<const T> target, LabelMode mode) {
  const auto& z = logits.value();
  const std::size_t c = z.size();
  detail::require(target.size() == c, "classify_loss: target has " +
                                          std::to_string(target.size()) + " entries, logits " +
                                          std::to_string(c));
  for (T t : target) {
    detail::require(t == T(0) || t == T(1), "classify_loss: targets must be 0 or 1");
  }
  T loss = 0;
  std::vector<T> dz(c);
  if (mode == LabelMode::softmax) {
    std::size_t ones = 0;
    for (T t : target) ones += t == T(1);
    detail::require(ones == 1, "classify_loss: softmax target must be one-hot");
    const T mx = *std::max_element(z.values().begin(), z.values().end());
    T s = 0;
    for (std::size_t i = 0; i < c; ++i) s += std::exp(z[i] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t i = 0; i < c; ++i) {
      loss += target[i] * (lse - z[i]);
      dz[i] = std::exp(z[i] - lse) - target[i];
    }
  } else {
    for (std::size_t i = 0; i < c; ++i) {
      // softplus(z) - t*z, evaluated without overflow.
      const T zi = z[i];
      loss += std::max(zi, T(0)) - target[i] * zi + std::log1p(std::exp(-std::abs(zi)));
      dz[i] = sigmoid(zi) - target[i];
    }
  }
  return make_result<T>("classify_loss", Tensor<T>::scalar(loss), {logits.shared()},
                        [dz = std::move(dz)](detail::Node<T>& self) {
                          auto& g = self.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * dz[i];
                        });
}

/// Unnormalized sum |a - b|. Subgradient 0 at ties.
template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
  detail::require(a.shape() == b.shape(), "l1_loss: shape mismatch " + shape_string(a.shape()) +
                                              " vs " + shape_string(b.shape()));
  T acc = 0;
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < av.size(); ++i) {
    acc += std::abs(av[i] - bv[i]);
    detail::log_branch(av[i] > bv[i]);
    detail::log_branch(av[i] < bv[i]);
  }
  return make_result<T>("l1_loss", Tensor<T>::scalar(acc), {a.shared(), b.shared()},
                        [](detail::Node<T>& self) {
                          auto& an = *self.parents[0];
                          auto& bn = *self.parents[1];
                          const T g = self.grad[0];
                          auto sgn = [](T d) { return T((d > T(0)) - (d < T(0))); };
                          if (an.requires_grad) {
                            auto& ga = an.ensure_grad();
                            for (std::size_t i = 0; i < ga.size(); ++i)
                              ga[i] += g * sgn(an.value[i] - bn.value[i]);
                          }
                          if (bn.requires_grad) {
                            auto& gb = bn.ensure_grad();
                            for (std::size_t i = 0; i < gb.size(); ++i)
                              gb[i] -= g * sgn(an.value[i] - bn.value[i]);
                          }
                        });
}

/// Unnormalized sum (a - b)^2.
template <typename T>
Var<T> l2_loss(const Var<T>& a, const Var<T>& b) {
  detail::require(a.shape() == b.shape(), "l2_loss: shape mismatch " + shape_string(a.shape()) +
                                              " vs " + shape_string(b.shape()));
  T acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a.value()[i] - b.value()[i];
    acc += d * d;
  }
  return make_result<T>("l2_loss", Tensor<T>::scalar(acc), {a.shared(), b.shared()},
                        [](detail::Node<T>& self) {
                          auto& an = *self.parents[0];
                          auto& bn = *self.parents[1];
                          const T g = self.grad[0];
                          if (an.requires_grad) {
                            auto& ga = an.ensure_grad();
                            for (std::size_t i = 0; i < ga.size(); ++i)
                              ga[i] += T(2) * g * (an.value[i] - bn.value[i]);
                          }
                          if (bn.requires_grad) {
                            auto& gb = bn.ensure_grad();
                            for (std::size_t i = 0; i < gb.size(); ++i)
                              gb[i] -= T(2) * g * (an.value[i] - bn.value[i]);
                          }
                        });
}

}  // namespace sdfl
