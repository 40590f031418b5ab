#pragma once

#include "sdfl/denoiser.hpp"
#include "sdfl/featnet.hpp"
#include "sdfl/ops.hpp"
#include "sdfl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace sdfl {

/// Outcome of comparing backprop gradients with central differences.
struct GradCheckResult {
  std::string name;
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes whose +-h step crossed a kink
  std::size_t trials = 0;

  void merge(const GradCheckResult& o) {
    max_rel_error = std::max(max_rel_error, o.max_rel_error);
    checked += o.checked;
    skipped += o.skipped;
    trials += o.trials;
  }
};

/// Compares d loss / d input for every coordinate of `inputs` against
/// (f(x+h) - f(x-h)) / 2h in double precision.
///
/// The error of one coordinate is |g - fd| / max(|g|, |fd|, floor), with the
/// floor at 1e-6 * max(1, |f|) (the roundoff level of the difference
/// quotient). Probes whose perturbation changes the branch pattern of any
/// lrelu or l1 evaluation are skipped; the function is not differentiable
/// across them.
inline GradCheckResult check_gradients(const std::string& name, const std::vector<Var<double>*>& inputs,
                                       const std::function<Var<double>()>& loss_fn, double h = 1e-4) {
  GradCheckResult res;
  res.name = name;
  res.trials = 1;
  for (auto* v : inputs) v->zero_grad();
  std::vector<std::uint8_t> base_pattern;
  double f0;
  {
    BranchRecorder rec;
    const auto loss = loss_fn();
    f0 = loss.value()[0];
    backprop(loss);
    base_pattern = rec.pattern();
  }
  const double floor = 1e-6 * std::max(1.0, std::abs(f0));
  auto eval = [&](std::vector<std::uint8_t>& pattern) {
    BranchRecorder rec;
    const double f = loss_fn().value()[0];
    pattern = rec.pattern();
    return f;
  };
  for (auto* v : inputs) {
    const auto analytic = v->grad();
    auto& values = v->mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      std::vector<std::uint8_t> pp, pm;
      values[i] = orig + h;
      const double fp = eval(pp);
      values[i] = orig - h;
      const double fm = eval(pm);
      values[i] = orig;
      if (pp != base_pattern || pm != base_pattern) {
        ++res.skipped;
        continue;
      }
      const double fd = (fp - fm) / (2 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
      res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic[i] - fd) / denom);
      ++res.checked;
    }
  }
  return res;
}

namespace gradcheck_detail {

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline Var<double> param(const Shape& shape, Rng& rng) { return Var<double>::parameter(random_tensor(shape, rng)); }

}  // namespace gradcheck_detail

/// The full suite: every differentiable op and the composed denoiser losses
/// (L1, L2, feature) through a 4-layer reduced network; `trials` seeded
/// draws each.
inline std::vector<GradCheckResult> run_gradient_suite(std::size_t trials = 20, std::uint64_t seed = 0) {
  using namespace gradcheck_detail;
  using V = Var<double>;
  std::vector<GradCheckResult> out;
  std::uint64_t stream = 0;
  auto run = [&](const std::string& name, const std::function<GradCheckResult(Rng&)>& one) {
    GradCheckResult total;
    total.name = name;
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(derive_seed(seed, stream++));
      total.merge(one(rng));
    }
    out.push_back(total);
  };

  run("conv1d_dilated", [](Rng& rng) {
    const std::size_t n = 1 + rng.uniform_index(24), cin = 1 + rng.uniform_index(3),
                      cout = 1 + rng.uniform_index(3), r = std::size_t{1} << rng.uniform_index(4);
    V x = param({n, cin}, rng), k = param({3, cin, cout}, rng);
    const auto tgt = random_tensor({n, cout}, rng);
    return check_gradients("conv1d_dilated", {&x, &k}, [&] {
      return l2_loss<double>(conv1d_dilated<double>(x, k, r), V::constant(tgt));
    });
  });
  run("lrelu", [](Rng& rng) {
    V x = param({16, 2}, rng);
    const auto tgt = random_tensor({16, 2}, rng);
    return check_gradients("lrelu", {&x}, [&] { return l2_loss<double>(lrelu<double>(x), V::constant(tgt)); });
  });
  run("batch_norm[batch]", [](Rng& rng) {
    V x = param({12, 3}, rng);
    const auto tgt = random_tensor({12, 3}, rng);
    return check_gradients("batch_norm", {&x}, [&] {
      return l2_loss<double>(batch_norm<double>(x, StatsMode::batch, nullptr), V::constant(tgt));
    });
  });
  run("batch_norm[batch,affine]", [](Rng& rng) {
    V x = param({12, 3}, rng);
    BatchNormAffine<double> aff{param({3}, rng), param({3}, rng)};
    const auto tgt = random_tensor({12, 3}, rng);
    return check_gradients("batch_norm_affine", {&x, &aff.scale, &aff.shift}, [&] {
      return l2_loss<double>(batch_norm<double>(x, StatsMode::batch, nullptr, &aff), V::constant(tgt));
    });
  });
  run("batch_norm[running,affine]", [](Rng& rng) {
    V x = param({12, 3}, rng);
    BatchNormAffine<double> aff{param({3}, rng), param({3}, rng)};
    BatchNormStats<double> st{{0.1, -0.2, 0.3}, {0.5, 1.5, 2.0}};
    const auto tgt = random_tensor({12, 3}, rng);
    return check_gradients("batch_norm_running", {&x, &aff.scale, &aff.shift}, [&] {
      return l2_loss<double>(batch_norm<double>(x, StatsMode::running, &st, &aff), V::constant(tgt));
    });
  });
  run("adaptive_norm", [](Rng& rng) {
    V x = param({10, 2}, rng), a = param({1}, rng), b = param({1}, rng);
    const auto tgt = random_tensor({10, 2}, rng);
    return check_gradients("adaptive_norm", {&x, &a, &b}, [&] {
      return l2_loss<double>(adaptive_norm<double>(x, a, b, StatsMode::batch, nullptr), V::constant(tgt));
    });
  });
  run("decimate2", [](Rng& rng) {
    const std::size_t n = 1 + rng.uniform_index(15);
    V x = param({n, 2}, rng);
    const auto tgt = random_tensor({(n + 1) / 2, 2}, rng);
    return check_gradients("decimate2", {&x}, [&] { return l2_loss<double>(decimate2<double>(x), V::constant(tgt)); });
  });
  run("avg_pool_time", [](Rng& rng) {
    V x = param({9, 3}, rng);
    const auto tgt = random_tensor({1, 3}, rng);
    return check_gradients("avg_pool_time", {&x}, [&] { return l2_loss<double>(avg_pool_time<double>(x), V::constant(tgt)); });
  });
  run("linear", [](Rng& rng) {
    V x = param({7, 3}, rng), w = param({3, 4}, rng), b = param({4}, rng);
    const auto tgt = random_tensor({7, 4}, rng);
    return check_gradients("linear", {&x, &w, &b}, [&] { return l2_loss<double>(linear<double>(x, w, b), V::constant(tgt)); });
  });
  run("classify_loss[softmax]", [](Rng& rng) {
    V z = param({1, 5}, rng);
    std::vector<double> t(5, 0.0);
    t[rng.uniform_index(5)] = 1.0;
    return check_gradients("softmax_ce", {&z}, [&] { return classify_loss<double>(z, t, LabelMode::softmax); });
  });
  run("classify_loss[sigmoid]", [](Rng& rng) {
    V z = param({1, 5}, rng);
    std::vector<double> t(5);
    for (auto& v : t) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return check_gradients("sigmoid_ce", {&z}, [&] { return classify_loss<double>(z, t, LabelMode::sigmoid); });
  });
  run("l1_loss", [](Rng& rng) {
    V a = param({8, 2}, rng), b = param({8, 2}, rng);
    return check_gradients("l1_loss", {&a, &b}, [&] { return l1_loss<double>(a, b); });
  });
  run("l2_loss", [](Rng& rng) {
    V a = param({8, 2}, rng), b = param({8, 2}, rng);
    return check_gradients("l2_loss", {&a, &b}, [&] { return l2_loss<double>(a, b); });
  });

  // Composed losses through a reduced denoiser; beta is drawn away from zero
  // so the normalization path is exercised.
  auto reduced = [](Rng& rng) {
    auto p = denoiser_init<double>(rng, DenoiserConfig{3, 4});
    for (auto& a : p.alphas) a.mutable_value()[0] = rng.uniform(0.5, 1.5);
    for (auto& b : p.betas) b.mutable_value()[0] = rng.uniform(-1.0, 1.0);
    p.out_bias.mutable_value()[0] = rng.uniform(-0.1, 0.1);
    return p;
  };
  auto params_of = [](DenoiserParams<double>& p) {
    std::vector<V*> out;
    for (auto& np : p.named_parameters()) out.push_back(np.var);
    return out;
  };
  for (const char* kind : {"l1", "l2"}) {
    run(std::string("denoiser+") + kind, [&, kind](Rng& rng) {
      auto p = reduced(rng);
      const std::size_t n = 24;
      const auto x = V::constant(random_tensor({n, 1}, rng));
      const auto s = V::constant(random_tensor({n, 1}, rng));
      const bool l1 = std::string(kind) == "l1";
      return check_gradients(std::string("denoiser+") + kind, params_of(p), [&] {
        auto y = denoiser_forward<double>(x, p, Mode::train);
        return l1 ? l1_loss<double>(y, s) : l2_loss<double>(y, s);
      });
    });
  }
  run("denoiser+feature", [&](Rng& rng) {
    auto p = reduced(rng);
    std::vector<TaskSpec> tasks{{"t", 2, LabelMode::softmax}};
    auto f = featnet_init<double>(tasks, rng, FeatureNetConfig{2, 3});
    // Frozen statistics for the loss network.
    for (std::size_t m = 0; m < f.config.layers; ++m) {
      const std::size_t w = f.config.width(m + 1);
      f.bn[m].mean.assign(w, 0.0);
      f.bn[m].var.assign(w, 0.0);
      for (std::size_t j = 0; j < w; ++j) {
        f.bn[m].mean[j] = rng.uniform(-0.1, 0.1);
        f.bn[m].var[j] = rng.uniform(0.2, 1.0);
      }
    }
    const LossWeights weights{{1.0, 0.7, 1.3}, true};
    const std::size_t n = 24;
    const auto x = V::constant(random_tensor({n, 1}, rng));
    const auto s = V::constant(random_tensor({n, 1}, rng));
    return check_gradients("denoiser+feature", params_of(p), [&] {
      auto y = denoiser_forward<double>(x, p, Mode::train);
      return feature_loss<double>(s, y, f, weights).total;
    });
  });
  return out;
}

}  // namespace sdfl
