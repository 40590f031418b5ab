#include "oracles.hpp"

#include "sdfl/denoiser.hpp"
#include "sdfl/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace sdfl;

namespace {

template <typename T>
void set_stats(DenoiserParams<T>& p, Rng& rng) {
  for (auto& st : p.bn) {
    st.mean.resize(p.config.width);
    st.var.resize(p.config.width);
    for (auto& m : st.mean) m = static_cast<T>(rng.uniform(-0.1, 0.1));
    for (auto& v : st.var) v = static_cast<T>(rng.uniform(0.5, 2.0));
  }
}

template <typename T>
void randomize_norm(DenoiserParams<T>& p, Rng& rng) {
  for (auto& a : p.alphas) a.mutable_value()[0] = static_cast<T>(rng.uniform(0.5, 1.5));
  for (auto& b : p.betas) b.mutable_value()[0] = static_cast<T>(rng.uniform(-1, 1));
}

std::vector<double> random_signal(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1, 1);
  return x;
}

/// First and last time index where two (N, C) buffers differ.
std::pair<long, long> support(const std::vector<double>& a, const std::vector<double>& b, std::size_t c = 1) {
  long lo = -1, hi = -1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      const long t = static_cast<long>(i / c);
      if (lo < 0) lo = t;
      hi = t;
    }
  }
  return {lo, hi};
}

}  // namespace

TEST(DenoiserConfig, DilationLadder) {
  DenoiserConfig c;
  EXPECT_EQ(c.layers, 14u);
  EXPECT_EQ(c.width, 64u);
  for (std::size_t k = 0; k < 13; ++k) EXPECT_EQ(c.dilation(k), std::size_t{1} << k);
  EXPECT_EQ(c.dilation(13), 1u);
  EXPECT_EQ(c.receptive_field(), 16385u);
  const DenoiserConfig small{8, 4};
  EXPECT_EQ(small.dilation(3), 1u);
  EXPECT_EQ(small.receptive_field(), 17u);
}

TEST(DenoiserInit, Values) {
  Rng rng(0);
  auto p = denoiser_init<float>(rng);
  ASSERT_EQ(p.kernels.size(), 14u);
  EXPECT_EQ(p.kernels[0].shape(), (Shape{3, 1, 64}));
  EXPECT_EQ(p.kernels[13].shape(), (Shape{3, 64, 64}));
  for (const auto& a : p.alphas) EXPECT_EQ(a.value()[0], 1.0f);
  for (const auto& b : p.betas) EXPECT_EQ(b.value()[0], 0.0f);
  EXPECT_EQ(p.out_bias.value()[0], 0.0f);
  EXPECT_EQ(p.out_kernel.shape(), (Shape{64, 1}));
  for (const auto& st : p.bn) EXPECT_FALSE(st.initialized());
  EXPECT_EQ(p.named_parameters().size(), 14u * 3 + 2);
}

TEST(DenoiserInit, Deterministic) {
  Rng a(42), b(42);
  auto p = denoiser_init<float>(a, {8, 5});
  auto q = denoiser_init<float>(b, {8, 5});
  auto pp = p.named_parameters(), qq = q.named_parameters();
  for (std::size_t i = 0; i < pp.size(); ++i) EXPECT_EQ(pp[i].var->value(), qq[i].var->value()) << pp[i].name;
}

TEST(DenoiserForward, ZeroKernelsGiveBias) {
  Rng rng(1);
  auto p = denoiser_init<float>(rng, {8, 4});
  for (auto& k : p.kernels) k.mutable_value() = Tensor<float>(k.shape());
  p.out_kernel.mutable_value() = Tensor<float>(p.out_kernel.shape());
  p.out_bias.mutable_value()[0] = 0.25f;
  std::vector<float> x(50);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (Mode mode : {Mode::train, Mode::infer}) {
    const auto y = denoiser_forward<float>(Var<float>::constant(Tensor<float>::column(x)), p, mode);
    for (float v : y.value().values()) EXPECT_EQ(v, 0.25f);
  }
}

TEST(DenoiserForward, ShortInputKeepsLength) {
  Rng rng(2);
  auto p = denoiser_init<float>(rng);
  const std::vector<float> x(100, 0.1f);
  EXPECT_EQ(denoiser_forward<float>(Var<float>::constant(Tensor<float>::column(x)), p, Mode::train).value().rows(), 100u);
  EXPECT_EQ(denoise<float>(x, p).size(), 100u);
  const std::vector<float> one{0.3f};
  EXPECT_EQ(denoise<float>(one, p).size(), 1u);
}

TEST(DenoiserForward, Errors) {
  Rng rng(3);
  auto p = denoiser_init<float>(rng, {4, 2});
  EXPECT_THROW(denoiser_forward<float>(Var<float>::constant(Tensor<float>({0, 1})), p, Mode::train), std::invalid_argument);
  EXPECT_THROW(denoiser_forward<float>(Var<float>::constant(Tensor<float>({5, 2})), p, Mode::train), std::invalid_argument);
  p.kernels[1] = Var<float>::parameter(Tensor<float>({3, 4, 5}));
  EXPECT_THROW(denoiser_forward<float>(Var<float>::constant(Tensor<float>({5, 1})), p, Mode::train), std::invalid_argument);
}

TEST(DenoiserForward, TrainModeUpdatesRunningStats) {
  Rng rng(4);
  auto p = denoiser_init<float>(rng, {4, 3});
  std::vector<float> x(64);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  denoiser_forward<float>(Var<float>::constant(Tensor<float>::column(x)), p, Mode::train);
  for (const auto& st : p.bn) EXPECT_TRUE(st.initialized());
  const auto before = p.bn;
  denoise<float>(x, p);
  EXPECT_EQ(p.bn, before);
}

TEST(DenoiserForward, ReducedReceptiveField) {
  Rng rng(5);
  auto p = denoiser_init<double>(rng, {3, 4});
  randomize_norm(p, rng);
  set_stats(p, rng);
  const std::size_t n = 80, i = 40;
  auto x = random_signal(n, rng);
  const auto y0 = denoise<double>(x, p);
  x[i] += 1.0;
  const auto y1 = denoise<double>(x, p);
  const auto [lo, hi] = support(y0, y1);
  EXPECT_EQ(lo, 40 - 8);
  EXPECT_EQ(hi, 40 + 8);
}

TEST(DenoiserForward, ImpulseSupportGrowsPerLayer) {
  Rng rng(6);
  auto p = denoiser_init<double>(rng, {3, 14});
  randomize_norm(p, rng);
  set_stats(p, rng);
  const std::size_t n = 20000, i = 10000;
  auto x = random_signal(n, rng);
  const auto t0 = denoiser_trace<double>(Var<double>::constant(Tensor<double>::column(x)), p, Mode::infer);
  x[i] += 1.0;
  const auto t1 = denoiser_trace<double>(Var<double>::constant(Tensor<double>::column(x)), p, Mode::infer);
  for (std::size_t k = 0; k < 14; ++k) {
    const auto [lo, hi] = support(t0.layers[k].value().storage(), t1.layers[k].value().storage(), 3);
    // one-sided context after layer k: 2^k - 1 for k <= 13, then +1
    const long reach = k < 13 ? (1L << (k + 1)) - 1 : (1L << 13);
    EXPECT_EQ(lo, static_cast<long>(i) - reach) << "layer " << k + 1;
    EXPECT_EQ(hi, static_cast<long>(i) + reach) << "layer " << k + 1;
  }
}

TEST(DenoiserForward, InitLayersAreNormalizationFree) {
  Rng rng(7);
  auto p = denoiser_init<double>(rng, {5, 6});
  const std::size_t n = 64;
  auto x = random_signal(n, rng);
  const auto trace = denoiser_trace<double>(Var<double>::constant(Tensor<double>::column(x)), p, Mode::train);
  std::vector<double> h = x;
  std::size_t cin = 1;
  for (std::size_t k = 0; k < 6; ++k) {
    auto z = oracle::conv(h, n, cin, p.kernels[k].value().storage(), 5, p.config.dilation(k));
    for (auto& v : z) v = oracle::lrelu(v);
    const auto& got = trace.layers[k].value().storage();
    for (std::size_t j = 0; j < z.size(); ++j) ASSERT_NEAR(got[j], z[j], 1e-12) << "layer " << k + 1;
    h = z;
    cin = 5;
  }
}

TEST(DenoiserForward, TranslationCovariant) {
  Rng rng(8);
  auto p = denoiser_init<float>(rng, {6, 4});
  randomize_norm(p, rng);
  Rng srng(9);
  set_stats(p, srng);
  const std::size_t n = 300, s = 37, reach = 8;
  std::vector<float> x(n), xs(n, 0.0f);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t t = s; t < n; ++t) xs[t] = x[t - s];
  const auto y = denoise<float>(x, p);
  const auto ys = denoise<float>(xs, p);
  for (std::size_t t = reach; t + s + reach < n; ++t) ASSERT_NEAR(ys[t + s], y[t], 1e-5) << t;
}

TEST(DenoiserForward, ParallelInferenceMatchesSequential) {
  Rng rng(10);
  auto p = denoiser_init<float>(rng, {8, 5});
  std::vector<std::vector<float>> inputs(6, std::vector<float>(500));
  for (auto& x : inputs)
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  std::vector<std::vector<float>> seq, par(inputs.size());
  for (const auto& x : inputs) seq.push_back(denoise<float>(x, p));
  parallel_for(inputs.size(), 3, [&](std::size_t i) { par[i] = denoise<float>(inputs[i], p); });
  EXPECT_EQ(seq, par);
}

TEST(DenoiserBackprop, ReachesEveryParameter) {
  Rng rng(11);
  auto p = denoiser_init<float>(rng, {4, 3});
  randomize_norm(p, rng);
  std::vector<float> x(40), s(40);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : s) v = static_cast<float>(rng.uniform(-1, 1));
  const auto y = denoiser_forward<float>(Var<float>::constant(Tensor<float>::column(x)), p, Mode::train);
  backprop(l1_loss<float>(y, Var<float>::constant(Tensor<float>::column(s))));
  for (auto& np : p.named_parameters()) {
    double mag = 0;
    for (float g : np.var->grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0) << np.name;
  }
}
