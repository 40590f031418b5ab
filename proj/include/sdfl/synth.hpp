#pragma once

#include "sdfl/corpus.hpp"
#include "sdfl/rng.hpp"
#include "sdfl/wav.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace sdfl {

/// Parameters of a synthetic desk-scale corpus.
struct SynthSpec {
  std::size_t n_speech_like = 4;
  std::size_t n_noise_types = 2;
  double duration_s = 2.0;
  std::uint64_t seed = 0;
  std::size_t n_classifier_files = 16;  // per classification task
};

namespace synth {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kNoiseKinds = 3;

/// Voiced syllables: harmonic tones with a drifting pitch under a raised
/// sine envelope, separated by pauses. Peak 0.5.
inline Waveform speech_like(std::size_t n, Rng& rng) {
  Waveform w;
  w.samples.assign(n, 0.0f);
  const double fs = kSampleRate;
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.02, 0.15) * fs);
  double phase = 0;
  while (pos < n) {
    const std::size_t len = static_cast<std::size_t>(rng.uniform(0.15, 0.35) * fs);
    const double f0 = rng.uniform(100.0, 220.0);
    const double glide = rng.uniform(-0.15, 0.15);
    const std::size_t harmonics = 3 + rng.uniform_index(5);
    std::vector<double> amp(harmonics);
    for (std::size_t h = 0; h < harmonics; ++h) amp[h] = rng.uniform(0.3, 1.0) / static_cast<double>(h + 1);
    for (std::size_t t = 0; t < len && pos + t < n; ++t) {
      const double u = static_cast<double>(t) / static_cast<double>(len);
      const double f = f0 * (1.0 + glide * u + 0.02 * std::sin(kTwoPi * 5.0 * t / fs));
      phase += kTwoPi * f / fs;
      const double env = std::pow(std::sin(std::numbers::pi * u), 2.0);
      double v = 0;
      for (std::size_t h = 0; h < harmonics; ++h) v += amp[h] * std::sin(static_cast<double>(h + 1) * phase);
      w.samples[pos + t] = static_cast<float>(env * v);
    }
    pos += len + static_cast<std::size_t>(rng.uniform(0.05, 0.25) * fs);
  }
  const float p = peak(w.samples);
  if (p > 0)
    for (auto& v : w.samples) v *= 0.5f / p;
  return w;
}

/// Background of one of three kinds, selected by type id:
/// 0 high-passed hiss, 1 high tone complex, 2 band-limited rumble.
/// `character` fixes the type's spectral parameters; `rng` the realization.
inline Waveform noise(std::size_t type, std::size_t n, std::uint64_t character, Rng& rng) {
  Rng traits(character);
  Waveform w;
  w.samples.assign(n, 0.0f);
  const double fs = kSampleRate;
  switch (type % kNoiseKinds) {
    case 0: {
      const double fc = traits.uniform(1500.0, 3500.0);
      const double a = std::exp(-kTwoPi * fc / fs);
      double prev_x = 0, prev_y = 0;
      for (std::size_t t = 0; t < n; ++t) {
        const double x = rng.normal();
        const double y = a * (prev_y + x - prev_x);
        prev_x = x;
        prev_y = y;
        w.samples[t] = static_cast<float>(y);
      }
      break;
    }
    case 1: {
      const std::size_t tones = 3 + traits.uniform_index(3);
      std::vector<double> freq(tones), ph(tones);
      for (auto& f : freq) f = traits.uniform(1200.0, 5000.0) * rng.uniform(0.98, 1.02);
      for (auto& p : ph) p = rng.uniform(0.0, kTwoPi);
      const double am = traits.uniform(0.5, 3.0);
      for (std::size_t t = 0; t < n; ++t) {
        double v = 0;
        for (std::size_t k = 0; k < tones; ++k) v += std::sin(kTwoPi * freq[k] * t / fs + ph[k]);
        v *= 0.75 + 0.25 * std::sin(kTwoPi * am * t / fs);
        w.samples[t] = static_cast<float>(v + 0.05 * rng.normal());
      }
      break;
    }
    default: {
      // Two cascaded one-pole low-passes on white noise.
      const double fc = traits.uniform(150.0, 400.0);
      const double a = std::exp(-kTwoPi * fc / fs);
      double y1 = 0, y2 = 0;
      for (std::size_t t = 0; t < n; ++t) {
        y1 = a * y1 + (1 - a) * rng.normal();
        y2 = a * y2 + (1 - a) * y1;
        w.samples[t] = static_cast<float>(y2);
      }
      break;
    }
  }
  const float p = peak(w.samples);
  if (p > 0)
    for (auto& v : w.samples) v *= 0.5f / p;
  return w;
}

inline std::string numbered(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu", stem, i);
  return buf;
}

}  // namespace synth

struct SynthCorpus {
  Manifest manifest;
  std::vector<std::pair<std::string, Waveform>> files;  // (relative path, audio)
};

/// Deterministic corpus: speech-like clean files, one noise file per type,
/// and two classification tasks ("scene": which noise type, softmax;
/// "tagging": {speech, noise} presence, sigmoid).
inline SynthCorpus synth_corpus(const SynthSpec& spec) {
  if (spec.n_speech_like == 0 || spec.n_noise_types == 0) {
    throw std::invalid_argument("synth_corpus: counts must be positive");
  }
  if (!(spec.duration_s > 0)) throw std::invalid_argument("synth_corpus: duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * kSampleRate));
  SynthCorpus c;
  c.manifest.remarks.push_back("synthetic corpus seed=" + std::to_string(spec.seed));
  std::uint64_t stream = 0;
  auto character = [&](std::size_t type) { return derive_seed(spec.seed, 1'000'000 + type); };

  auto add = [&](Record r, Waveform w) {
    c.files.emplace_back(r.source, std::move(w));
    c.manifest.records.push_back(std::move(r));
  };

  for (std::size_t i = 0; i < spec.n_speech_like; ++i) {
    Rng rng(derive_seed(spec.seed, stream++));
    const auto id = synth::numbered("speech", i);
    add({id, "clean/" + id + ".wav", Role::clean, "", {}, "", std::nullopt}, synth::speech_like(n, rng));
  }
  for (std::size_t k = 0; k < spec.n_noise_types; ++k) {
    Rng rng(derive_seed(spec.seed, stream++));
    const auto id = synth::numbered("noise", k);
    add({id, "noise/" + id + ".wav", Role::noise, "", {k}, "", std::nullopt},
        synth::noise(k, n, character(k), rng));
  }
  for (std::size_t i = 0; i < spec.n_classifier_files; ++i) {
    Rng rng(derive_seed(spec.seed, stream++));
    const std::size_t k = i % spec.n_noise_types;
    Waveform w = synth::noise(k, n, character(k), rng);
    const auto id = synth::numbered("scene", i);
    add({id, "classifier/" + id + ".wav", Role::classifier, "scene", {k}, "", std::nullopt}, std::move(w));
  }
  for (std::size_t i = 0; i < spec.n_classifier_files; ++i) {
    Rng rng(derive_seed(spec.seed, stream++));
    const std::size_t combo = i % 3;  // 0 speech, 1 noise, 2 both
    Waveform w;
    std::vector<std::size_t> labels;
    if (combo != 1) {
      w = synth::speech_like(n, rng);
      labels.push_back(0);
    }
    if (combo != 0) {
      const std::size_t k = rng.uniform_index(spec.n_noise_types);
      Waveform nz = synth::noise(k, n, character(k), rng);
      if (w.samples.empty()) {
        w = std::move(nz);
      } else {
        const double g = rng.uniform(0.2, 0.6);
        for (std::size_t t = 0; t < n; ++t) w.samples[t] += static_cast<float>(g * nz.samples[t]);
      }
      labels.push_back(1);
    }
    const auto id = synth::numbered("tag", i);
    add({id, "classifier/" + id + ".wav", Role::classifier, "tagging", labels, "", std::nullopt},
        std::move(w));
  }
  return c;
}

/// Writes all files (float32 WAV) and corpus.csv under `dir`.
inline void write_synth_corpus(const std::filesystem::path& dir, const SynthCorpus& c) {
  for (const auto& [rel, w] : c.files) write_wav(dir / rel, w, SampleFormat::float32);
  write_manifest(dir / "corpus.csv", c.manifest);
}

}  // namespace sdfl
