#pragma once

#include "sdfl/adam.hpp"
#include "sdfl/corpus.hpp"
#include "sdfl/denoiser.hpp"
#include "sdfl/errors.hpp"
#include "sdfl/featnet.hpp"
#include "sdfl/rng.hpp"
#include "sdfl/wav.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace sdfl {

enum class LossKind { feature, l1, l2 };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::feature: return "feature";
    case LossKind::l1: return "l1";
    case LossKind::l2: return "l2";
  }
  return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "feature") return LossKind::feature;
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  throw ConfigError("unknown loss_kind '" + s + "' (expected feature, l1 or l2)");
}

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::feature;
  std::size_t feature_depth = 6;
  std::size_t calibration_epoch = 10;
  std::size_t checkpoint_every = 0;  // epochs between checkpoints; 0 = at the end only
  std::size_t crop_min = kCropMinSamples;
  bool refresh_stats = false;  // re-estimate running statistics after the final epoch

  void validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be positive");
    }
    if (feature_depth < 1 || feature_depth > 14) throw ConfigError("feature_depth must be in [1, 14]");
    if (crop_min < 1) throw ConfigError("crop_min must be positive");
  }
};

/// Audio referenced by path, or held in memory.
struct Clip {
  std::string id;
  std::filesystem::path path;
  std::shared_ptr<const Waveform> audio;

  static Clip in_memory(std::string id, Waveform w) {
    return {std::move(id), {}, std::make_shared<const Waveform>(std::move(w))};
  }
  Waveform load() const { return audio ? *audio : read_wav(path); }
};

/// Adam with one state per named parameter.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(const std::vector<NamedParam<T>>& params, double lr) {
    for (const auto& p : params) {
      auto it = states.find(p.name);
      if (it == states.end()) it = states.emplace(p.name, AdamState<T>(p.var->size(), options_)).first;
      adam_step<T>(*p.var, it->second, lr, p.name);
    }
  }

  std::map<std::string, AdamState<T>> states;

 private:
  AdamOptions options_;
};

// ---------------------------------------------------------------------------
// Running-statistics refresh

namespace detail {

template <typename T>
void accumulate_stats(std::vector<BatchNormStats<T>>& acc, const std::vector<BatchNormStats<T>>& one) {
  if (acc.empty()) acc.resize(one.size());
  for (std::size_t k = 0; k < one.size(); ++k) {
    if (acc[k].mean.empty()) {
      acc[k].mean.assign(one[k].mean.size(), T(0));
      acc[k].var.assign(one[k].var.size(), T(0));
    }
    for (std::size_t j = 0; j < one[k].mean.size(); ++j) {
      acc[k].mean[j] += one[k].mean[j];
      acc[k].var[j] += one[k].var[j];
    }
  }
}

template <typename T>
void divide_stats(std::vector<BatchNormStats<T>>& acc, std::size_t count) {
  const T c = static_cast<T>(count);
  for (auto& st : acc) {
    for (auto& v : st.mean) v /= c;
    for (auto& v : st.var) v /= c;
  }
}

}  // namespace detail

/// Replaces the running statistics with the average of the per-file batch
/// statistics under the current parameters. Files of one sample are skipped.
template <typename T>
void refresh_stats(DenoiserParams<T>& params, const std::vector<Waveform>& inputs) {
  std::vector<BatchNormStats<T>> acc;
  std::size_t used = 0;
  for (const auto& w : inputs) {
    if (w.size() < 2) continue;
    auto p = params;
    for (auto& v : p.kernels) v = v.detached();
    for (auto& v : p.alphas) v = v.detached();
    for (auto& v : p.betas) v = v.detached();
    for (auto& b : p.bn) b = {};
    std::vector<T> x(w.samples.begin(), w.samples.end());
    denoiser_forward<T>(Var<T>::constant(Tensor<T>::column(x)), p, Mode::train);
    detail::accumulate_stats(acc, p.bn);
    ++used;
  }
  if (used == 0) return;
  detail::divide_stats(acc, used);
  params.bn = std::move(acc);
}

template <typename T>
void refresh_stats(FeatureNetParams<T>& params, const std::vector<Waveform>& inputs) {
  std::vector<BatchNormStats<T>> acc;
  std::size_t used = 0;
  // Layer m sees ceil(N / 2^(m-1)) samples; batch statistics need two.
  const std::size_t max_short = std::size_t{1} << (params.config.layers - 1);
  for (const auto& w : inputs) {
    if (w.size() <= max_short) continue;
    auto p = params;
    for (auto& v : p.kernels) v = v.detached();
    for (auto& v : p.bn_scale) v = v.detached();
    for (auto& v : p.bn_shift) v = v.detached();
    for (auto& b : p.bn) b = {};
    std::vector<T> x(w.samples.begin(), w.samples.end());
    feature_forward<T>(Var<T>::constant(Tensor<T>::column(x)), p, p.config.layers, Mode::train);
    detail::accumulate_stats(acc, p.bn);
    ++used;
  }
  if (used == 0) return;
  detail::divide_stats(acc, used);
  params.bn = std::move(acc);
}

// ---------------------------------------------------------------------------
// Schedule

struct ScheduleEntry {
  std::size_t task = 0;
  std::size_t index = 0;
  bool repeat = false;  // padding re-draw of a file already presented this epoch

  bool operator==(const ScheduleEntry&) const = default;
};

using IterationSchedule = std::vector<ScheduleEntry>;

/// One epoch of strictly alternating (round-robin) task iterations.
///
/// Each task's files are shuffled independently; smaller tasks are padded to
/// the size of the largest with files drawn at random without replacement
/// (cycling if more than one extra pass is needed), and the padded list is
/// shuffled again.
inline IterationSchedule epoch_schedule(const std::vector<std::size_t>& sizes, Rng& rng) {
  if (sizes.empty()) throw std::invalid_argument("epoch_schedule: no tasks");
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("epoch_schedule: a task has no files");
  }
  const std::size_t longest = *std::max_element(sizes.begin(), sizes.end());
  std::vector<std::vector<ScheduleEntry>> lists(sizes.size());
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    auto& l = lists[t];
    for (std::size_t i = 0; i < sizes[t]; ++i) l.push_back({t, i, false});
    std::vector<std::size_t> pool;
    while (l.size() < longest) {
      if (pool.empty()) {
        pool.resize(sizes[t]);
        for (std::size_t i = 0; i < sizes[t]; ++i) pool[i] = i;
        rng.shuffle(pool);
      }
      l.push_back({t, pool.back(), true});
      pool.pop_back();
    }
    rng.shuffle(l);
  }
  IterationSchedule out;
  out.reserve(longest * sizes.size());
  for (std::size_t i = 0; i < longest; ++i)
    for (std::size_t t = 0; t < sizes.size(); ++t) out.push_back(lists[t][i]);
  return out;
}

// ---------------------------------------------------------------------------
// Classifier pretraining

struct ClassifierTask {
  TaskSpec spec;
  std::vector<Clip> clips;
  std::vector<std::vector<std::size_t>> labels;  // class indices per clip

  std::vector<float> target(std::size_t i) const {
    std::vector<float> t(spec.classes, 0.0f);
    for (std::size_t c : labels.at(i)) t.at(c) = 1.0f;
    return t;
  }

  void validate() const {
    if (clips.size() != labels.size()) throw DataError("task '" + spec.name + "': labels/clips count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t c : labels[i]) {
        if (c >= spec.classes) {
          throw DataError("task '" + spec.name + "': clip '" + clips[i].id + "' has label " +
                          std::to_string(c) + " but only " + std::to_string(spec.classes) + " classes");
        }
      }
      if (spec.mode == LabelMode::softmax && labels[i].size() != 1) {
        throw DataError("task '" + spec.name + "': clip '" + clips[i].id +
                        "' needs exactly one label for a softmax task");
      }
    }
  }
};

struct ClassifierEpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  std::vector<double> accuracy;  // per task, over the iterations of the epoch
};

struct ClassifierTrainingState {
  FeatureNetParams<float> params;
  Adam<float> optimizer;
  std::size_t epochs_done = 0;
  std::vector<ClassifierEpochLog> log;
};

struct ClassifierHooks {
  std::ostream* iteration_csv = nullptr;  // epoch,iteration,task,loss
  std::function<void(const ClassifierTrainingState&)> on_epoch_end;
};

inline bool prediction_correct(std::span<const float> logits, const std::vector<float>& target, LabelMode mode) {
  if (mode == LabelMode::softmax) {
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    return target[static_cast<std::size_t>(best)] == 1.0f;
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if ((logits[i] > 0.0f) != (target[i] == 1.0f)) return false;
  }
  return true;
}

/// Runs epochs (state.epochs_done, cfg.epochs] of multi-task training, one
/// randomly cropped file per iteration.
inline void train_classifier(const std::vector<ClassifierTask>& tasks, const TrainConfig& cfg,
                             ClassifierTrainingState& state, const ClassifierHooks& hooks = {}) {
  cfg.validate();
  if (tasks.empty()) throw ConfigError("train_classifier: no tasks");
  if (tasks.size() != state.params.tasks.size()) throw ConfigError("train_classifier: task count mismatch");
  std::vector<std::size_t> sizes;
  for (std::size_t p = 0; p < tasks.size(); ++p) {
    tasks[p].validate();
    if (!(tasks[p].spec == state.params.tasks[p])) {
      throw ConfigError("train_classifier: task '" + tasks[p].spec.name + "' does not match the network heads");
    }
    sizes.push_back(tasks[p].clips.size());
  }

  for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, epoch));
    const auto schedule = epoch_schedule(sizes, rng);
    ClassifierEpochLog log;
    log.epoch = epoch;
    std::vector<std::size_t> correct(tasks.size(), 0), seen(tasks.size(), 0);
    double loss_sum = 0;
    for (std::size_t it = 0; it < schedule.size(); ++it) {
      const auto& e = schedule[it];
      const auto& task = tasks[e.task];
      const Waveform crop = random_crop(task.clips[e.index].load(), rng, cfg.crop_min);
      const auto x = Var<float>::constant(Tensor<float>::column(crop.samples));
      const auto logits = classify_logits<float>(x, state.params, e.task, Mode::train);
      const auto target = task.target(e.index);
      const auto loss = classify_loss<float>(logits, target, task.spec.mode);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        throw std::runtime_error("train_classifier: non-finite loss on '" + task.clips[e.index].id + "'");
      }
      backprop(loss);
      auto params = state.params.shared_parameters();
      for (auto& h : state.params.head_parameters(e.task)) params.push_back(h);
      state.optimizer.step(params, cfg.learning_rate);

      loss_sum += lv;
      seen[e.task] += 1;
      correct[e.task] += prediction_correct(logits.value().values(), target, task.spec.mode);
      if (hooks.iteration_csv) {
        *hooks.iteration_csv << epoch << ',' << it + 1 << ',' << task.spec.name << ',' << lv << '\n';
      }
    }
    log.mean_loss = loss_sum / static_cast<double>(schedule.size());
    for (std::size_t p = 0; p < tasks.size(); ++p) {
      log.accuracy.push_back(static_cast<double>(correct[p]) / static_cast<double>(seen[p]));
    }
    state.log.push_back(log);
    state.epochs_done = epoch;
    if (cfg.refresh_stats && epoch == cfg.epochs) {
      std::vector<Waveform> all;
      for (const auto& t : tasks)
        for (const auto& c : t.clips) all.push_back(c.load());
      refresh_stats(state.params, all);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

/// Fraction of clips classified correctly with frozen statistics.
inline double classifier_accuracy(const ClassifierTask& task, std::size_t task_index,
                                  FeatureNetParams<float>& params) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < task.clips.size(); ++i) {
    const Waveform w = task.clips[i].load();
    const auto logits = classify_logits<float>(Var<float>::constant(Tensor<float>::column(w.samples)),
                                               params, task_index, Mode::frozen);
    ok += prediction_correct(logits.value().values(), task.target(i), task.spec.mode);
  }
  return static_cast<double>(ok) / static_cast<double>(task.clips.size());
}

// ---------------------------------------------------------------------------
// Denoiser training

struct TrainingPair {
  std::string id;
  Clip noisy;
  Clip clean;
};

struct DenoiserEpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  std::vector<double> mean_terms;  // feature loss only: unweighted per-layer L1
};

struct DenoiserTrainingState {
  DenoiserParams<float> params;
  Adam<float> optimizer;
  LossWeights weights;
  std::size_t epochs_done = 0;
  std::vector<DenoiserEpochLog> log;
};

struct DenoiserHooks {
  std::ostream* iteration_csv = nullptr;  // epoch,iteration,loss[,term_1..term_M]
  std::function<void(const DenoiserTrainingState&)> on_epoch_end;
  std::function<void(std::size_t epoch, const LossWeights&)> on_calibrated;
};

/// Fresh training state for cfg: initialized network and unit loss weights.
inline DenoiserTrainingState make_denoiser_state(const TrainConfig& cfg, DenoiserConfig arch = {}) {
  Rng rng(derive_seed(cfg.seed, 0));
  DenoiserTrainingState s{denoiser_init<float>(rng, arch), Adam<float>{}, LossWeights::ones(cfg.feature_depth), 0, {}};
  return s;
}

/// Loss of one (noisy, clean) pair under cfg.loss_kind.
inline FeatureLoss<float> denoiser_loss(const Var<float>& output, const Var<float>& clean, LossKind kind,
                                        FeatureNetParams<float>* featnet, const LossWeights& weights) {
  switch (kind) {
    case LossKind::l1: return {l1_loss<float>(output, clean), {}};
    case LossKind::l2: return {l2_loss<float>(output, clean), {}};
    case LossKind::feature: return feature_loss<float>(clean, output, *featnet, weights);
  }
  throw std::logic_error("denoiser_loss: bad kind");
}

/// Runs epochs (state.epochs_done, cfg.epochs]: each epoch presents every
/// pair once, whole, in random order, with one Adam step per pair.
///
/// With the feature loss, weights stay at 1 through `calibration_epoch`;
/// the per-layer terms of that epoch are averaged and turned into fixed
/// weights by calibrate_lambda.
inline void train_denoiser(const std::vector<TrainingPair>& corpus, FeatureNetParams<float>* featnet,
                           const TrainConfig& cfg, DenoiserTrainingState& state,
                           const DenoiserHooks& hooks = {}) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("train_denoiser: empty corpus");
  if (cfg.loss_kind == LossKind::feature) {
    if (!featnet) throw ConfigError("train_denoiser: feature loss needs a pretrained feature network");
    if (cfg.feature_depth > featnet->config.layers) throw ConfigError("feature_depth exceeds feature network depth");
    if (state.weights.depth() != cfg.feature_depth) {
      if (state.weights.calibrated) throw ConfigError("calibrated loss weights do not match feature_depth");
      state.weights = LossWeights::ones(cfg.feature_depth);
    }
  }

  for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, epoch));
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    const bool calibrating = cfg.loss_kind == LossKind::feature && !state.weights.calibrated &&
                             epoch == cfg.calibration_epoch;
    DenoiserEpochLog log;
    log.epoch = epoch;
    std::vector<double> term_sum(cfg.loss_kind == LossKind::feature ? cfg.feature_depth : 0, 0.0);
    double loss_sum = 0;

    for (std::size_t it = 0; it < order.size(); ++it) {
      const auto& pair = corpus[order[it]];
      const Waveform noisy = pair.noisy.load();
      const Waveform clean = pair.clean.load();
      if (noisy.size() != clean.size()) {
        throw DataError("train_denoiser: pair '" + pair.id + "' has mismatched lengths (" +
                        std::to_string(noisy.size()) + " vs " + std::to_string(clean.size()) + ")");
      }
      const auto x = Var<float>::constant(Tensor<float>::column(noisy.samples));
      const auto s = Var<float>::constant(Tensor<float>::column(clean.samples));
      const auto y = denoiser_forward<float>(x, state.params, Mode::train);
      const auto loss = denoiser_loss(y, s, cfg.loss_kind, featnet, state.weights);
      const double lv = loss.total.value()[0];
      if (!std::isfinite(lv)) {
        throw std::runtime_error("train_denoiser: non-finite loss on pair '" + pair.id + "' in epoch " +
                                 std::to_string(epoch));
      }
      backprop(loss.total);
      state.optimizer.step(state.params.named_parameters(), cfg.learning_rate);

      loss_sum += lv;
      for (std::size_t m = 0; m < loss.terms.size(); ++m) term_sum[m] += loss.terms[m];
      if (hooks.iteration_csv) {
        auto& os = *hooks.iteration_csv;
        os << epoch << ',' << it + 1 << ',' << lv;
        for (double t : loss.terms) os << ',' << t;
        os << '\n';
      }
    }
    const auto count = static_cast<double>(order.size());
    log.mean_loss = loss_sum / count;
    for (double t : term_sum) log.mean_terms.push_back(t / count);
    if (calibrating) {
      state.weights = calibrate_lambda(log.mean_terms);
      if (hooks.on_calibrated) hooks.on_calibrated(epoch, state.weights);
    }
    state.log.push_back(std::move(log));
    state.epochs_done = epoch;
    if (cfg.refresh_stats && epoch == cfg.epochs) {
      std::vector<Waveform> inputs;
      for (const auto& pair : corpus) inputs.push_back(pair.noisy.load());
      refresh_stats(state.params, inputs);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

}  // namespace sdfl
