#pragma once

#include "sdfl/corpus.hpp"
#include "sdfl/denoiser.hpp"
#include "sdfl/errors.hpp"
#include "sdfl/featnet.hpp"
#include "sdfl/synth.hpp"
#include "sdfl/trainer.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace sdfl {

/// Flat key=value settings; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in, const std::string& origin) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  return parse_key_values(in, path.string());
}

namespace detail {

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Everything a training run needs besides data.
struct RunConfig {
  TrainConfig train;
  DenoiserConfig denoiser;
  FeatureNetConfig featnet;
  std::vector<TaskSpec> tasks;  // empty: inferred from the manifests
};

inline std::vector<TaskSpec> parse_tasks(const std::string& v) {
  // name:classes:mode,name:classes:mode
  std::vector<TaskSpec> out;
  for (const auto& item : detail::split(v, ',')) {
    const auto f = detail::split(detail::trim(item), ':');
    if (f.size() != 3) throw ConfigError("tasks: expected name:classes:mode, got '" + item + "'");
    TaskSpec t;
    t.name = f[0];
    t.classes = detail::parse_uint("tasks", f[1]);
    if (f[2] == "softmax") t.mode = LabelMode::softmax;
    else if (f[2] == "sigmoid") t.mode = LabelMode::sigmoid;
    else throw ConfigError("tasks: mode must be softmax or sigmoid, got '" + f[2] + "'");
    out.push_back(t);
  }
  return out;
}

inline std::string format_tasks(const std::vector<TaskSpec>& tasks) {
  std::string s;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) s += ',';
    s += tasks[i].name + ':' + std::to_string(tasks[i].classes) + ':' + to_string(tasks[i].mode);
  }
  return s;
}

/// Applies recognised keys; unknown keys are an error.
inline void apply_key_values(RunConfig& rc, const KeyValues& kv) {
  auto& t = rc.train;
  for (const auto& [k, v] : kv) {
    if (k == "learning_rate") t.learning_rate = detail::parse_real(k, v);
    else if (k == "epochs") t.epochs = detail::parse_uint(k, v);
    else if (k == "seed") t.seed = detail::parse_uint(k, v);
    else if (k == "loss_kind") t.loss_kind = parse_loss_kind(v);
    else if (k == "feature_depth") t.feature_depth = detail::parse_uint(k, v);
    else if (k == "calibration_epoch") t.calibration_epoch = detail::parse_uint(k, v);
    else if (k == "checkpoint_every") t.checkpoint_every = detail::parse_uint(k, v);
    else if (k == "crop_min") t.crop_min = detail::parse_uint(k, v);
    else if (k == "refresh_stats") t.refresh_stats = detail::parse_bool(k, v);
    else if (k == "denoiser_width") rc.denoiser.width = detail::parse_uint(k, v);
    else if (k == "denoiser_layers") rc.denoiser.layers = detail::parse_uint(k, v);
    else if (k == "featnet_base_width") rc.featnet.base_width = detail::parse_uint(k, v);
    else if (k == "featnet_layers") rc.featnet.layers = detail::parse_uint(k, v);
    else if (k == "tasks") rc.tasks = parse_tasks(v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  if (rc.denoiser.width == 0 || rc.denoiser.layers == 0) throw ConfigError("denoiser architecture must be non-empty");
  if (rc.featnet.base_width == 0 || rc.featnet.layers == 0 || rc.featnet.layers > 14) {
    throw ConfigError("featnet_layers must be in [1, 14] and featnet_base_width positive");
  }
  t.validate();
}

/// Canonical text of the settings that shape a run's trajectory; hashed into
/// checkpoints. The epoch count is left out so a resumed run may extend it.
inline std::string canonical_config(const RunConfig& rc) {
  std::ostringstream os;
  os << "learning_rate=" << detail::format_double(rc.train.learning_rate) << '\n'
     << "seed=" << rc.train.seed << '\n'
     << "loss_kind=" << to_string(rc.train.loss_kind) << '\n'
     << "feature_depth=" << rc.train.feature_depth << '\n'
     << "calibration_epoch=" << rc.train.calibration_epoch << '\n'
     << "crop_min=" << rc.train.crop_min << '\n'
     << "refresh_stats=" << (rc.train.refresh_stats ? "true" : "false") << '\n'
     << "denoiser_width=" << rc.denoiser.width << '\n'
     << "denoiser_layers=" << rc.denoiser.layers << '\n'
     << "featnet_base_width=" << rc.featnet.base_width << '\n'
     << "featnet_layers=" << rc.featnet.layers << '\n'
     << "tasks=" << format_tasks(rc.tasks) << '\n';
  return os.str();
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline SynthSpec parse_synth_spec(const KeyValues& kv) {
  SynthSpec s;
  for (const auto& [k, v] : kv) {
    if (k == "n_speech_like") s.n_speech_like = detail::parse_uint(k, v);
    else if (k == "n_noise_types") s.n_noise_types = detail::parse_uint(k, v);
    else if (k == "duration_s") s.duration_s = detail::parse_real(k, v);
    else if (k == "seed") s.seed = detail::parse_uint(k, v);
    else if (k == "n_classifier_files") s.n_classifier_files = detail::parse_uint(k, v);
    else throw ConfigError("unknown synth key '" + k + "'");
  }
  if (s.n_speech_like == 0 || s.n_noise_types == 0) throw ConfigError("synth counts must be positive");
  if (!(s.duration_s > 0)) throw ConfigError("duration_s must be positive");
  return s;
}

}  // namespace sdfl
