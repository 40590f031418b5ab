#pragma once

#include "sdfl/config.hpp"
#include "sdfl/denoiser.hpp"
#include "sdfl/errors.hpp"
#include "sdfl/featnet.hpp"
#include "sdfl/trainer.hpp"
#include "sdfl/wav.hpp"

#include <bit>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sdfl {

// Binary layout, all integers little-endian:
//   "SDFL1" | u32 version | u8 kind
//   u32 n_meta  { str key, str value }
//   u32 n_entry { str name, u32 rank, u64 dims[rank], f32 values[prod(dims)] }
// where str = u32 length + bytes. Metadata is text; reals that must survive
// exactly (loss weights) are written as hex floats.

enum class CheckpointKind : std::uint8_t { denoiser = 0, featnet = 1 };

inline const char* to_string(CheckpointKind k) { return k == CheckpointKind::denoiser ? "denoiser" : "featnet"; }

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::denoiser;
  std::map<std::string, std::string> meta;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  const CheckpointEntry& get(const std::string& name) const {
    if (const auto* e = find(name)) return *e;
    throw DataError("checkpoint: missing entry '" + name + "'");
  }
  const std::string& meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint: missing metadata '" + key + "'");
    return it->second;
  }
  void add(std::string name, Shape shape, std::vector<float> values) {
    entries.push_back({std::move(name), std::move(shape), std::move(values)});
  }

  bool operator==(const Checkpoint&) const = default;
};

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  std::vector<unsigned char> out{'S', 'D', 'F', 'L', '1'};
  auto put_str = [&](const std::string& s) {
    detail::put32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  };
  detail::put32(out, kCheckpointVersion);
  out.push_back(static_cast<unsigned char>(c.kind));
  detail::put32(out, static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    put_str(k);
    put_str(v);
  }
  detail::put32(out, static_cast<std::uint32_t>(c.entries.size()));
  for (const auto& e : c.entries) {
    if (shape_size(e.shape) != e.values.size()) {
      throw std::invalid_argument("checkpoint entry '" + e.name + "' does not fill its shape");
    }
    put_str(e.name);
    detail::put32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) {
      detail::put32(out, static_cast<std::uint32_t>(static_cast<std::uint64_t>(d) & 0xffffffffu));
      detail::put32(out, static_cast<std::uint32_t>(static_cast<std::uint64_t>(d) >> 32));
    }
    for (float v : e.values) detail::put32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& b, const std::string& origin) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > b.size()) throw DataError(origin + ": truncated checkpoint");
  };
  auto u32 = [&] {
    need(4);
    const auto v = detail::le32(b.data() + pos);
    pos += 4;
    return v;
  };
  auto str = [&] {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b.data() + pos), n);
    pos += n;
    return s;
  };
  need(5);
  if (std::memcmp(b.data(), "SDFL1", 5) != 0) throw DataError(origin + ": not an SDFL1 checkpoint");
  pos = 5;
  const auto version = u32();
  if (version != kCheckpointVersion) {
    throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  need(1);
  const auto kind = b[pos++];
  if (kind > 1) throw DataError(origin + ": unknown checkpoint kind " + std::to_string(kind));
  Checkpoint c;
  c.kind = static_cast<CheckpointKind>(kind);
  const auto n_meta = u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = str();
    c.meta[k] = str();
  }
  const auto n_entries = u32();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    CheckpointEntry e;
    e.name = str();
    const auto rank = u32();
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint64_t lo = u32();
      const std::uint64_t hi = u32();
      e.shape.push_back(static_cast<std::size_t>(lo | (hi << 32)));
    }
    const std::size_t n = shape_size(e.shape);
    need(4 * n);
    e.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) e.values[k] = std::bit_cast<float>(detail::le32(b.data() + pos + 4 * k));
    pos += 4 * n;
    c.entries.push_back(std::move(e));
  }
  if (pos != b.size()) throw DataError(origin + ": trailing bytes after checkpoint");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  // Write-then-rename so an interrupted save never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, encode_checkpoint(c));
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

// ---------------------------------------------------------------------------
// Conversions

namespace detail {

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hexfloat(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw DataError("checkpoint: bad real '" + s + "'");
  return v;
}

inline std::size_t meta_uint(const Checkpoint& c, const std::string& key) {
  try {
    return static_cast<std::size_t>(std::stoull(c.meta_at(key)));
  } catch (const std::invalid_argument&) {
    throw DataError("checkpoint: metadata '" + key + "' is not an integer");
  }
}

inline void put_var(Checkpoint& c, const std::string& name, const Var<float>& v) {
  c.add(name, v.shape(), v.value().storage());
}

inline void get_var(const Checkpoint& c, const std::string& name, Var<float>& v) {
  const auto& e = c.get(name);
  if (e.shape != v.shape()) {
    throw DataError("checkpoint: entry '" + name + "' has shape " + shape_string(e.shape) + ", expected " +
                    shape_string(v.shape()));
  }
  v.mutable_value() = Tensor<float>(e.shape, e.values);
}

inline void put_stats(Checkpoint& c, const std::string& prefix, const BatchNormStats<float>& s) {
  if (!s.initialized()) return;
  c.add(prefix + "bn_mean", {s.mean.size()}, s.mean);
  c.add(prefix + "bn_var", {s.var.size()}, s.var);
}

inline void get_stats(const Checkpoint& c, const std::string& prefix, BatchNormStats<float>& s) {
  const auto* m = c.find(prefix + "bn_mean");
  const auto* v = c.find(prefix + "bn_var");
  if (!m && !v) {
    s = {};
    return;
  }
  if (!m || !v) throw DataError("checkpoint: incomplete running statistics for " + prefix);
  s.mean = m->values;
  s.var = v->values;
}

inline void put_optimizer(Checkpoint& c, const Adam<float>& opt) {
  for (const auto& [name, st] : opt.states) {
    c.meta["adam." + name + ".step"] = std::to_string(st.step);
    c.add("adam." + name + ".m", {st.m.size()}, st.m);
    c.add("adam." + name + ".v", {st.v.size()}, st.v);
  }
}

inline void get_optimizer(const Checkpoint& c, Adam<float>& opt) {
  opt.states.clear();
  for (const auto& [key, value] : c.meta) {
    if (key.rfind("adam.", 0) != 0 || key.size() < 10 || key.substr(key.size() - 5) != ".step") continue;
    const std::string name = key.substr(5, key.size() - 10);
    AdamState<float> st;
    st.step = static_cast<std::size_t>(std::stoull(value));
    st.m = c.get("adam." + name + ".m").values;
    st.v = c.get("adam." + name + ".v").values;
    opt.states.emplace(name, std::move(st));
  }
}

inline void check_kind(const Checkpoint& c, CheckpointKind want) {
  if (c.kind != want) {
    throw DataError(std::string("checkpoint holds a ") + to_string(c.kind) + " network, expected " + to_string(want));
  }
}

}  // namespace detail

inline Checkpoint to_checkpoint(const DenoiserTrainingState& s, const RunConfig& rc) {
  Checkpoint c;
  c.kind = CheckpointKind::denoiser;
  c.meta["arch.width"] = std::to_string(s.params.config.width);
  c.meta["arch.layers"] = std::to_string(s.params.config.layers);
  c.meta["train.seed"] = std::to_string(rc.train.seed);
  c.meta["train.epoch"] = std::to_string(s.epochs_done);
  c.meta["train.loss_kind"] = to_string(rc.train.loss_kind);
  c.meta["train.config_hash"] = std::to_string(fnv1a(canonical_config(rc)));
  c.meta["loss.calibrated"] = s.weights.calibrated ? "1" : "0";
  std::string lambda;
  for (std::size_t m = 0; m < s.weights.lambda.size(); ++m) {
    lambda += (m ? "," : "") + detail::hexfloat(s.weights.lambda[m]);
  }
  c.meta["loss.lambda"] = lambda;
  auto p = s.params;  // handle copy; shares parameter storage
  for (const auto& np : p.named_parameters()) detail::put_var(c, np.name, *np.var);
  for (std::size_t k = 0; k < p.config.layers; ++k) {
    detail::put_stats(c, "layer" + std::to_string(k + 1) + ".", p.bn[k]);
  }
  detail::put_optimizer(c, s.optimizer);
  return c;
}

inline DenoiserTrainingState denoiser_from_checkpoint(const Checkpoint& c) {
  detail::check_kind(c, CheckpointKind::denoiser);
  DenoiserConfig arch;
  arch.width = detail::meta_uint(c, "arch.width");
  arch.layers = detail::meta_uint(c, "arch.layers");
  Rng rng(0);
  DenoiserTrainingState s{denoiser_init<float>(rng, arch), Adam<float>{}, {}, 0, {}};
  for (const auto& np : s.params.named_parameters()) detail::get_var(c, np.name, *np.var);
  for (std::size_t k = 0; k < arch.layers; ++k) {
    detail::get_stats(c, "layer" + std::to_string(k + 1) + ".", s.params.bn[k]);
  }
  s.params.validate();
  detail::get_optimizer(c, s.optimizer);
  s.epochs_done = detail::meta_uint(c, "train.epoch");
  s.weights.calibrated = c.meta_at("loss.calibrated") == "1";
  const auto& lam = c.meta_at("loss.lambda");
  if (!lam.empty())
    for (const auto& v : detail::split(lam, ',')) s.weights.lambda.push_back(detail::parse_hexfloat(v));
  return s;
}

inline Checkpoint to_checkpoint(const ClassifierTrainingState& s, const RunConfig& rc) {
  Checkpoint c;
  c.kind = CheckpointKind::featnet;
  auto p = s.params;  // handle copy; shares parameter storage
  c.meta["arch.base_width"] = std::to_string(p.config.base_width);
  c.meta["arch.layers"] = std::to_string(p.config.layers);
  c.meta["arch.tasks"] = format_tasks(p.tasks);
  c.meta["train.seed"] = std::to_string(rc.train.seed);
  c.meta["train.epoch"] = std::to_string(s.epochs_done);
  c.meta["train.config_hash"] = std::to_string(fnv1a(canonical_config(rc)));
  for (const auto& np : p.named_parameters()) detail::put_var(c, np.name, *np.var);
  for (std::size_t m = 0; m < p.config.layers; ++m) {
    detail::put_stats(c, "layer" + std::to_string(m + 1) + ".", p.bn[m]);
  }
  detail::put_optimizer(c, s.optimizer);
  return c;
}

inline ClassifierTrainingState featnet_from_checkpoint(const Checkpoint& c) {
  detail::check_kind(c, CheckpointKind::featnet);
  FeatureNetConfig arch;
  arch.base_width = detail::meta_uint(c, "arch.base_width");
  arch.layers = detail::meta_uint(c, "arch.layers");
  std::vector<TaskSpec> tasks;
  try {
    tasks = parse_tasks(c.meta_at("arch.tasks"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  Rng rng(0);
  ClassifierTrainingState s{featnet_init<float>(tasks, rng, arch), Adam<float>{}, 0, {}};
  for (const auto& np : s.params.named_parameters()) detail::get_var(c, np.name, *np.var);
  for (std::size_t m = 0; m < arch.layers; ++m) {
    detail::get_stats(c, "layer" + std::to_string(m + 1) + ".", s.params.bn[m]);
  }
  s.params.validate();
  detail::get_optimizer(c, s.optimizer);
  s.epochs_done = detail::meta_uint(c, "train.epoch");
  return s;
}

}  // namespace sdfl
