#pragma once

#include "sdfl/errors.hpp"
#include "sdfl/rng.hpp"
#include "sdfl/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sdfl {

inline double energy(std::span<const float> x) {
  double e = 0;
  for (float v : x) e += static_cast<double>(v) * v;
  return e;
}

inline float peak(std::span<const float> x) {
  float p = 0;
  for (float v : x) p = std::max(p, std::abs(v));
  return p;
}

inline std::size_t count_clipped(std::span<const float> x) {
  return static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [](float v) { return std::abs(v) > 1.0f; }));
}

// ---------------------------------------------------------------------------
// Mixing

struct ScaledPair {
  Waveform clean;
  Waveform noise;
  double factor = 1.0;
};

/// Scales clean and noise by the one factor that brings the clean peak to
/// `target_peak`.
inline ScaledPair peak_normalize_pair(const Waveform& clean, const Waveform& noise,
                                      double target_peak = 0.5) {
  const float p = peak(clean.samples);
  if (p == 0.0f) throw DataError("peak_normalize_pair: clean signal is silent");
  ScaledPair out{clean, noise, target_peak / static_cast<double>(p)};
  if (out.factor != 1.0) {
    for (auto& v : out.clean.samples) v = static_cast<float>(v * out.factor);
    for (auto& v : out.noise.samples) v = static_cast<float>(v * out.factor);
  }
  return out;
}

struct Mixture {
  Waveform noisy;
  double gain = 1.0;
  std::size_t clipped = 0;  // samples with |x| > 1, kept as is
};

/// noisy = clean + g * noise with the energy ratio set to snr_db.
inline Mixture mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (clean.size() != noise.size()) {
    throw DataError("mix_at_snr: length mismatch (" + std::to_string(clean.size()) + " vs " +
                    std::to_string(noise.size()) + ")");
  }
  const double ec = energy(clean.samples);
  const double en = energy(noise.samples);
  if (ec == 0) throw DataError("mix_at_snr: clean signal is silent");
  if (en == 0) throw DataError("mix_at_snr: noise signal is silent");
  Mixture m;
  m.gain = std::sqrt(ec / en * std::pow(10.0, -snr_db / 10.0));
  m.noisy.sample_rate = clean.sample_rate;
  m.noisy.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    m.noisy.samples[i] = static_cast<float>(clean.samples[i] + m.gain * noise.samples[i]);
  }
  m.clipped = count_clipped(m.noisy.samples);
  return m;
}

/// Brings noise to `length` samples: shorter noise is tiled (wrap-around),
/// longer noise is cut at a random offset.
inline Waveform fit_noise(const Waveform& noise, std::size_t length, Rng& rng) {
  if (noise.size() == 0) throw DataError("fit_noise: empty noise");
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  if (noise.size() >= length) {
    const std::size_t off = rng.uniform_int(0, noise.size() - length);
    std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(off), length, out.samples.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[i % noise.size()];
  }
  return out;
}

inline constexpr std::size_t kCropMinSamples = std::size_t{1} << 15;

/// Random contiguous section of at least `min_len` samples; files no longer
/// than `min_len` are returned whole.
inline Waveform random_crop(const Waveform& x, Rng& rng, std::size_t min_len = kCropMinSamples) {
  if (x.size() <= min_len) return x;
  const std::size_t len = rng.uniform_int(min_len, x.size());
  const std::size_t off = rng.uniform_int(0, x.size() - len);
  Waveform out;
  out.sample_rate = x.sample_rate;
  out.samples.assign(x.samples.begin() + static_cast<std::ptrdiff_t>(off),
                     x.samples.begin() + static_cast<std::ptrdiff_t>(off + len));
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

enum class Role { clean, noise, noisy, classifier };

inline std::string to_string(Role r) {
  switch (r) {
    case Role::clean: return "clean";
    case Role::noise: return "noise";
    case Role::noisy: return "noisy";
    case Role::classifier: return "classifier";
  }
  return "?";
}

inline Role parse_role(const std::string& s) {
  if (s == "clean") return Role::clean;
  if (s == "noise") return Role::noise;
  if (s == "noisy") return Role::noisy;
  if (s == "classifier") return Role::classifier;
  throw DataError("manifest: unknown role '" + s + "'");
}

/// One corpus entry. For noisy records `pair` is "<clean id>:<noise id>";
/// together with snr_db it identifies the (clean, noise, snr) triple.
struct Record {
  std::string id;
  std::string source;
  Role role = Role::clean;
  std::string task;
  std::vector<std::size_t> labels;
  std::string pair;
  std::optional<double> snr_db;

  std::string clean_id() const { return pair.substr(0, pair.find(':')); }
  std::string noise_id() const {
    const auto p = pair.find(':');
    return p == std::string::npos ? std::string() : pair.substr(p + 1);
  }
  bool operator==(const Record&) const = default;
};

inline constexpr const char* kManifestHeader = "id,source,role,task,labels,pair,snr_db";

struct Manifest {
  std::vector<Record> records;
  std::vector<std::string> remarks;  // written as '#' comment lines
  std::filesystem::path base_dir;    // relative sources resolve against this

  std::filesystem::path resolve(const Record& r) const {
    std::filesystem::path p(r.source);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }

  const Record* find(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return &r;
    return nullptr;
  }

  std::vector<const Record*> with_role(Role role) const {
    std::vector<const Record*> out;
    for (const auto& r : records)
      if (r.role == role) out.push_back(&r);
    return out;
  }

  /// Checks id uniqueness and that noisy records name existing ancestors.
  void validate() const {
    std::map<std::string, const Record*> ids;
    for (const auto& r : records) {
      if (r.id.empty()) throw DataError("manifest: record with empty id");
      if (!ids.emplace(r.id, &r).second) throw DataError("manifest: duplicate id '" + r.id + "'");
    }
    std::map<std::pair<std::string, double>, std::string> triples;
    for (const auto& r : records) {
      if (r.role != Role::noisy) continue;
      auto c = ids.find(r.clean_id());
      if (c == ids.end() || c->second->role != Role::clean) {
        throw DataError("manifest: noisy record '" + r.id + "' does not reference a clean record");
      }
      const auto n = r.noise_id();
      if (!n.empty()) {
        auto it = ids.find(n);
        if (it == ids.end() || it->second->role != Role::noise) {
          throw DataError("manifest: noisy record '" + r.id + "' references unknown noise '" + n + "'");
        }
      }
      if (r.snr_db && !triples.emplace(std::pair{r.pair, *r.snr_db}, r.id).second) {
        throw DataError("manifest: noisy records '" + triples[{r.pair, *r.snr_db}] + "' and '" +
                        r.id + "' share a (clean, noise, snr) triple");
      }
    }
  }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace detail

inline Manifest parse_manifest(std::istream& in, const std::string& origin) {
  Manifest m;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      m.remarks.push_back(detail::trim(t.substr(1)));
      continue;
    }
    if (!header) {
      if (t != kManifestHeader) {
        throw DataError(origin + ": expected header '" + kManifestHeader + "'");
      }
      header = true;
      continue;
    }
    const auto f = detail::split(t, ',');
    if (f.size() != 7) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected 7 fields, got " +
                      std::to_string(f.size()));
    }
    Record r;
    r.id = f[0];
    r.source = f[1];
    r.role = parse_role(f[2]);
    r.task = f[3];
    if (!f[4].empty()) {
      for (const auto& l : detail::split(f[4], ';')) {
        try {
          r.labels.push_back(static_cast<std::size_t>(std::stoul(l)));
        } catch (const std::exception&) {
          throw DataError(origin + ":" + std::to_string(lineno) + ": bad label '" + l + "'");
        }
      }
    }
    r.pair = f[5];
    if (!f[6].empty()) {
      try {
        r.snr_db = std::stod(f[6]);
      } catch (const std::exception&) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": bad snr_db '" + f[6] + "'");
      }
    }
    m.records.push_back(std::move(r));
  }
  if (!header) throw DataError(origin + ": missing manifest header");
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  auto m = parse_manifest(in, path.string());
  m.base_dir = path.parent_path();
  return m;
}

inline void write_manifest(std::ostream& out, const Manifest& m) {
  for (const auto& r : m.remarks) out << "# " << r << '\n';
  out << kManifestHeader << '\n';
  for (const auto& r : m.records) {
    for (const auto* field : {&r.id, &r.source, &r.task, &r.pair}) {
      if (field->find(',') != std::string::npos) {
        throw DataError("manifest: field contains a comma: '" + *field + "'");
      }
    }
    out << r.id << ',' << r.source << ',' << to_string(r.role) << ',' << r.task << ',';
    for (std::size_t i = 0; i < r.labels.size(); ++i) out << (i ? ";" : "") << r.labels[i];
    out << ',' << r.pair << ',';
    if (r.snr_db) out << detail::format_double(*r.snr_db);
    out << '\n';
  }
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot write manifest");
  write_manifest(out, m);
}

}  // namespace sdfl
