#pragma once

#include "sdfl/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sdfl {

inline constexpr std::uint32_t kSampleRate = 16000;

/// Mono audio at 16 kHz.
struct Waveform {
  std::vector<float> samples;
  std::uint32_t sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Waveform&) const = default;
};

enum class SampleFormat { pcm16, float32 };

/// Raw decoded contents of a WAV file, interleaved.
struct WavData {
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  SampleFormat format = SampleFormat::float32;
  std::vector<float> interleaved;

  std::size_t frames() const { return channels ? interleaved.size() / channels : 0; }
};

namespace detail {

inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

/// Decodes a RIFF/WAVE byte buffer (PCM16 or IEEE float32, any channel count).
inline WavData decode_wav(const std::vector<unsigned char>& bytes, const std::string& origin) {
  auto fail = [&](const std::string& m) -> DataError { return DataError(origin + ": " + m); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = detail::le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate a truncated data chunk; anything else is malformed.
      if (std::memcmp(hdr, "data", 4) != 0) throw fail("chunk overruns file");
    }
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw fail("fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      tag = detail::le16(f);
      channels = detail::le16(f + 2);
      rate = detail::le32(f + 4);
      bits = detail::le16(f + 14);
      if (tag == detail::kFormatExtensible) {
        if (avail < 26) throw fail("extensible fmt chunk too short");
        tag = detail::le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      payload = bytes.data() + body;
      payload_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (!payload) throw fail("missing data chunk");
  if (channels == 0) throw fail("zero channels");

  WavData out;
  out.channels = channels;
  out.sample_rate = rate;
  if (tag == detail::kFormatPcm && bits == 16) {
    out.format = SampleFormat::pcm16;
    const std::size_t n = payload_size / 2;
    out.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(detail::le16(payload + 2 * i));
      out.interleaved[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (tag == detail::kFormatFloat && bits == 32) {
    out.format = SampleFormat::float32;
    const std::size_t n = payload_size / 4;
    out.interleaved.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.interleaved[i] = std::bit_cast<float>(detail::le32(payload + 4 * i));
    }
  } else {
    throw fail("unsupported codec (format tag " + std::to_string(tag) + ", " +
               std::to_string(bits) + " bits); only PCM16 and float32 are supported");
  }
  out.interleaved.resize(out.frames() * channels);
  return out;
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline WavData read_wav_data(const std::filesystem::path& path) {
  return decode_wav(read_file_bytes(path), path.string());
}

inline void require_rate(std::uint32_t rate, const std::string& origin) {
  if (rate != kSampleRate) {
    throw DataError(origin + ": sample rate " + std::to_string(rate) +
                    " Hz is not supported; resample to 16000 Hz externally");
  }
}

/// Reads a 16 kHz mono file. Stereo input is rejected; see stereo_split.
inline Waveform read_wav(const std::filesystem::path& path) {
  const auto d = read_wav_data(path);
  require_rate(d.sample_rate, path.string());
  if (d.channels != 1) {
    throw DataError(path.string() + ": " + std::to_string(d.channels) +
                    "-channel file; only mono is accepted (split stereo files first)");
  }
  return Waveform{d.interleaved, d.sample_rate};
}

/// Splits a 16 kHz stereo file into its (left, right) mono channels.
inline std::pair<Waveform, Waveform> stereo_split(const std::filesystem::path& path) {
  const auto d = read_wav_data(path);
  require_rate(d.sample_rate, path.string());
  if (d.channels != 2) {
    throw DataError(path.string() + ": stereo_split needs 2 channels, file has " +
                    std::to_string(d.channels));
  }
  Waveform l, r;
  const std::size_t n = d.frames();
  l.samples.resize(n);
  r.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    l.samples[i] = d.interleaved[2 * i];
    r.samples[i] = d.interleaved[2 * i + 1];
  }
  return {std::move(l), std::move(r)};
}

inline std::int16_t to_pcm16(float x) {
  const double v = std::nearbyint(static_cast<double>(x) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

inline std::vector<unsigned char> encode_wav(std::span<const float> interleaved, std::uint16_t channels,
                                             std::uint32_t rate, SampleFormat format) {
  const std::uint16_t bytes_per = format == SampleFormat::pcm16 ? 2 : 4;
  const auto data_size = static_cast<std::uint32_t>(interleaved.size() * bytes_per);
  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put32(out, 16);
  detail::put16(out, format == SampleFormat::pcm16 ? detail::kFormatPcm : detail::kFormatFloat);
  detail::put16(out, channels);
  detail::put32(out, rate);
  detail::put32(out, rate * channels * bytes_per);
  detail::put16(out, static_cast<std::uint16_t>(channels * bytes_per));
  detail::put16(out, static_cast<std::uint16_t>(8 * bytes_per));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put32(out, data_size);
  for (float x : interleaved) {
    if (format == SampleFormat::pcm16) {
      detail::put16(out, static_cast<std::uint16_t>(to_pcm16(x)));
    } else {
      detail::put32(out, std::bit_cast<std::uint32_t>(x));
    }
  }
  return out;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w,
                      SampleFormat format = SampleFormat::float32) {
  write_file_bytes(path, encode_wav(w.samples, 1, w.sample_rate, format));
}

}  // namespace sdfl
