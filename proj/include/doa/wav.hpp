#pragma once

// Minimal RIFF/WAVE PCM reader and writer (16- and 24-bit integer samples).
// Samples are exchanged as doubles in [-1, 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "doa/errors.hpp"

namespace doa {

struct WavData {
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  std::vector<std::vector<double>> channels;

  std::size_t frames() const noexcept { return channels.empty() ? 0 : channels.front().size(); }
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace detail

/// Parses a PCM WAVE image held in memory.
inline WavData parse_wav(const std::vector<unsigned char>& bytes) {
  auto fail = [](const std::string& why) { return Error(ErrorCode::MalformedWav, why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("missing RIFF/WAVE header");

  const unsigned char* fmt = nullptr;
  std::size_t fmt_size = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size > available) throw fail("truncated fmt chunk");
      fmt = chunk + 8;
      fmt_size = size;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min(size, available);  // tolerate streaming writers
    }
    if (size > available) break;
    pos = body + size + (size & 1u);
  }
  if (!fmt || fmt_size < 16) throw fail("missing fmt chunk");
  if (!data) throw fail("missing data chunk");

  std::uint16_t format = detail::read_u16(fmt);
  const std::uint16_t channels = detail::read_u16(fmt + 2);
  const std::uint32_t rate = detail::read_u32(fmt + 4);
  const std::uint16_t block_align = detail::read_u16(fmt + 12);
  const std::uint16_t bits = detail::read_u16(fmt + 14);
  if (format == 0xFFFE) {
    if (fmt_size < 40) throw fail("short WAVE_FORMAT_EXTENSIBLE header");
    format = detail::read_u16(fmt + 24);  // first two bytes of the subformat GUID
  }
  if (format != 1) throw fail("only integer PCM is supported (format " + std::to_string(format) + ")");
  if (bits != 16 && bits != 24) throw fail("unsupported bit depth " + std::to_string(bits));
  if (channels == 0) throw fail("zero channels");
  if (rate == 0) throw fail("zero sample rate");
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != channels * bytes_per_sample) throw fail("inconsistent block alignment");

  WavData out;
  out.sample_rate = rate;
  out.bits_per_sample = bits;
  const std::size_t frames = data_size / block_align;
  out.channels.assign(channels, std::vector<double>(frames));
  const double scale = bits == 16 ? 1.0 / 32768.0 : 1.0 / 8388608.0;
  for (std::size_t f = 0; f < frames; ++f) {
    const unsigned char* frame = data + f * block_align;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = frame + c * bytes_per_sample;
      std::int32_t v;
      if (bits == 16) {
        v = static_cast<std::int16_t>(detail::read_u16(s));
      } else {
        v = static_cast<std::int32_t>(std::uint32_t(s[0]) << 8 | std::uint32_t(s[1]) << 16 |
                                      std::uint32_t(s[2]) << 24) >> 8;
      }
      out.channels[c][f] = v * scale;
    }
  }
  return out;
}

inline WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::FileNotFound, path.string());
    throw Error(ErrorCode::MalformedWav, "cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

/// Encodes channels (equal length, samples clipped to [-1, 1)) as PCM.
inline std::string encode_wav(const std::vector<std::vector<double>>& channels,
                              std::uint32_t sample_rate, std::uint16_t bits = 16) {
  if (channels.empty()) throw Error(ErrorCode::InvalidArgument, "no channels to write");
  if (bits != 16 && bits != 24) throw Error(ErrorCode::InvalidArgument, "bits must be 16 or 24");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != frames) throw Error(ErrorCode::InvalidArgument, "channel lengths differ");
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bytes_per_sample = bits / 8;
  const std::uint16_t block = static_cast<std::uint16_t>(nch * bytes_per_sample);
  const auto data_size = static_cast<std::uint32_t>(frames * block);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, nch);
  detail::put_u32(out, sample_rate);
  detail::put_u32(out, sample_rate * block);
  detail::put_u16(out, block);
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_size);
  const double full = bits == 16 ? 32768.0 : 8388608.0;
  for (std::size_t f = 0; f < frames; ++f)
    for (const auto& c : channels) {
      const double clipped = std::clamp(c[f], -1.0, 1.0);
      const auto v = static_cast<std::int32_t>(
          std::clamp(std::lround(clipped * full), -static_cast<long>(full),
                     static_cast<long>(full) - 1));
      for (int b = 0; b < bytes_per_sample; ++b)
        out.push_back(static_cast<char>((static_cast<std::uint32_t>(v) >> (8 * b)) & 0xFF));
    }
  return out;
}

inline void write_wav(const std::filesystem::path& path,
                      const std::vector<std::vector<double>>& channels, std::uint32_t sample_rate,
                      std::uint16_t bits = 16) {
  const std::string bytes = encode_wav(channels, sample_rate, bits);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace doa
