// SPDX-License-Identifier: Apache-2.0
#include "bwc/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>

#include "bwc/error.hpp"

namespace bwc::wav {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF),
                              static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), b.size());
}

void put16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  out.write(b.data(), b.size());
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  throw Error(Errc::corrupt_data, path.string() + ": " + what);
}

}  // namespace

Info probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());

  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(Errc::io, "cannot stat " + path.string());

  std::array<unsigned char, 12> riff{};
  if (!in.read(reinterpret_cast<char*>(riff.data()), riff.size()))
    corrupt(path, "short RIFF header");
  if (std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0)
    corrupt(path, "not a RIFF/WAVE file");

  std::optional<Format> format;
  std::uint64_t offset = 12;
  while (offset + 8 <= file_size) {
    std::array<unsigned char, 8> header{};
    in.seekg(static_cast<std::streamoff>(offset));
    if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) break;
    const std::uint32_t size = le32(header.data() + 4);
    const std::uint64_t body = offset + 8;

    if (std::memcmp(header.data(), "fmt ", 4) == 0) {
      if (size < 16) corrupt(path, "fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size)) corrupt(path, "truncated fmt chunk");
      std::uint16_t tag = le16(fmt.data());
      if (tag == kFormatExtensible) {
        if (size < 26) corrupt(path, "extensible fmt chunk too small");
        tag = le16(fmt.data() + 24);
      }
      Format f;
      f.channels = le16(fmt.data() + 2);
      f.sample_rate = le32(fmt.data() + 4);
      f.bits_per_sample = le16(fmt.data() + 14);
      f.is_float = tag == kFormatFloat;
      if (tag != kFormatPcm && tag != kFormatFloat) corrupt(path, "unsupported sample encoding");
      if (f.channels == 0 || f.sample_rate == 0) corrupt(path, "zero channels or sample rate");
      if (f.is_float ? f.bits_per_sample != 32
                     : (f.bits_per_sample != 8 && f.bits_per_sample != 16 &&
                        f.bits_per_sample != 24 && f.bits_per_sample != 32))
        corrupt(path, "unsupported bit depth");
      format = f;
    } else if (std::memcmp(header.data(), "data", 4) == 0) {
      if (!format) corrupt(path, "data chunk precedes fmt chunk");
      if (body + size > file_size) corrupt(path, "truncated data chunk");
      const std::uint64_t frame_bytes =
          static_cast<std::uint64_t>(format->channels) * (format->bits_per_sample / 8);
      Info info;
      info.format = *format;
      info.frames = size / frame_bytes;
      info.data_offset = body;
      return info;
    }
    offset = body + size + (size & 1U);
  }
  corrupt(path, "missing fmt or data chunk");
}

Audio read(const std::filesystem::path& path) {
  const Info info = probe(path);
  std::ifstream in(path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(info.data_offset));

  const std::size_t width = info.format.bits_per_sample / 8;
  const std::size_t count = static_cast<std::size_t>(info.frames) * info.format.channels;
  std::vector<unsigned char> raw(count * width);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    corrupt(path, "short read in data chunk");

  Audio audio;
  audio.format = info.format;
  audio.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = raw.data() + i * width;
    float v = 0.0f;
    if (info.format.is_float) {
      const std::uint32_t bits = le32(p);
      std::memcpy(&v, &bits, sizeof v);
    } else {
      switch (width) {
        case 1: v = (static_cast<float>(p[0]) - 128.0f) / 128.0f; break;
        case 2: v = static_cast<float>(static_cast<std::int16_t>(le16(p))) / 32768.0f; break;
        case 3: {
          std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
          if (s & 0x800000) s -= 0x1000000;
          v = static_cast<float>(s) / 8388608.0f;
          break;
        }
        default:
          v = static_cast<float>(static_cast<double>(static_cast<std::int32_t>(le32(p))) /
                                 2147483648.0);
      }
    }
    audio.samples[i] = v;
  }
  return audio;
}

std::int16_t to_pcm16(float sample) noexcept {
  const float scaled = std::nearbyint(sample * 32768.0f);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0f, 32767.0f));
}

void write_pcm16(const std::filesystem::path& path, std::uint32_t sample_rate,
                 std::uint16_t channels, std::span<const float> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());

  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, channels);
  put32(out, sample_rate);
  put32(out, sample_rate * channels * 2);
  put16(out, static_cast<std::uint16_t>(channels * 2));
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);

  std::vector<char> buf(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(to_pcm16(samples[i]));
    buf[2 * i] = static_cast<char>(v & 0xFF);
    buf[2 * i + 1] = static_cast<char>(v >> 8);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::io, "short write to " + path.string());
}

}  // namespace bwc::wav
