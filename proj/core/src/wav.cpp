/*
 * Copyright 2026 The Polymix Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "polymix/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "polymix/errors.hpp"

namespace polymix {
namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

FmtChunk parse_fmt(const std::uint8_t* p, std::uint32_t size) {
  if (size < 16) throw FormatError("fmt chunk too small");
  FmtChunk f;
  f.format = read_u16(p);
  f.channels = read_u16(p + 2);
  f.sample_rate = read_u32(p + 4);
  f.block_align = read_u16(p + 12);
  f.bits = read_u16(p + 14);
  if (f.format == kFormatExtensible) {
    // The real format code lives in the first two bytes of the SubFormat
    // GUID after the 22-byte extension header.
    if (size < 18) throw FormatError("extensible fmt chunk missing cbSize");
    const std::uint16_t cb = read_u16(p + 16);
    if (cb < 22 || size < 18u + 22u) {
      throw FormatError("extensible fmt chunk truncated");
    }
    f.format = read_u16(p + 24);
  }
  return f;
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  FmtChunk fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + size > bytes.size()) throw FormatError("truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      fmt = parse_fmt(bytes.data() + pos, size);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_size = size;
    }
    pos += size + (size & 1);  // chunks are word-aligned
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (data == nullptr) throw FormatError("missing data chunk");

  if (fmt.channels < 1 || fmt.channels > 2) {
    throw UnsupportedFormatError("unsupported channel count " +
                                 std::to_string(fmt.channels));
  }
  if (fmt.sample_rate == 0) throw FormatError("zero sample rate");

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool pcm24 = fmt.format == kFormatPcm && fmt.bits == 24;
  const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !pcm24 && !f32) {
    throw UnsupportedFormatError("unsupported encoding: format " +
                                 std::to_string(fmt.format) + ", " +
                                 std::to_string(fmt.bits) + " bits");
  }

  const std::uint32_t bytes_per_sample = fmt.bits / 8;
  const std::uint32_t frame_size = bytes_per_sample * fmt.channels;
  if (frame_size == 0 || data_size % frame_size != 0) {
    throw FormatError("data size is not a whole number of frames");
  }
  const std::size_t n = data_size / bytes_per_sample;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.channels = fmt.channels;
  clip.samples.resize(n);
  if (pcm16) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(data + 2 * i));
      clip.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (pcm24) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* s = data + 3 * i;
      std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      clip.samples[i] = static_cast<double>(v) / 8388608.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, data + 4 * i, 4);
      clip.samples[i] = static_cast<double>(v);
    }
  }
  return clip;
}

WavInfo wav_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::uint8_t head[12];
  if (!in.read(reinterpret_cast<char*>(head), 12) ||
      std::memcmp(head, "RIFF", 4) != 0 ||
      std::memcmp(head + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }
  FmtChunk fmt;
  bool have_fmt = false;
  std::uint32_t data_size = 0;
  bool have_data = false;
  std::uint8_t hdr[8];
  while (in.read(reinterpret_cast<char*>(hdr), 8)) {
    const std::uint32_t size = read_u32(hdr + 4);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      std::vector<std::uint8_t> body(size);
      if (!in.read(reinterpret_cast<char*>(body.data()), size)) {
        throw FormatError("truncated fmt chunk");
      }
      fmt = parse_fmt(body.data(), size);
      have_fmt = true;
      if (size & 1) in.seekg(1, std::ios::cur);
    } else {
      if (std::memcmp(hdr, "data", 4) == 0) {
        data_size = size;
        have_data = true;
      }
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) throw FormatError("missing fmt or data chunk");
  if (fmt.channels == 0 || fmt.bits == 0 || fmt.sample_rate == 0) {
    throw FormatError("degenerate fmt chunk");
  }
  WavInfo info;
  info.sample_rate = static_cast<int>(fmt.sample_rate);
  info.channels = fmt.channels;
  info.frames = data_size / (static_cast<std::uint32_t>(fmt.bits / 8) * fmt.channels);
  info.duration_s = static_cast<double>(info.frames) / info.sample_rate;
  return info;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  if (clip.channels < 1 || clip.sample_rate <= 0) {
    throw ContractError("save_wav: clip must have channels and a rate");
  }
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  const auto channels = static_cast<std::uint16_t>(clip.channels);
  const std::uint32_t byte_rate =
      static_cast<std::uint32_t>(clip.sample_rate) * channels * 4;

  std::vector<std::uint8_t> out;
  out.reserve(58 + 4 * n);
  const auto put_tag = [&out](const char* tag) {
    out.insert(out.end(), tag, tag + 4);
  };
  put_tag("RIFF");
  put_u32(out, 50 + 4 * n);  // fmt(26) + fact(12) + data header(8) + payload
  put_tag("WAVE");
  put_tag("fmt ");
  put_u32(out, 18);
  put_u16(out, kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, byte_rate);
  put_u16(out, static_cast<std::uint16_t>(channels * 4));
  put_u16(out, 32);
  put_u16(out, 0);  // cbSize
  put_tag("fact");
  put_u32(out, 4);
  put_u32(out, n / channels);
  put_tag("data");
  put_u32(out, 4 * n);
  for (double s : clip.samples) {
    const float v = static_cast<float>(s);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("short write to " + path.string());
}

}  // namespace polymix
