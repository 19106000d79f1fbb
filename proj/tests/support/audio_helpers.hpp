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
#ifndef POLYMIX_TESTS_SUPPORT_AUDIO_HELPERS_HPP_
#define POLYMIX_TESTS_SUPPORT_AUDIO_HELPERS_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "polymix/audio.hpp"
#include "polymix/rng.hpp"

namespace polymix::testing {

inline AudioClip make_sine(double freq, double seconds, int rate,
                           double amplitude = 0.5, double phase = 0.0) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    clip.samples[i] =
        amplitude * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate +
                             phase);
  }
  return clip;
}

inline AudioClip make_const(double value, std::size_t n, int rate) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  clip.samples.assign(n, value);
  return clip;
}

inline AudioClip make_noise(std::size_t n, int rate, double amplitude,
                            std::uint64_t seed) {
  polymix::Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  clip.samples.resize(n);
  for (auto& s : clip.samples) s = amplitude * (2.0 * rng.uniform() - 1.0);
  return clip;
}

/// Decaying 1 kHz bursts on a beat grid; a crisp onset train for tempo
/// estimation tests.
inline AudioClip make_clicks(double bpm, double seconds, int rate,
                             double amplitude = 0.8) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  clip.samples.assign(n, 0.0);
  const double period = 60.0 / bpm;
  for (int beat = 0;; ++beat) {
    const double t0 = beat * period;
    const auto start = static_cast<std::size_t>(std::llround(t0 * rate));
    if (start >= n) break;
    const auto len = static_cast<std::size_t>(0.02 * rate);
    for (std::size_t i = 0; i < len && start + i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      clip.samples[start + i] += amplitude * std::exp(-t / 0.005) *
                                 std::sin(2.0 * M_PI * 1000.0 * t);
    }
  }
  return clip;
}

/// Amplitude of the component at frequency f via projection onto the
/// quadrature pair, skipping `skip` samples at each edge.
inline double tone_amplitude(const AudioClip& clip, double f,
                             std::size_t skip = 256) {
  double ss = 0.0, sc = 0.0;
  if (clip.samples.size() <= 2 * skip) return 0.0;
  const std::size_t n = clip.samples.size() - 2 * skip;
  for (std::size_t i = skip; i + skip < clip.samples.size(); ++i) {
    const double ph =
        2.0 * M_PI * f * static_cast<double>(i) / clip.sample_rate;
    ss += clip.samples[i] * std::sin(ph);
    sc += clip.samples[i] * std::cos(ph);
  }
  return 2.0 * std::sqrt(ss * ss + sc * sc) / static_cast<double>(n);
}

/// Frequency estimate from the mean distance between rising zero crossings.
inline double zero_crossing_freq(const AudioClip& clip) {
  std::vector<std::size_t> rising;
  for (std::size_t i = 1; i < clip.samples.size(); ++i) {
    if (clip.samples[i - 1] < 0.0 && clip.samples[i] >= 0.0) rising.push_back(i);
  }
  if (rising.size() < 2) return 0.0;
  const double span =
      static_cast<double>(rising.back() - rising.front());
  return static_cast<double>(rising.size() - 1) * clip.sample_rate / span;
}

/// Minimal WAV byte builder for crafting well-formed and malformed files.
class WavBuilder {
 public:
  WavBuilder& fmt(std::uint16_t format, std::uint16_t channels,
                  std::uint32_t rate, std::uint16_t bits) {
    std::vector<std::uint8_t> c;
    u16(c, format);
    u16(c, channels);
    u32(c, rate);
    u32(c, rate * channels * (bits / 8));
    u16(c, static_cast<std::uint16_t>(channels * (bits / 8)));
    u16(c, bits);
    chunk("fmt ", c);
    return *this;
  }

  WavBuilder& fmt_extensible(std::uint16_t sub_format, std::uint16_t channels,
                             std::uint32_t rate, std::uint16_t bits) {
    std::vector<std::uint8_t> c;
    u16(c, 0xFFFE);
    u16(c, channels);
    u32(c, rate);
    u32(c, rate * channels * (bits / 8));
    u16(c, static_cast<std::uint16_t>(channels * (bits / 8)));
    u16(c, bits);
    u16(c, 22);          // cbSize
    u16(c, bits);        // valid bits
    u32(c, 0);           // channel mask
    u16(c, sub_format);  // GUID starts with the format code
    u16(c, 0x0000);
    u32(c, 0x00100000);
    u32(c, 0xAA000080);
    u32(c, 0x719B3800);
    chunk("fmt ", c);
    return *this;
  }

  WavBuilder& data_pcm16(const std::vector<std::int16_t>& samples) {
    std::vector<std::uint8_t> c;
    for (std::int16_t s : samples) u16(c, static_cast<std::uint16_t>(s));
    chunk("data", c);
    return *this;
  }

  WavBuilder& data_pcm24(const std::vector<std::int32_t>& samples) {
    std::vector<std::uint8_t> c;
    for (std::int32_t s : samples) {
      c.push_back(static_cast<std::uint8_t>(s & 0xFF));
      c.push_back(static_cast<std::uint8_t>((s >> 8) & 0xFF));
      c.push_back(static_cast<std::uint8_t>((s >> 16) & 0xFF));
    }
    chunk("data", c);
    return *this;
  }

  WavBuilder& data_f32(const std::vector<float>& samples) {
    std::vector<std::uint8_t> c;
    for (float s : samples) {
      std::uint32_t bits;
      std::memcpy(&bits, &s, 4);
      u32(c, bits);
    }
    chunk("data", c);
    return *this;
  }

  WavBuilder& raw_chunk(const char* id, const std::vector<std::uint8_t>& c) {
    chunk(id, c);
    return *this;
  }

  std::vector<std::uint8_t> bytes(const char* magic = "RIFF",
                                  const char* wave = "WAVE") const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), magic, magic + 4);
    u32(out, static_cast<std::uint32_t>(4 + body_.size()));
    out.insert(out.end(), wave, wave + 4);
    out.insert(out.end(), body_.begin(), body_.end());
    return out;
  }

  void write(const std::filesystem::path& path, const char* magic = "RIFF",
             const char* wave = "WAVE") const {
    const auto b = bytes(magic, wave);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  }

 private:
  static void u16(std::vector<std::uint8_t>& o, std::uint16_t v) {
    o.push_back(static_cast<std::uint8_t>(v & 0xFF));
    o.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  static void u32(std::vector<std::uint8_t>& o, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      o.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
  }
  void chunk(const char* id, const std::vector<std::uint8_t>& c) {
    body_.insert(body_.end(), id, id + 4);
    u32(body_, static_cast<std::uint32_t>(c.size()));
    body_.insert(body_.end(), c.begin(), c.end());
    if (c.size() & 1) body_.push_back(0);
  }
  std::vector<std::uint8_t> body_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace polymix::testing

#endif  // POLYMIX_TESTS_SUPPORT_AUDIO_HELPERS_HPP_
