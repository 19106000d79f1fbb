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
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "polymix/audio.hpp"
#include "polymix/errors.hpp"
#include "polymix/rng.hpp"
#include "polymix/wav.hpp"
#include "support/audio_helpers.hpp"

using namespace polymix;
using namespace polymix::testing;

namespace {
const std::filesystem::path g_dir = temp_dir("polymix_audio_tests");
}

TEST_CASE("pcm16 decode divides by full scale") {
  const auto p = g_dir / "pcm16.wav";
  WavBuilder().fmt(1, 1, 44100, 16).data_pcm16({0, 16384, -32768}).write(p);
  const AudioClip c = load_wav(p);
  REQUIRE(c.samples.size() == 3);
  CHECK(c.samples[0] == 0.0);
  CHECK(c.samples[1] == 0.5);
  CHECK(c.samples[2] == -1.0);
  CHECK(c.sample_rate == 44100);
  CHECK(c.channels == 1);
}

TEST_CASE("one second at 44.1 kHz decodes to 44100 samples") {
  const auto p = g_dir / "one_sec.wav";
  std::vector<std::int16_t> samples(44100, 1000);
  WavBuilder().fmt(1, 1, 44100, 16).data_pcm16(samples).write(p);
  const AudioClip c = load_wav(p);
  CHECK(c.samples.size() == 44100);
  CHECK(c.sample_rate == 44100);
}

TEST_CASE("float32 samples decode exactly") {
  const auto p = g_dir / "f32.wav";
  WavBuilder().fmt(3, 1, 22050, 32).data_f32({0.25f, -0.75f, 1.0f}).write(p);
  const AudioClip c = load_wav(p);
  REQUIRE(c.samples.size() == 3);
  CHECK(c.samples[0] == 0.25);
  CHECK(c.samples[1] == -0.75);
  CHECK(c.samples[2] == 1.0);
}

TEST_CASE("pcm24 decode divides by 2^23") {
  const auto p = g_dir / "pcm24.wav";
  WavBuilder()
      .fmt(1, 1, 48000, 24)
      .data_pcm24({0, 4194304, -8388608, 8388607})
      .write(p);
  const AudioClip c = load_wav(p);
  REQUIRE(c.samples.size() == 4);
  CHECK(c.samples[0] == 0.0);
  CHECK(c.samples[1] == 0.5);
  CHECK(c.samples[2] == -1.0);
  CHECK(c.samples[3] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("stereo decode keeps both channels interleaved") {
  const auto p = g_dir / "stereo.wav";
  WavBuilder().fmt(1, 2, 44100, 16).data_pcm16({100, -100, 200, -200}).write(p);
  const AudioClip c = load_wav(p);
  CHECK(c.channels == 2);
  CHECK(c.frames() == 2);
  CHECK(c.samples[0] == doctest::Approx(100.0 / 32768.0));
  CHECK(c.samples[1] == doctest::Approx(-100.0 / 32768.0));
}

TEST_CASE("extensible header maps to the inner format") {
  const auto p = g_dir / "ext.wav";
  WavBuilder().fmt_extensible(1, 1, 44100, 16).data_pcm16({16384}).write(p);
  const AudioClip c = load_wav(p);
  REQUIRE(c.samples.size() == 1);
  CHECK(c.samples[0] == 0.5);
}

TEST_CASE("malformed files raise format errors") {
  SUBCASE("bad RIFF magic") {
    const auto p = g_dir / "bad_magic.wav";
    WavBuilder().fmt(1, 1, 44100, 16).data_pcm16({0}).write(p, "RIFX");
    CHECK_THROWS_AS(load_wav(p), FormatError);
  }
  SUBCASE("bad WAVE tag") {
    const auto p = g_dir / "bad_wave.wav";
    WavBuilder().fmt(1, 1, 44100, 16).data_pcm16({0}).write(p, "RIFF", "AIFF");
    CHECK_THROWS_AS(load_wav(p), FormatError);
  }
  SUBCASE("missing data chunk") {
    const auto p = g_dir / "no_data.wav";
    WavBuilder().fmt(1, 1, 44100, 16).write(p);
    CHECK_THROWS_AS(load_wav(p), FormatError);
  }
  SUBCASE("missing fmt chunk") {
    const auto p = g_dir / "no_fmt.wav";
    WavBuilder().data_pcm16({0}).write(p);
    CHECK_THROWS_AS(load_wav(p), FormatError);
  }
  SUBCASE("chunk size overruns the file") {
    const auto p = g_dir / "overrun.wav";
    std::vector<std::uint8_t> junk = {'d', 'a', 't', 'a', 0xFF, 0xFF, 0, 0};
    std::ofstream f(p, std::ios::binary);
    f.write("RIFF\x24\x00\x00\x00WAVE", 12);
    f.write(reinterpret_cast<const char*>(junk.data()),
            static_cast<std::streamsize>(junk.size()));
    f.close();
    CHECK_THROWS_AS(load_wav(p), FormatError);
  }
  SUBCASE("nonexistent file") {
    CHECK_THROWS_AS(load_wav(g_dir / "missing.wav"), FormatError);
  }
}

TEST_CASE("unsupported encodings are rejected distinctly") {
  SUBCASE("8-bit PCM") {
    const auto p = g_dir / "pcm8.wav";
    WavBuilder().fmt(1, 1, 44100, 8).raw_chunk("data", {0x80}).write(p);
    CHECK_THROWS_AS(load_wav(p), UnsupportedFormatError);
  }
  SUBCASE("a-law") {
    const auto p = g_dir / "alaw.wav";
    WavBuilder().fmt(6, 1, 8000, 8).raw_chunk("data", {0x55}).write(p);
    CHECK_THROWS_AS(load_wav(p), UnsupportedFormatError);
  }
  SUBCASE("three channels") {
    const auto p = g_dir / "threech.wav";
    WavBuilder().fmt(1, 3, 44100, 16).data_pcm16({0, 0, 0}).write(p);
    CHECK_THROWS_AS(load_wav(p), UnsupportedFormatError);
  }
}

TEST_CASE("save then load round-trips float samples exactly") {
  AudioClip c = make_sine(440.0, 0.25, 22050, 0.5);
  const auto p = g_dir / "roundtrip.wav";
  save_wav(c, p);
  const AudioClip back = load_wav(p);
  CHECK(back.sample_rate == c.sample_rate);
  REQUIRE(back.samples.size() == c.samples.size());
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    CHECK(back.samples[i] == static_cast<double>(static_cast<float>(c.samples[i])));
  }
}

TEST_CASE("standardize downmixes, resamples and hits the RMS target") {
  AudioClip mono = make_sine(440.0, 1.0, 44100, 0.5);
  AudioClip stereo;
  stereo.sample_rate = 44100;
  stereo.channels = 2;
  for (double s : mono.samples) {
    stereo.samples.push_back(s);
    stereo.samples.push_back(s);
  }
  const AudioClip out = standardize(stereo, 22050, 0.1);
  CHECK(out.channels == 1);
  CHECK(out.sample_rate == 22050);
  CHECK(out.samples.size() == 22050);
  CHECK(rms(out.samples) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(zero_crossing_freq(out) == doctest::Approx(440.0).epsilon(0.01));
}

TEST_CASE("standardize at the same rate is an RMS rescale only") {
  AudioClip c = make_sine(330.0, 0.5, 22050, 0.4);
  const AudioClip out = standardize(c, 22050, 0.1);
  REQUIRE(out.samples.size() == c.samples.size());
  const double scale = 0.1 / rms(c.samples);
  for (std::size_t i = 0; i < c.samples.size(); i += 371) {
    CHECK(out.samples[i] == doctest::Approx(c.samples[i] * scale).epsilon(1e-9));
  }
}

TEST_CASE("standardize is idempotent") {
  AudioClip c = make_sine(523.25, 0.7, 44100, 0.3);
  const AudioClip once = standardize(c, 22050, 0.1);
  const AudioClip twice = standardize(once, 22050, 0.1);
  REQUIRE(once.samples.size() == twice.samples.size());
  CHECK(std::abs(rms(once.samples) - rms(twice.samples)) < 1e-6);
  for (std::size_t i = 0; i < once.samples.size(); ++i) {
    CHECK(std::abs(once.samples[i] - twice.samples[i]) < 1e-6);
  }
}

TEST_CASE("standardize peak-limits spiky clips") {
  AudioClip c = make_const(1e-4, 22050, 22050);
  c.samples[100] = 0.9;  // lone spike keeps RMS tiny
  const AudioClip out = standardize(c, 22050, 0.1);
  CHECK(peak(out.samples) == doctest::Approx(1.0));
  const double expected_rms = rms(c.samples) / peak(c.samples);
  CHECK(rms(out.samples) == doctest::Approx(expected_rms).epsilon(1e-6));
  for (double s : out.samples) CHECK(std::abs(s) <= 1.0);
}

TEST_CASE("standardize rejects silence and empty input") {
  AudioClip zeros = make_const(0.0, 1000, 22050);
  CHECK_THROWS_AS(standardize(zeros, 22050, 0.1), SilentClipError);
  AudioClip empty;
  empty.sample_rate = 22050;
  CHECK_THROWS_AS(standardize(empty, 22050, 0.1), ContractError);
}

TEST_CASE("segment_clip cuts exact non-overlapping windows") {
  SUBCASE("three seconds yields three full segments") {
    AudioClip c = make_sine(220.0, 3.0, 22050, 0.5);
    const auto segs = segment_clip(c, 1.0);
    REQUIRE(segs.size() == 3);
    for (const auto& s : segs) CHECK(s.samples.size() == 22050);
  }
  SUBCASE("remainder is discarded") {
    AudioClip c = make_sine(220.0, 2.5, 22050, 0.5);
    CHECK(segment_clip(c, 1.0).size() == 2);
  }
  SUBCASE("short clip yields nothing") {
    AudioClip c = make_sine(220.0, 0.5, 22050, 0.5);
    CHECK(segment_clip(c, 1.0).empty());
  }
  SUBCASE("segments concatenate to a prefix of the input") {
    AudioClip c = make_sine(220.0, 2.25, 22050, 0.5);
    const auto segs = segment_clip(c, 0.5);
    std::size_t pos = 0;
    for (const auto& s : segs) {
      for (double v : s.samples) CHECK(v == c.samples[pos++]);
    }
    CHECK(pos == 4 * 11025);
  }
}

TEST_CASE("overlay sums and peak-limits") {
  SUBCASE("adding silence is the identity") {
    AudioClip x = make_sine(440.0, 0.1, 22050, 0.5);
    AudioClip silence = make_const(0.0, x.samples.size(), 22050);
    const AudioClip out = overlay(x, silence);
    for (std::size_t i = 0; i < x.samples.size(); ++i) {
      CHECK(out.samples[i] == x.samples[i]);
    }
  }
  SUBCASE("peak exactly 1 is not rescaled") {
    AudioClip a = make_const(0.5, 100, 22050);
    const AudioClip out = overlay(a, a);
    for (double s : out.samples) CHECK(s == 1.0);
  }
  SUBCASE("peak above 1 rescales to full scale") {
    AudioClip a = make_const(0.8, 100, 22050);
    const AudioClip out = overlay(a, a);
    for (double s : out.samples) CHECK(s == doctest::Approx(1.0));
  }
  SUBCASE("commutative sample-exact") {
    Rng rng(17);
    AudioClip a, b;
    a.sample_rate = b.sample_rate = 22050;
    for (int i = 0; i < 5000; ++i) {
      a.samples.push_back(rng.uniform(-1.0, 1.0));
      b.samples.push_back(rng.uniform(-1.0, 1.0));
    }
    const AudioClip ab = overlay(a, b);
    const AudioClip ba = overlay(b, a);
    for (std::size_t i = 0; i < ab.samples.size(); ++i) {
      CHECK(ab.samples[i] == ba.samples[i]);
    }
  }
  SUBCASE("mismatches are contract errors") {
    AudioClip a = make_const(0.1, 100, 22050);
    AudioClip b = make_const(0.1, 100, 44100);
    CHECK_THROWS_AS(overlay(a, b), ContractError);
    AudioClip c = make_const(0.1, 99, 22050);
    CHECK_THROWS_AS(overlay(a, c), ContractError);
  }
}

TEST_CASE("resample at the same rate is the identity") {
  AudioClip c = make_sine(440.0, 0.2, 22050, 0.5);
  const AudioClip out = resample(c, 22050);
  REQUIRE(out.samples.size() == c.samples.size());
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    CHECK(std::abs(out.samples[i] - c.samples[i]) < 1e-9);
  }
}

TEST_CASE("downsampled sine stays a sine of the same frequency") {
  AudioClip c = make_sine(440.0, 1.0, 44100, 0.5);
  const AudioClip out = resample(c, 22050);
  REQUIRE(out.samples.size() == 22050);
  // Project the interior onto sin/cos at 440 Hz; near-unit correlation
  // means the tone survived without aliases.
  double ss = 0, sc = 0, energy = 0;
  for (std::size_t i = 64; i + 64 < out.samples.size(); ++i) {
    const double ph = 2.0 * M_PI * 440.0 * static_cast<double>(i) / 22050.0;
    ss += out.samples[i] * std::sin(ph);
    sc += out.samples[i] * std::cos(ph);
    energy += out.samples[i] * out.samples[i];
  }
  const std::size_t n = out.samples.size() - 128;
  const double amp = 2.0 * std::sqrt(ss * ss + sc * sc) / static_cast<double>(n);
  const double tone_energy = amp * amp / 2.0 * static_cast<double>(n);
  CHECK(amp == doctest::Approx(0.5).epsilon(0.01));
  CHECK(tone_energy / energy > 0.999);
}

TEST_CASE("constant signals pass through interior resampling at unit gain") {
  std::vector<double> x(2000, 0.8);
  const auto y = resample_step(x, 0.7, 2500);
  for (std::size_t i = 100; i + 100 < y.size(); ++i) {
    CHECK(y[i] == doctest::Approx(0.8).epsilon(1e-9));
  }
  const auto z = resample_step(x, 1.31, 1400);
  for (std::size_t i = 100; i + 100 < z.size(); ++i) {
    CHECK(z[i] == doctest::Approx(0.8).epsilon(1e-9));
  }
}

TEST_CASE("rng streams are deterministic and well-behaved") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.uniform_int(13) < 13);
  }
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  Rng s1(9), s2(9);
  auto v1 = v, v2 = v;
  s1.shuffle(v1);
  s2.shuffle(v2);
  CHECK(v1 == v2);
  double mean = 0;
  Rng g(3);
  const int kDraws = 20000;
  double var = 0;
  std::vector<double> draws(kDraws);
  for (auto& d : draws) d = g.normal();
  for (double d : draws) mean += d;
  mean /= kDraws;
  for (double d : draws) var += (d - mean) * (d - mean);
  var /= kDraws;
  CHECK(std::abs(mean) < 0.03);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}
