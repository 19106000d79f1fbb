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
#include "polymix/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "polymix/errors.hpp"

namespace polymix {
namespace {

// Windowed-sinc interpolation kernel: 64 taps around each output point,
// tabulated at 512 fractional phases with linear interpolation between
// rows.  Each phase row is normalized to unit sum so constant signals
// pass through with exactly unit gain away from the edges.
constexpr int kHalfTaps = 32;
constexpr int kTaps = 2 * kHalfTaps;
constexpr int kPhases = 512;
constexpr double kKaiserBeta = 9.0;
constexpr double kRolloff = 0.9;

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-16) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

std::vector<double> build_kernel_rows(double fc) {
  const double i0_beta = bessel_i0(kKaiserBeta);
  std::vector<double> rows(static_cast<std::size_t>(kPhases + 1) * kTaps, 0.0);
  for (int p = 0; p <= kPhases; ++p) {
    const double f = static_cast<double>(p) / kPhases;
    double sum = 0.0;
    double* row = rows.data() + static_cast<std::size_t>(p) * kTaps;
    for (int k = 0; k < kTaps; ++k) {
      const double tau = f - (k - (kHalfTaps - 1));
      const double u = tau / kHalfTaps;
      if (std::abs(u) > 1.0) continue;
      const double w = bessel_i0(kKaiserBeta * std::sqrt(1.0 - u * u)) / i0_beta;
      row[k] = fc * sinc(fc * tau) * w;
      sum += row[k];
    }
    for (int k = 0; k < kTaps; ++k) row[k] /= sum;
  }
  return rows;
}

std::vector<double> downmix(const AudioClip& clip) {
  if (clip.channels == 1) return clip.samples;
  const std::size_t n = clip.frames();
  std::vector<double> mono(n);
  const double inv = 1.0 / clip.channels;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int c = 0; c < clip.channels; ++c) {
      acc += clip.samples[i * clip.channels + c];
    }
    mono[i] = acc * inv;
  }
  return mono;
}

void clamp_full_scale(std::vector<double>& x) {
  for (double& s : x) s = std::clamp(s, -1.0, 1.0);
}

}  // namespace

double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double s : x) acc += s * s;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double peak(const std::vector<double>& x) {
  double m = 0.0;
  for (double s : x) m = std::max(m, std::abs(s));
  return m;
}

std::vector<double> resample_step(const std::vector<double>& x, double step,
                                  std::size_t n_out) {
  if (step <= 0.0) throw ContractError("resample: step must be positive");
  const double fc = kRolloff * std::min(1.0, 1.0 / step);
  const std::vector<double> rows = build_kernel_rows(fc);
  const auto n_in = static_cast<long long>(x.size());

  std::vector<double> y(n_out, 0.0);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * step;
    const auto i0 = static_cast<long long>(std::floor(t));
    const double frac = t - static_cast<double>(i0);
    const double pf = frac * kPhases;
    int p0 = static_cast<int>(pf);
    if (p0 > kPhases - 1) p0 = kPhases - 1;
    const double w = pf - p0;
    const double* r0 = rows.data() + static_cast<std::size_t>(p0) * kTaps;
    const double* r1 = r0 + kTaps;
    double acc = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      const long long i = i0 + k - (kHalfTaps - 1);
      if (i < 0 || i >= n_in) continue;
      acc += x[static_cast<std::size_t>(i)] * ((1.0 - w) * r0[k] + w * r1[k]);
    }
    y[n] = acc;
  }
  return y;
}

AudioClip resample(const AudioClip& clip, int out_rate) {
  if (clip.channels != 1) throw ContractError("resample expects mono input");
  if (out_rate <= 0) throw ContractError("resample: rate must be positive");
  if (out_rate == clip.sample_rate) return clip;
  const double ratio =
      static_cast<double>(out_rate) / static_cast<double>(clip.sample_rate);
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.samples.size()) * ratio));
  AudioClip out;
  out.sample_rate = out_rate;
  out.channels = 1;
  out.samples = resample_step(clip.samples, 1.0 / ratio, n_out);
  return out;
}

AudioClip standardize(const AudioClip& clip, int target_rate,
                      double target_rms) {
  if (clip.samples.empty() || clip.sample_rate <= 0) {
    throw ContractError("standardize: empty clip");
  }
  if (target_rate <= 0 || target_rms <= 0) {
    throw ContractError("standardize: target rate and RMS must be positive");
  }
  AudioClip mono;
  mono.sample_rate = clip.sample_rate;
  mono.channels = 1;
  mono.samples = downmix(clip);
  if (mono.sample_rate != target_rate) mono = resample(mono, target_rate);

  const double level = rms(mono.samples);
  if (level == 0.0) throw SilentClipError("standardize: all-zero clip");
  const double pk = peak(mono.samples);
  // Scale to the RMS target unless that would push the peak past full
  // scale; in that case land the peak exactly at 1 instead.
  const double scale = std::min(target_rms / level, 1.0 / pk);
  for (double& s : mono.samples) s *= scale;
  clamp_full_scale(mono.samples);
  return mono;
}

std::vector<AudioClip> segment_clip(const AudioClip& clip,
                                    double seg_seconds) {
  if (clip.channels != 1) throw ContractError("segment_clip expects mono");
  if (seg_seconds <= 0) throw ContractError("segment_clip: bad length");
  const auto seg_len = static_cast<std::size_t>(
      std::llround(seg_seconds * clip.sample_rate));
  if (seg_len == 0) throw ContractError("segment_clip: zero-sample segment");
  const std::size_t count = clip.samples.size() / seg_len;
  std::vector<AudioClip> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    seg.channels = 1;
    seg.samples.assign(clip.samples.begin() + static_cast<long>(i * seg_len),
                       clip.samples.begin() +
                           static_cast<long>((i + 1) * seg_len));
    out.push_back(std::move(seg));
  }
  return out;
}

AudioClip overlay(const AudioClip& a, const AudioClip& b) {
  if (a.channels != 1 || b.channels != 1) {
    throw ContractError("overlay expects mono inputs");
  }
  if (a.sample_rate != b.sample_rate) {
    throw ContractError("overlay: sample rate mismatch");
  }
  if (a.samples.size() != b.samples.size()) {
    throw ContractError("overlay: length mismatch");
  }
  AudioClip out;
  out.sample_rate = a.sample_rate;
  out.channels = 1;
  out.samples.resize(a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    out.samples[i] = a.samples[i] + b.samples[i];
  }
  const double pk = peak(out.samples);
  if (pk > 1.0) {
    const double scale = 1.0 / pk;
    for (double& s : out.samples) s *= scale;
    clamp_full_scale(out.samples);
  }
  return out;
}

}  // namespace polymix
