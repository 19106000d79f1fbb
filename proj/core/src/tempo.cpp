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
#include "polymix/tempo.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "polymix/errors.hpp"
#include "polymix/fft.hpp"
#include "polymix/phase_vocoder.hpp"

namespace polymix {
namespace {

constexpr int kRate = 22050;
constexpr int kFftSize = 2048;
constexpr int kHop = 512;

struct Peak {
  double lag = 0.0;
  double strength = 0.0;
};

/// Parabolic refinement of an autocorrelation maximum at integer lag l.
Peak refine_peak(const std::vector<double>& acf, int l) {
  Peak p{static_cast<double>(l), acf[static_cast<std::size_t>(l)]};
  if (l <= 0 || l + 1 >= static_cast<int>(acf.size())) return p;
  const double ym = acf[static_cast<std::size_t>(l - 1)];
  const double y0 = acf[static_cast<std::size_t>(l)];
  const double yp = acf[static_cast<std::size_t>(l + 1)];
  const double denom = ym - 2.0 * y0 + yp;
  if (std::abs(denom) < 1e-12) return p;
  const double off = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
  p.lag = l + off;
  p.strength = y0 - 0.25 * (ym - yp) * off;
  return p;
}

}  // namespace

TempoEstimate estimate_bpm(const AudioClip& clip) {
  if (clip.channels != 1) throw ContractError("estimate_bpm expects mono");
  if (clip.sample_rate != kRate) {
    throw ContractError("estimate_bpm expects 22050 Hz input");
  }
  const std::size_t n = clip.samples.size();
  if (n < 2 * static_cast<std::size_t>(kRate)) {
    throw ContractError("estimate_bpm requires at least 2 s of audio");
  }

  const int n_frames = static_cast<int>((n - kFftSize) / kHop) + 1;
  const std::vector<double> window = hann_window(kFftSize);
  RealFft fft(kFftSize);
  const int bins = fft.bins();

  // Half-wave rectified spectral flux: energy arriving per hop.
  std::vector<double> frame(kFftSize);
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(bins));
  std::vector<double> prev_mag(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> envelope;
  envelope.reserve(static_cast<std::size_t>(n_frames));
  double magnitude_scale = 0.0;
  for (int t = 0; t < n_frames; ++t) {
    const double* x = clip.samples.data() + static_cast<std::size_t>(t) * kHop;
    for (int i = 0; i < kFftSize; ++i) {
      frame[static_cast<std::size_t>(i)] = window[static_cast<std::size_t>(i)] * x[i];
    }
    fft.forward(frame.data(), spectrum.data());
    double flux = 0.0, total = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double m = std::abs(spectrum[static_cast<std::size_t>(b)]);
      flux += std::max(0.0, m - prev_mag[static_cast<std::size_t>(b)]);
      total += m;
      prev_mag[static_cast<std::size_t>(b)] = m;
    }
    magnitude_scale = std::max(magnitude_scale, total);
    if (t > 0) envelope.push_back(flux);
  }

  // An unmodulated signal has a flat envelope: silence and DC give zero
  // flux, and steady tones leak only window-slide interference, measured
  // below 2e-3 of the frame magnitude. Genuine note onsets drive flux to
  // 0.4x the frame magnitude or more, so 1e-2 separates the two regimes
  // by over an order of magnitude on each side.
  double flux_peak = 0.0;
  for (double e : envelope) flux_peak = std::max(flux_peak, e);
  if (flux_peak <= 1e-2 * magnitude_scale) {
    throw NoTempoError("flat onset envelope");
  }

  double mean = 0.0;
  for (double e : envelope) mean += e;
  mean /= static_cast<double>(envelope.size());
  for (double& e : envelope) e -= mean;

  const int env_len = static_cast<int>(envelope.size());
  const double fps = static_cast<double>(kRate) / kHop;
  const int lag_min = std::max(
      2, static_cast<int>(std::floor(60.0 * fps / kBpmMax)));
  const int lag_max = std::min(
      env_len - 2, static_cast<int>(std::ceil(60.0 * fps / kBpmMin)));
  if (lag_max <= lag_min) throw ContractError("estimate_bpm: clip too short");

  const int acf_len = std::min(env_len, 2 * lag_max + 2);
  std::vector<double> acf(static_cast<std::size_t>(acf_len), 0.0);
  for (int l = 0; l < acf_len; ++l) {
    double acc = 0.0;
    for (int t = 0; t + l < env_len; ++t) {
      acc += envelope[static_cast<std::size_t>(t)] *
             envelope[static_cast<std::size_t>(t + l)];
    }
    acf[static_cast<std::size_t>(l)] = acc;
  }
  if (!(acf[0] > 0.0) || !std::isfinite(acf[0])) {
    throw NoTempoError("flat onset envelope");
  }

  int best_lag = lag_min;
  for (int l = lag_min; l <= lag_max; ++l) {
    if (acf[static_cast<std::size_t>(l)] > acf[static_cast<std::size_t>(best_lag)]) {
      best_lag = l;
    }
  }
  const Peak base = refine_peak(acf, best_lag);

  // Metrical ambiguity: consider half and double tempo where their lags
  // exist, keep candidates inside the range, prefer the one nearest
  // 120 BPM among strengths within 10% of the best.
  std::vector<Peak> candidates;
  const auto consider = [&](double lag) {
    const int l = static_cast<int>(std::llround(lag));
    if (l < 2 || l + 1 >= acf_len) return;
    const Peak p = refine_peak(acf, l);
    const double bpm = 60.0 * fps / p.lag;
    if (bpm >= kBpmMin - 0.5 && bpm <= kBpmMax + 0.5) candidates.push_back(p);
  };
  consider(base.lag);
  consider(base.lag * 2.0);
  consider(base.lag / 2.0);
  if (candidates.empty()) candidates.push_back(base);

  double s_max = 0.0;
  for (const Peak& p : candidates) s_max = std::max(s_max, p.strength);
  const Peak* chosen = nullptr;
  for (const Peak& p : candidates) {
    if (s_max > 0.0 && p.strength < 0.9 * s_max) continue;
    if (chosen == nullptr) {
      chosen = &p;
      continue;
    }
    const double bpm_p = 60.0 * fps / p.lag;
    const double bpm_c = 60.0 * fps / chosen->lag;
    if (std::abs(bpm_p - 120.0) < std::abs(bpm_c - 120.0)) chosen = &p;
  }
  if (chosen == nullptr) chosen = &candidates.front();

  TempoEstimate est;
  est.bpm = std::clamp(60.0 * fps / chosen->lag, kBpmMin, kBpmMax);
  est.strength = chosen->strength;
  return est;
}

AudioClip time_stretch(const AudioClip& clip, double ratio) {
  if (clip.channels != 1) throw ContractError("time_stretch expects mono");
  if (!(ratio >= 0.5 && ratio <= 2.0)) {
    throw OutOfRangeError("time_stretch ratio must lie in [0.5, 2]");
  }
  if (ratio == 1.0) return clip;
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.channels = 1;
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.samples.size()) / ratio));
  out.samples = pv_stretch(clip.samples, ratio, n_out);
  return out;
}

AudioClip fit_duration(const AudioClip& clip, double target_s) {
  if (clip.samples.empty()) throw ContractError("fit_duration: empty clip");
  if (clip.channels != 1) throw ContractError("fit_duration expects mono");
  const auto target = static_cast<std::size_t>(
      std::llround(target_s * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.channels = 1;
  out.samples.resize(target);
  const std::size_t n = clip.samples.size();
  for (std::size_t i = 0; i < target; ++i) {
    out.samples[i] = clip.samples[i % n];
  }
  return out;
}

double tempo_sync_ratio(double bpm_a, double bpm_b) {
  double best_ratio = bpm_a / bpm_b;
  for (const double m : {2.0, 0.5}) {
    const double r = m * bpm_a / bpm_b;
    if (std::abs(r - 1.0) < std::abs(best_ratio - 1.0)) best_ratio = r;
  }
  // With both BPMs in [60, 180] the nearest-to-unity multiple always
  // lands inside the legal stretch range.
  if (!(best_ratio >= 0.5 && best_ratio <= 2.0)) {
    throw ComputeError("tempo ratio escaped [0.5, 2]");
  }
  return best_ratio;
}

std::vector<AudioClip> mix_tempo_sync(const AudioClip& a, const AudioClip& b) {
  if (a.sample_rate != b.sample_rate) {
    throw ContractError("mix_tempo_sync: sample rate mismatch");
  }
  const TempoEstimate ta = estimate_bpm(a);
  const TempoEstimate tb = estimate_bpm(b);
  const double ratio = tempo_sync_ratio(ta.bpm, tb.bpm);

  const AudioClip a3 = fit_duration(a, 3.0);
  const AudioClip b3 = fit_duration(time_stretch(b, ratio), 3.0);
  const AudioClip mixed = overlay(a3, b3);
  return segment_clip(mixed, 1.0);
}

}  // namespace polymix
