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
#include "polymix/pitch.hpp"

#include <algorithm>
#include <cmath>

#include "polymix/errors.hpp"
#include "polymix/phase_vocoder.hpp"

namespace polymix {
namespace {

constexpr int kRate = 22050;
constexpr double kHopSamples = 220.5;  // 10 ms at 22050 Hz
constexpr int kAnalysisWindow = 1411;  // 64 ms
constexpr int kIntegration = 1024;     // difference-function support
constexpr int kTauMax = kAnalysisWindow - kIntegration;  // 387 -> 57 Hz
constexpr int kTauMin = 18;                              // ~1225 Hz
constexpr double kVoicedThreshold = 0.15;
constexpr int kMaxShift = 24;
constexpr long long kCrossfadeHalf = 110;  // 5 ms at 22050 Hz

std::size_t expected_frames(std::size_t n_samples) {
  if (n_samples < kAnalysisWindow) return 0;
  // Frame i starts at round(i * hop); count frames fully inside.
  std::size_t count = 0;
  for (std::size_t i = 0;; ++i) {
    const auto start = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * kHopSamples));
    if (start + kAnalysisWindow > n_samples) break;
    ++count;
  }
  return count;
}

long long frame_to_sample(std::size_t frame) {
  return std::llround(static_cast<double>(frame) * kHopSamples);
}

/// Pitch-shift a chunk by factor f preserving its length: lengthen by f
/// with the phase vocoder, then read it back at step f.
std::vector<double> shift_chunk(const std::vector<double>& x, int semitones) {
  const double f = std::pow(2.0, semitones / 12.0);
  const auto stretched_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) * f));
  const std::vector<double> stretched = pv_stretch(x, 1.0 / f, stretched_len);
  return resample_step(stretched, f, x.size());
}

}  // namespace

PitchTrack track_pitch(const AudioClip& clip) {
  if (clip.channels != 1) throw ContractError("track_pitch expects mono");
  if (clip.sample_rate != kRate) {
    throw ContractError("track_pitch expects 22050 Hz input");
  }
  PitchTrack track;
  const std::size_t n = clip.samples.size();
  const std::size_t n_frames = expected_frames(n);
  track.f0.reserve(n_frames);
  track.confidence.reserve(n_frames);

  std::vector<double> diff(kTauMax + 1), cmndf(kTauMax + 1);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double* x = clip.samples.data() + frame_to_sample(i);

    diff[0] = 0.0;
    for (int tau = 1; tau <= kTauMax; ++tau) {
      double acc = 0.0;
      for (int t = 0; t < kIntegration; ++t) {
        const double d = x[t] - x[t + tau];
        acc += d * d;
      }
      diff[static_cast<std::size_t>(tau)] = acc;
    }

    cmndf[0] = 1.0;
    double cumulative = 0.0;
    for (int tau = 1; tau <= kTauMax; ++tau) {
      cumulative += diff[static_cast<std::size_t>(tau)];
      cmndf[static_cast<std::size_t>(tau)] =
          cumulative > 0.0
              ? diff[static_cast<std::size_t>(tau)] * tau / cumulative
              : 1.0;
    }

    int best = -1;
    for (int tau = kTauMin; tau <= kTauMax; ++tau) {
      if (cmndf[static_cast<std::size_t>(tau)] < kVoicedThreshold) {
        while (tau + 1 <= kTauMax &&
               cmndf[static_cast<std::size_t>(tau + 1)] <
                   cmndf[static_cast<std::size_t>(tau)]) {
          ++tau;
        }
        best = tau;
        break;
      }
    }

    double min_d = 1.0;
    for (int tau = kTauMin; tau <= kTauMax; ++tau) {
      min_d = std::min(min_d, cmndf[static_cast<std::size_t>(tau)]);
    }
    const double confidence = std::clamp(1.0 - min_d, 0.0, 1.0);

    if (best < 0) {
      track.f0.push_back(0.0);
      track.confidence.push_back(confidence);
      continue;
    }
    double tau_refined = best;
    if (best > kTauMin && best < kTauMax) {
      const double dm = cmndf[static_cast<std::size_t>(best - 1)];
      const double d0 = cmndf[static_cast<std::size_t>(best)];
      const double dp = cmndf[static_cast<std::size_t>(best + 1)];
      const double denom = dm - 2.0 * d0 + dp;
      if (std::abs(denom) > 1e-12) {
        tau_refined += std::clamp(0.5 * (dm - dp) / denom, -1.0, 1.0);
      }
    }
    track.f0.push_back(kRate / tau_refined);
    track.confidence.push_back(confidence);
  }
  return track;
}

std::vector<int> compute_shift_track(const PitchTrack& a,
                                     const PitchTrack& b) {
  if (a.frames() != b.frames()) {
    throw ContractError("compute_shift_track: frame count mismatch");
  }
  std::vector<int> shifts(a.frames(), 0);
  for (std::size_t i = 0; i < a.frames(); ++i) {
    const double f1 = a.f0[i];
    const double f2 = b.f0[i];
    if (f1 > 0.0 && f2 > 0.0) {
      shifts[i] = static_cast<int>(std::lround(12.0 * std::log2(f1 / f2)));
    }
  }
  return shifts;
}

ShiftPlan smooth_shift_track(const std::vector<int>& raw) {
  if (raw.empty()) throw ContractError("smooth_shift_track: empty input");
  const std::size_t n = raw.size();

  // Median filter, kernel 9; the window shrinks symmetrically near the
  // edges so it always stays centered and odd-sized.
  std::vector<int> filtered(n);
  std::vector<int> window;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r =
        std::min<std::size_t>(4, std::min(i, n - 1 - i));
    window.assign(raw.begin() + static_cast<long>(i - r),
                  raw.begin() + static_cast<long>(i + r + 1));
    std::sort(window.begin(), window.end());
    filtered[i] = window[r];
  }

  ShiftPlan plan;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == n || filtered[i] != filtered[start]) {
      plan.segments.push_back({start, i, filtered[start]});
      start = i;
    }
  }

  // Merge left to right until stable: a segment joins its predecessor
  // when shifts differ by <= 1 or it runs shorter than 7 frames (70 ms);
  // the predecessor's shift always wins.  A short leading segment has no
  // predecessor and survives.
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<ShiftSegment> merged;
    merged.reserve(plan.segments.size());
    merged.push_back(plan.segments.front());
    for (std::size_t j = 1; j < plan.segments.size(); ++j) {
      const ShiftSegment& cur = plan.segments[j];
      ShiftSegment& prev = merged.back();
      const std::size_t duration = cur.end_frame - cur.start_frame;
      if (std::abs(cur.shift - prev.shift) <= 1 || duration < 7) {
        prev.end_frame = cur.end_frame;
        changed = true;
      } else {
        merged.push_back(cur);
      }
    }
    plan.segments = std::move(merged);
  }
  return plan;
}

AudioClip apply_pitch_shift(const AudioClip& clip, const ShiftPlan& plan) {
  if (clip.channels != 1) throw ContractError("apply_pitch_shift expects mono");
  if (clip.sample_rate != kRate) {
    throw ContractError("apply_pitch_shift expects 22050 Hz input");
  }
  if (plan.segments.empty()) {
    throw ContractError("apply_pitch_shift: empty plan");
  }
  const std::size_t n = clip.samples.size();
  if (plan.n_frames() != expected_frames(n) || plan.segments[0].start_frame != 0) {
    throw ContractError("apply_pitch_shift: plan does not cover the clip");
  }
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const ShiftSegment& s = plan.segments[i];
    if (s.end_frame <= s.start_frame ||
        (i > 0 && s.start_frame != plan.segments[i - 1].end_frame)) {
      throw ContractError("apply_pitch_shift: plan segments not contiguous");
    }
    if (std::abs(s.shift) > kMaxShift) {
      throw OutOfRangeError("pitch shift beyond +/-24 semitones");
    }
  }

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.channels = 1;
  out.samples.assign(n, 0.0);

  const std::size_t n_segments = plan.segments.size();
  for (std::size_t i = 0; i < n_segments; ++i) {
    const ShiftSegment& seg = plan.segments[i];
    const long long a = frame_to_sample(seg.start_frame);
    const long long b = (i + 1 == n_segments)
                            ? static_cast<long long>(n)
                            : frame_to_sample(seg.end_frame);
    if (b <= a) continue;
    // Chunks extend half a crossfade past each internal boundary; the
    // complementary linear ramps below sum to one over each overlap.
    const long long ca = (i == 0) ? 0 : std::max<long long>(0, a - kCrossfadeHalf);
    const long long cb = (i + 1 == n_segments)
                             ? static_cast<long long>(n)
                             : std::min<long long>(static_cast<long long>(n),
                                                   b + kCrossfadeHalf);
    std::vector<double> chunk(
        clip.samples.begin() + static_cast<long>(ca),
        clip.samples.begin() + static_cast<long>(cb));
    if (seg.shift != 0) chunk = shift_chunk(chunk, seg.shift);

    for (long long t = 0; t < static_cast<long long>(chunk.size()); ++t) {
      const long long p = ca + t;
      double w = 1.0;
      if (i > 0 && p < a + kCrossfadeHalf) {
        w = std::min(w, (static_cast<double>(p - (a - kCrossfadeHalf)) + 0.5) /
                            static_cast<double>(2 * kCrossfadeHalf));
      }
      if (i + 1 < n_segments && p >= b - kCrossfadeHalf) {
        w = std::min(w, (static_cast<double>((b + kCrossfadeHalf) - p) - 0.5) /
                            static_cast<double>(2 * kCrossfadeHalf));
      }
      out.samples[static_cast<std::size_t>(p)] +=
          w * chunk[static_cast<std::size_t>(t)];
    }
  }
  return out;
}

AudioClip mix_pitch_sync(const AudioClip& a, const AudioClip& b) {
  if (a.sample_rate != b.sample_rate || a.samples.size() != b.samples.size()) {
    throw ContractError("mix_pitch_sync: clips must share rate and length");
  }
  const PitchTrack ta = track_pitch(a);
  const PitchTrack tb = track_pitch(b);
  if (ta.frames() == 0) return overlay(a, b);

  const std::vector<int> raw = compute_shift_track(ta, tb);
  const ShiftPlan plan = smooth_shift_track(raw);
  const AudioClip shifted = apply_pitch_shift(b, plan);
  return overlay(a, shifted);
}

std::size_t pitch_frames(std::size_t n_samples) {
  return expected_frames(n_samples);
}

}  // namespace polymix
