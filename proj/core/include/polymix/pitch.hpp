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
#ifndef POLYMIX_PITCH_HPP_
#define POLYMIX_PITCH_HPP_

#include <cstddef>
#include <vector>

#include "polymix/audio.hpp"

namespace polymix {

/// Per-frame fundamental estimates on a fixed 10 ms hop; f0 == 0 marks
/// an unvoiced frame.
struct PitchTrack {
  static constexpr double kHopSeconds = 0.010;
  std::vector<double> f0;
  std::vector<double> confidence;

  std::size_t frames() const { return f0.size(); }
};

/// Piecewise-constant integer-semitone schedule over 10 ms frames.
struct ShiftSegment {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;  // exclusive
  int shift = 0;
};

struct ShiftPlan {
  std::vector<ShiftSegment> segments;

  std::size_t n_frames() const {
    return segments.empty() ? 0 : segments.back().end_frame;
  }
};

/// Normalized-difference autocorrelation tracker over 64 ms windows at a
/// 10 ms hop.  Frames whose minimum normalized difference stays above
/// 0.15 are unvoiced; confidence is 1 minus that minimum.  Clips shorter
/// than one analysis window give an empty track.  Requires mono 22050 Hz.
PitchTrack track_pitch(const AudioClip& clip);

/// Number of tracker frames a clip of n_samples yields; a valid ShiftPlan
/// for that clip must cover exactly this many frames.
std::size_t pitch_frames(std::size_t n_samples);

/// Per-frame rounded semitone interval moving b's pitch onto a's:
/// round(12*log2(f1/f2)) when both frames are voiced, else 0.
std::vector<int> compute_shift_track(const PitchTrack& a, const PitchTrack& b);

/// Median-filter (kernel 9, shrinking symmetric windows at the edges),
/// run-length encode, then merge left-to-right to a fixed point: a
/// segment joins its predecessor when their shifts differ by at most 1
/// or when it is shorter than 7 frames, keeping the predecessor's shift.
ShiftPlan smooth_shift_track(const std::vector<int>& raw);

/// Shift each plan segment by 2^(s/12) via phase-vocoder stretch plus
/// resampling, cross-fading 10 ms at the seams.  Output length equals
/// input length exactly.  |shift| > 24 is out of range.
AudioClip apply_pitch_shift(const AudioClip& clip, const ShiftPlan& plan);

/// Full pipeline: track both, plan the shift of b onto a, apply, overlay.
AudioClip mix_pitch_sync(const AudioClip& a, const AudioClip& b);

}  // namespace polymix

#endif  // POLYMIX_PITCH_HPP_
