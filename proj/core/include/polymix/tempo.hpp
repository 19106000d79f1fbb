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
#ifndef POLYMIX_TEMPO_HPP_
#define POLYMIX_TEMPO_HPP_

#include <vector>

#include "polymix/audio.hpp"

namespace polymix {

constexpr double kBpmMin = 60.0;
constexpr double kBpmMax = 180.0;

struct TempoEstimate {
  double bpm = 0.0;       // always within [kBpmMin, kBpmMax]
  double strength = 0.0;  // autocorrelation peak value
};

/// Tempo from the autocorrelation of a mean-subtracted, half-wave
/// rectified spectral-flux envelope (STFT 2048/512).  Among the octave
/// candidates {bpm, bpm/2, 2bpm} that land in range, the one nearest
/// 120 BPM wins when peak strengths are within 10%.  Requires mono
/// 22050 Hz and at least 2 s of audio; silence raises NoTempoError.
TempoEstimate estimate_bpm(const AudioClip& clip);

/// Phase-vocoder speed change: output duration = input / ratio, pitch
/// preserved.  Ratio outside [0.5, 2] raises OutOfRangeError.
AudioClip time_stretch(const AudioClip& clip, double ratio);

/// Force an exact duration: truncate, or append copies of the clip's
/// beginning until target_s is reached.
AudioClip fit_duration(const AudioClip& clip, double target_s);

/// Align b's tempo to a (stretch ratio chosen among x1, x2, x1/2 of a's
/// BPM to stay nearest unity), fit both to 3 s, overlay, and cut into
/// 1-sec segments.  NoTempoError from either estimate propagates.
std::vector<AudioClip> mix_tempo_sync(const AudioClip& a, const AudioClip& b);

/// The stretch ratio mix_tempo_sync would apply to b; exposed for tests
/// and provenance reporting.  Always lies in [0.5, 2].
double tempo_sync_ratio(double bpm_a, double bpm_b);

}  // namespace polymix

#endif  // POLYMIX_TEMPO_HPP_
