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
#ifndef POLYMIX_AUDIO_HPP_
#define POLYMIX_AUDIO_HPP_

#include <cstddef>
#include <vector>

namespace polymix {

/// A decoded waveform.  Multi-channel data is interleaved; every DSP
/// operation past standardize() assumes channels == 1.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  int channels = 1;

  std::size_t frames() const {
    return channels > 0 ? samples.size() / static_cast<std::size_t>(channels)
                        : 0;
  }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0;
  }
};

constexpr int kDefaultRate = 22050;
constexpr double kDefaultRms = 0.1;

double rms(const std::vector<double>& x);
double peak(const std::vector<double>& x);

/// Band-limited resampling of a mono signal read at positions n*step for
/// n in [0, n_out).  step > 1 compresses (fewer samples out per sample in)
/// and lowers the anti-alias cutoff accordingly.  Samples beyond either
/// edge are treated as zero.
std::vector<double> resample_step(const std::vector<double>& x, double step,
                                  std::size_t n_out);

/// Resample a mono clip to out_rate, preserving duration (rounded length).
/// Identity when the rate already matches.
AudioClip resample(const AudioClip& clip, int out_rate);

/// Downmix to mono (channel mean), resample to target_rate, scale so
/// RMS = target_rms, then uniformly rescale so peak = 1 if the scale
/// pushed any sample past full scale.
AudioClip standardize(const AudioClip& clip, int target_rate = kDefaultRate,
                      double target_rms = kDefaultRms);

/// Split a mono clip into floor(duration/seg_seconds) consecutive
/// segments of exactly seg_seconds each; the remainder is dropped.
std::vector<AudioClip> segment_clip(const AudioClip& clip,
                                    double seg_seconds);

/// Sample-wise sum of two equal-rate, equal-length mono clips, with a
/// uniform rescale to peak 1 when the sum exceeds full scale.
AudioClip overlay(const AudioClip& a, const AudioClip& b);

}  // namespace polymix

#endif  // POLYMIX_AUDIO_HPP_
