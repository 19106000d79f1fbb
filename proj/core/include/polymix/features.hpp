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
#ifndef POLYMIX_FEATURES_HPP_
#define POLYMIX_FEATURES_HPP_

#include <vector>

#include "polymix/audio.hpp"

namespace polymix {

inline constexpr int kCqtBins = 96;
inline constexpr int kCqtFrames = 87;  // floor(22050 / 256) + 1
inline constexpr int kCqtBinsPerOctave = 12;
inline constexpr int kCqtHop = 256;
inline constexpr double kCqtFMin = 32.703;  // C1

/// Constant-Q magnitudes scaled into [0, 1], row-major [bin][frame].
struct Spectrogram {
  std::vector<double> data;

  double at(int bin, int frame) const {
    return data[static_cast<std::size_t>(bin) * kCqtFrames +
                static_cast<std::size_t>(frame)];
  }
  std::vector<float> to_floats() const {
    return std::vector<float>(data.begin(), data.end());
  }
};

/// Center frequency of bin k: f_min * 2^(k/12).
double cqt_bin_frequency(int bin);

/// Constant-Q magnitude matrix of a one-second mono 22050 Hz clip:
/// 96 log-spaced bins (Q = 1/(2^(1/12)-1)) correlated against Hann-
/// windowed complex kernels at hop 256 with centered, reflect-padded
/// analysis.  Direct time-domain correlation.
std::vector<double> cqt(const AudioClip& clip);

/// Same transform computed through FFT-domain sparse kernels; agrees
/// with cqt() within 1e-6 of the peak magnitude.  Kept as an
/// independently-derived cross-check of the correlation route.
std::vector<double> cqt_fft(const AudioClip& clip);

/// 20*log10(mag/max) floored at -80 dB and mapped affinely onto [0, 1];
/// an all-zero matrix stays all zero.
Spectrogram scale_db(const std::vector<double>& mag);

}  // namespace polymix

#endif  // POLYMIX_FEATURES_HPP_
