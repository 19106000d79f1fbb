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
#ifndef POLYMIX_WAV_HPP_
#define POLYMIX_WAV_HPP_

#include <cstdint>
#include <filesystem>

#include "polymix/audio.hpp"

namespace polymix {

/// Decode a RIFF/WAVE file.  Accepts PCM 16-bit, PCM 24-bit, and IEEE
/// float 32-bit, 1 or 2 channels, any rate; integer samples are divided
/// by full scale.  Throws FormatError on malformed structure and
/// UnsupportedFormatError on any other encoding.
AudioClip load_wav(const std::filesystem::path& path);

/// Encode as IEEE float 32-bit WAV at the clip's own rate and channel
/// count.  Output bytes depend only on the clip contents.
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Header-only probe; decodes no samples.
struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  std::uint64_t frames = 0;
  double duration_s = 0.0;
};

WavInfo wav_info(const std::filesystem::path& path);

}  // namespace polymix

#endif  // POLYMIX_WAV_HPP_
