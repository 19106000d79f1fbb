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
#ifndef POLYMIX_SYNTH_HPP_
#define POLYMIX_SYNTH_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "polymix/audio.hpp"
#include "polymix/dataset.hpp"
#include "polymix/labels.hpp"

namespace polymix {

/// Ground truth recorded alongside each generated clip.
struct SynthTruth {
  std::string path;
  Instrument instrument = Instrument::kCel;
  Genre genre = Genre::kClassical;
  int midi = 0;
  double f0_hz = 0.0;
  int bpm = 0;
};

struct SynthResult {
  std::vector<ClipRecord> records;
  std::vector<SynthTruth> truths;
};

/// Generate `counts[i]` three-second 44.1 kHz mono clips per instrument
/// using additive synthesis: class-specific harmonic recipe and register,
/// fundamental drawn from the equal-tempered scale, and an amplitude
/// pulse train at an integer tempo in [60, 180] BPM.  Genres rotate
/// round-robin within each class.  Byte-identical output given a seed.
SynthResult synth_corpus(const std::filesystem::path& out_dir,
                         const std::array<int, kNumInstruments>& counts,
                         std::uint64_t seed);

/// Render one clip in memory; exposed for tests and poly-track synthesis.
AudioClip synth_clip(Instrument instrument, int midi, int bpm,
                     double seconds = 3.0, int rate = 44100);

/// MIDI range an instrument's fundamentals are drawn from.
void instrument_register(Instrument instrument, int& midi_lo, int& midi_hi);

/// Generate two-instrument overlap tracks for held-out evaluation.  Each
/// track overlays clips of two distinct instruments; its label vector
/// carries both.
std::vector<TrackRecord> synth_poly_tracks(
    const std::filesystem::path& out_dir, int n_tracks, std::uint64_t seed);

void save_truth(const std::vector<SynthTruth>& truths,
                const std::filesystem::path& path);
std::vector<SynthTruth> load_truth(const std::filesystem::path& path);

}  // namespace polymix

#endif  // POLYMIX_SYNTH_HPP_
