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
#ifndef POLYMIX_MIXING_HPP_
#define POLYMIX_MIXING_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polymix/audio.hpp"
#include "polymix/dataset.hpp"
#include "polymix/labels.hpp"

namespace polymix {

enum class MixStrategy { kRandom, kGenre, kTempo, kPitch };

std::string_view to_string(MixStrategy strategy);
MixStrategy parse_strategy(std::string_view text);

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

/// Seeded shuffle of both index ranges zipped to the shorter length, so
/// no index repeats within the pairing.  Empty inputs pair to nothing.
PairList pair_random(std::size_t size_a, std::size_t size_b,
                     std::uint64_t seed);

/// Partition both sides by genre, pair within each bucket, and
/// concatenate in genre order.  A genre missing on either side
/// contributes no pairs.
PairList pair_genre(const std::vector<Genre>& genres_a,
                    const std::vector<Genre>& genres_b, std::uint64_t seed);

/// One mixed one-second training example with its provenance.
struct MixedRecord {
  AudioClip clip;
  LabelVector labels;  // exactly two bits set
  Genre genre = Genre::kClassical;
  std::string source_a;
  std::string source_b;
  MixStrategy strategy = MixStrategy::kRandom;
  std::string detail;  // shift plan or stretch ratio applied to source b
};

struct MixOptions {
  int max_per_pair = 0;  // cap on pairings per class pair; 0 = no cap
};

struct MixResult {
  std::vector<MixedRecord> records;
  int skipped_pairs = 0;  // pairs dropped because analysis failed
};

/// Mix every unordered pair of instrument classes present in the corpus.
/// Random and genre strategies overlay one-second segments; pitch aligns
/// b's pitch to a's before overlaying segments; tempo stretches b's
/// three-second parent to a's tempo, overlays, then segments.  Output
/// labels are the union of the two source labels.  Deterministic for a
/// fixed (corpus, strategy, seed).
MixResult build_mixed_dataset(const std::vector<ClipRecord>& corpus,
                              MixStrategy strategy, std::uint64_t seed,
                              const MixOptions& options = {});

/// One pitch-shifted monophonic training example.
struct AugmentRecord {
  AudioClip clip;
  LabelVector labels;  // single bit
  Genre genre = Genre::kClassical;
  std::string source;
  int shift = 0;
};

/// Draw `count` one-second segments round-robin from a shuffled corpus
/// and shift each by a value sampled from `semitones` (members of
/// {0, +-2, +-4, +-6}).  Labels are preserved.
std::vector<AugmentRecord> pitch_shift_augment(
    const std::vector<ClipRecord>& corpus, const std::vector<int>& semitones,
    std::size_t count, std::uint64_t seed);

/// Write WAVs plus a track manifest ("manifest.jsonl") under out_dir and
/// return the manifest records.
std::vector<TrackRecord> save_mixed(const std::vector<MixedRecord>& records,
                                    const std::filesystem::path& out_dir);

/// Same for pitch-shifted monophonic records, as a clip manifest.
std::vector<ClipRecord> save_augmented(
    const std::vector<AugmentRecord>& records,
    const std::filesystem::path& out_dir);

}  // namespace polymix

#endif  // POLYMIX_MIXING_HPP_
