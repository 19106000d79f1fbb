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
#ifndef POLYMIX_DATASET_HPP_
#define POLYMIX_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polymix/labels.hpp"

namespace polymix {

constexpr int kSplitUnassigned = -2;
constexpr int kSplitTest = -1;

/// One monophonic corpus entry.  split is a fold index >= 0, kSplitTest,
/// or kSplitUnassigned.
struct ClipRecord {
  std::string path;
  Instrument instrument = Instrument::kCel;
  Genre genre = Genre::kClassical;
  double duration_s = 0.0;
  int split = kSplitUnassigned;
};

/// One multi-label track entry (mixes, held-out polyphonic tracks).
struct TrackRecord {
  std::string path;
  LabelVector labels;
  Genre genre = Genre::kClassical;
  double duration_s = 0.0;
  int split = kSplitUnassigned;
  std::string provenance;  // free-form origin note, e.g. source pair
};

/// Line-delimited JSON manifest of monophonic clips.  Unknown instrument
/// or genre tokens raise ValidationError naming the 1-based line.
std::vector<ClipRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<ClipRecord>& records,
                   const std::filesystem::path& path);

/// Same encoding with a "labels" array instead of "instrument".
std::vector<TrackRecord> load_track_manifest(
    const std::filesystem::path& path);
void save_track_manifest(const std::vector<TrackRecord>& records,
                         const std::filesystem::path& path);

/// Parallel spectrogram / label-vector store, one file per split.
struct FeatureStore {
  std::uint32_t rows = 96;
  std::uint32_t cols = 87;
  std::vector<std::vector<float>> features;  // each rows*cols, row-major
  std::vector<LabelVector> labels;

  std::size_t count() const { return features.size(); }
};

void write_store(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore read_store(const std::filesystem::path& path);

struct IngestResult {
  std::vector<ClipRecord> records;
  std::vector<std::string> warnings;
};

/// Adapt a corpus laid out as class-named folders of WAVs whose filenames
/// carry bracketed genre tags (e.g. "[cel][cla]0042__1.wav").  Files with
/// no recognizable genre tag are skipped with a warning.
IngestResult ingest_irmas(const std::filesystem::path& root);

}  // namespace polymix

#endif  // POLYMIX_DATASET_HPP_
