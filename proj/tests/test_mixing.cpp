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
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "polymix/errors.hpp"
#include "polymix/mixing.hpp"
#include "polymix/pitch.hpp"
#include "polymix/synth.hpp"
#include "polymix/tempo.hpp"
#include "polymix/wav.hpp"
#include "support/audio_helpers.hpp"

using namespace polymix;
using namespace polymix::testing;

namespace {

ClipRecord write_clip(const AudioClip& clip, const std::filesystem::path& dir,
                      const std::string& name, Instrument inst, Genre genre) {
  const auto path = dir / name;
  save_wav(clip, path);
  ClipRecord r;
  r.path = path.string();
  r.instrument = inst;
  r.genre = genre;
  r.duration_s = clip.duration_s();
  return r;
}

// Rebuild the one-second segment a provenance id ("path#k") refers to.
AudioClip segment_by_id(const std::string& id) {
  const auto hash = id.rfind('#');
  REQUIRE(hash != std::string::npos);
  const std::string path = id.substr(0, hash);
  const auto k = static_cast<std::size_t>(std::stoul(id.substr(hash + 1)));
  auto parts = segment_clip(standardize(load_wav(path)), 1.0);
  REQUIRE(k < parts.size());
  return parts[k];
}

}  // namespace

TEST_CASE("random pairing zips shuffled sets to the shorter length") {
  const PairList pairs = pair_random(300, 200, 11);
  REQUIRE(pairs.size() == 200);
  std::set<std::size_t> used_a, used_b;
  for (const auto& [a, b] : pairs) {
    CHECK(a < 300);
    CHECK(b < 200);
    used_a.insert(a);
    used_b.insert(b);
  }
  // No source repeats within the pairing.
  CHECK(used_a.size() == pairs.size());
  CHECK(used_b.size() == pairs.size());

  CHECK(pair_random(300, 200, 11) == pairs);
  CHECK(pair_random(300, 200, 12) != pairs);

  const PairList one = pair_random(1, 1, 5);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::pair<std::size_t, std::size_t>{0, 0});

  CHECK(pair_random(0, 5, 3).empty());
  CHECK(pair_random(5, 0, 3).empty());
}

TEST_CASE("genre pairing matches within buckets only") {
  const Genre cl = Genre::kClassical;
  const Genre jb = Genre::kJazzBlues;
  const Genre pr = Genre::kPopRock;

  // {classical: 5, jazz_blues: 3} against {classical: 4} -> 4 pairs,
  // all classical.
  std::vector<Genre> a = {cl, cl, jb, cl, jb, cl, jb, cl};
  std::vector<Genre> b = {cl, cl, cl, cl};
  const PairList pairs = pair_genre(a, b, 42);
  REQUIRE(pairs.size() == 4);
  for (const auto& [pa, pb] : pairs) {
    CHECK(a[pa] == cl);
    CHECK(b[pb] == cl);
  }

  // Single shared genre degenerates to the random count.
  std::vector<Genre> mono_a(7, pr), mono_b(5, pr);
  CHECK(pair_genre(mono_a, mono_b, 7).size() ==
        pair_random(7, 5, 7).size());

  // Disjoint supports pair nothing.
  std::vector<Genre> only_cl(4, cl), only_jb(6, jb);
  CHECK(pair_genre(only_cl, only_jb, 7).empty());
}

TEST_CASE("mixed dataset covers every class pair with min counts") {
  const auto dir = temp_dir("polymix_mixing_full");
  std::array<int, kNumInstruments> counts{};
  for (int c = 0; c < kNumInstruments; ++c) counts[(std::size_t)c] = 2 + c % 2;
  const SynthResult corpus = synth_corpus(dir, counts, 99);

  const MixResult mixed =
      build_mixed_dataset(corpus.records, MixStrategy::kRandom, 1234);
  CHECK(mixed.skipped_pairs == 0);

  // Count records per unordered class pair; segments are 3 per clip.
  std::map<std::pair<int, int>, int> per_pair;
  for (const MixedRecord& rec : mixed.records) {
    REQUIRE(rec.labels.count() == 2);
    std::vector<int> set_bits;
    for (int c = 0; c < kNumInstruments; ++c) {
      if (rec.labels.test(static_cast<Instrument>(c))) set_bits.push_back(c);
    }
    ++per_pair[{set_bits[0], set_bits[1]}];
    CHECK(rec.clip.samples.size() == 22050);
    CHECK(rec.strategy == MixStrategy::kRandom);
  }
  CHECK(per_pair.size() == 55);
  std::size_t expected_total = 0;
  for (int i = 0; i < kNumInstruments; ++i) {
    for (int j = i + 1; j < kNumInstruments; ++j) {
      const int expect = 3 * std::min(counts[(std::size_t)i],
                                      counts[(std::size_t)j]);
      CHECK(per_pair[{i, j}] == expect);
      expected_total += (std::size_t)expect;
    }
  }
  CHECK(mixed.records.size() == expected_total);
}

TEST_CASE("two classes give one pair class and one class is rejected") {
  const auto dir = temp_dir("polymix_mixing_two");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kSax, 58, 100), dir,
                               "a.wav", Instrument::kSax,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kCla, 60, 120), dir,
                               "b.wav", Instrument::kCla,
                               Genre::kClassical));
  const MixResult mixed =
      build_mixed_dataset(records, MixStrategy::kRandom, 7);
  CHECK(mixed.records.size() == 3);  // min(3, 3) segments
  for (const MixedRecord& rec : mixed.records) {
    CHECK(rec.labels.test(Instrument::kSax));
    CHECK(rec.labels.test(Instrument::kCla));
  }

  records.pop_back();
  CHECK_THROWS_AS(build_mixed_dataset(records, MixStrategy::kRandom, 7),
                  ContractError);
}

TEST_CASE("genre strategy pairs genre buckets") {
  const auto dir = temp_dir("polymix_mixing_genre");
  std::vector<ClipRecord> records;
  // cel: 6 classical + 3 pop_rock segments; flu: 3 classical + 6 jazz.
  records.push_back(write_clip(synth_clip(Instrument::kCel, 38, 90), dir,
                               "cel0.wav", Instrument::kCel,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kCel, 40, 110), dir,
                               "cel1.wav", Instrument::kCel,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kCel, 42, 130), dir,
                               "cel2.wav", Instrument::kCel,
                               Genre::kPopRock));
  records.push_back(write_clip(synth_clip(Instrument::kFlu, 74, 80), dir,
                               "flu0.wav", Instrument::kFlu,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kFlu, 76, 100), dir,
                               "flu1.wav", Instrument::kFlu,
                               Genre::kJazzBlues));
  records.push_back(write_clip(synth_clip(Instrument::kFlu, 78, 120), dir,
                               "flu2.wav", Instrument::kFlu,
                               Genre::kJazzBlues));

  const MixResult genre =
      build_mixed_dataset(records, MixStrategy::kGenre, 5);
  CHECK(genre.records.size() == 3);  // classical bucket: min(6, 3)
  for (const MixedRecord& rec : genre.records) {
    CHECK(rec.genre == Genre::kClassical);
  }

  const MixResult random =
      build_mixed_dataset(records, MixStrategy::kRandom, 5);
  CHECK(random.records.size() == 9);  // min(9, 9)
}

TEST_CASE("pitch strategy matches the composed pipeline") {
  const auto dir = temp_dir("polymix_mixing_pitch");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kSax, 58, 100), dir,
                               "sax.wav", Instrument::kSax,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kCla, 60, 120), dir,
                               "cla.wav", Instrument::kCla,
                               Genre::kPopRock));

  const MixResult mixed =
      build_mixed_dataset(records, MixStrategy::kPitch, 31);
  REQUIRE(mixed.records.size() + (std::size_t)mixed.skipped_pairs == 3);
  CHECK(!mixed.records.empty());
  for (const MixedRecord& rec : mixed.records) {
    CHECK(rec.labels.count() == 2);
    CHECK(rec.detail.substr(0, 5) == "plan=");
    const AudioClip a = segment_by_id(rec.source_a);
    const AudioClip b = segment_by_id(rec.source_b);
    const AudioClip reference = mix_pitch_sync(a, b);
    REQUIRE(rec.clip.samples.size() == reference.samples.size());
    CHECK(rec.clip.samples == reference.samples);
  }
}

TEST_CASE("pitch strategy skips out-of-range intervals") {
  const auto dir = temp_dir("polymix_mixing_pitch_skip");
  std::vector<ClipRecord> records;
  // cel at 65 Hz against flu at 740 Hz: a 42-semitone interval, beyond
  // the +-24 shifting range.
  records.push_back(write_clip(synth_clip(Instrument::kCel, 36, 90), dir,
                               "cel.wav", Instrument::kCel,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kFlu, 79, 120), dir,
                               "flu.wav", Instrument::kFlu,
                               Genre::kClassical));
  const MixResult mixed =
      build_mixed_dataset(records, MixStrategy::kPitch, 3);
  CHECK(mixed.records.empty());
  CHECK(mixed.skipped_pairs == 3);
}

TEST_CASE("tempo strategy stretches b onto a's grid") {
  const auto dir = temp_dir("polymix_mixing_tempo");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kCel, 40, 120), dir,
                               "a.wav", Instrument::kCel,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kVoi, 55, 80), dir,
                               "b.wav", Instrument::kVoi,
                               Genre::kPopRock));

  const MixResult mixed =
      build_mixed_dataset(records, MixStrategy::kTempo, 17);
  CHECK(mixed.skipped_pairs == 0);
  REQUIRE(mixed.records.size() == 3);  // one pair, three segments

  const AudioClip a = standardize(load_wav(records[0].path));
  const AudioClip b = standardize(load_wav(records[1].path));
  const double ratio =
      tempo_sync_ratio(estimate_bpm(a).bpm, estimate_bpm(b).bpm);
  const AudioClip mixed3 =
      overlay(fit_duration(a, 3.0), fit_duration(time_stretch(b, ratio), 3.0));
  const auto parts = segment_clip(mixed3, 1.0);
  REQUIRE(parts.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const MixedRecord& rec = mixed.records[k];
    CHECK(rec.labels.count() == 2);
    CHECK(rec.clip.samples == parts[k].samples);
    REQUIRE(rec.detail.substr(0, 6) == "ratio=");
    CHECK(std::stod(rec.detail.substr(6)) == ratio);
  }
}

TEST_CASE("tempo strategy counts unanalyzable pairs") {
  const auto dir = temp_dir("polymix_mixing_tempo_skip");
  // A steady tone has a flat onset envelope: no tempo to latch onto.
  std::vector<ClipRecord> records;
  records.push_back(write_clip(make_sine(330.0, 3.0, 44100, 0.4), dir,
                               "steady.wav", Instrument::kCel,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kVoi, 55, 80), dir,
                               "b.wav", Instrument::kVoi,
                               Genre::kClassical));
  const MixResult mixed =
      build_mixed_dataset(records, MixStrategy::kTempo, 17);
  CHECK(mixed.records.empty());
  CHECK(mixed.skipped_pairs == 1);
}

TEST_CASE("mixing is deterministic in corpus, strategy, and seed") {
  const auto dir = temp_dir("polymix_mixing_det");
  std::array<int, kNumInstruments> counts{};
  counts[(std::size_t)Instrument::kSax] = 2;
  counts[(std::size_t)Instrument::kCla] = 2;
  counts[(std::size_t)Instrument::kPia] = 1;
  const SynthResult corpus = synth_corpus(dir, counts, 3);

  const MixResult first =
      build_mixed_dataset(corpus.records, MixStrategy::kRandom, 88);
  const MixResult second =
      build_mixed_dataset(corpus.records, MixStrategy::kRandom, 88);
  REQUIRE(first.records.size() == second.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    CHECK(first.records[i].clip.samples == second.records[i].clip.samples);
    CHECK(first.records[i].source_a == second.records[i].source_a);
    CHECK(first.records[i].source_b == second.records[i].source_b);
  }

  const MixResult other =
      build_mixed_dataset(corpus.records, MixStrategy::kRandom, 89);
  bool any_difference = other.records.size() != first.records.size();
  for (std::size_t i = 0; !any_difference && i < first.records.size(); ++i) {
    any_difference = first.records[i].source_a != other.records[i].source_a ||
                     first.records[i].source_b != other.records[i].source_b;
  }
  CHECK(any_difference);
}

TEST_CASE("per-pair cap limits output") {
  const auto dir = temp_dir("polymix_mixing_cap");
  std::array<int, kNumInstruments> counts{};
  counts[(std::size_t)Instrument::kSax] = 2;
  counts[(std::size_t)Instrument::kCla] = 2;
  const SynthResult corpus = synth_corpus(dir, counts, 5);
  MixOptions options;
  options.max_per_pair = 2;
  const MixResult mixed = build_mixed_dataset(
      corpus.records, MixStrategy::kRandom, 6, options);
  CHECK(mixed.records.size() == 2);  // min(6, 6) capped to 2
}

TEST_CASE("augmentation samples sources round-robin and shifts in range") {
  const auto dir = temp_dir("polymix_mixing_aug");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kSax, 58, 100), dir,
                               "s0.wav", Instrument::kSax,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kSax, 60, 120), dir,
                               "s1.wav", Instrument::kSax,
                               Genre::kPopRock));
  records.push_back(write_clip(synth_clip(Instrument::kCla, 60, 90), dir,
                               "c0.wav", Instrument::kCla,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kCla, 62, 140), dir,
                               "c1.wav", Instrument::kCla,
                               Genre::kJazzBlues));

  const auto out = pitch_shift_augment(records, {-2, 2}, 30, 21);
  REQUIRE(out.size() == 30);
  std::map<std::string, int> usage;
  for (const AugmentRecord& rec : out) {
    CHECK(rec.labels.count() == 1);
    CHECK((rec.shift == -2 || rec.shift == 2));
    CHECK(rec.clip.samples.size() == 22050);
    ++usage[rec.source];
  }
  // 12 segments, 30 draws: no source more than ceil(30/12) times.
  for (const auto& [id, n] : usage) CHECK(n <= 3);
}

TEST_CASE("augmentation shift zero is transparent") {
  const auto dir = temp_dir("polymix_mixing_aug_zero");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kOrg, 50, 100), dir,
                               "o.wav", Instrument::kOrg,
                               Genre::kClassical));
  const auto out = pitch_shift_augment(records, {0}, 3, 9);
  REQUIRE(out.size() == 3);
  for (const AugmentRecord& rec : out) {
    CHECK(rec.shift == 0);
    const AudioClip source = segment_by_id(rec.source);
    CHECK(rec.clip.samples == source.samples);
  }
}

TEST_CASE("augmentation tracks the commanded interval") {
  const auto dir = temp_dir("polymix_mixing_aug_tone");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(make_sine(220.0, 3.0, 44100, 0.4), dir,
                               "tone.wav", Instrument::kVoi,
                               Genre::kClassical));
  const auto out = pitch_shift_augment(records, {2}, 3, 13);
  REQUIRE(out.size() == 3);
  const double expected = 220.0 * std::pow(2.0, 2.0 / 12.0);
  for (const AugmentRecord& rec : out) {
    const PitchTrack track = track_pitch(rec.clip);
    std::vector<double> voiced;
    for (double f : track.f0) {
      if (f > 0.0) voiced.push_back(f);
    }
    REQUIRE(!voiced.empty());
    std::sort(voiced.begin(), voiced.end());
    const double median = voiced[voiced.size() / 2];
    const double cents = 1200.0 * std::log2(median / expected);
    CHECK(std::abs(cents) < 25.0);
  }
}

TEST_CASE("augmentation validates the semitone set") {
  const auto dir = temp_dir("polymix_mixing_aug_bad");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kOrg, 50, 100), dir,
                               "o.wav", Instrument::kOrg,
                               Genre::kClassical));
  CHECK_THROWS_AS(pitch_shift_augment(records, {3}, 2, 1), ContractError);
  CHECK_THROWS_AS(pitch_shift_augment(records, {}, 2, 1), ContractError);
  CHECK_THROWS_AS(pitch_shift_augment({}, {2}, 2, 1), ContractError);
  CHECK(pitch_shift_augment(records, {2}, 0, 1).empty());
}

TEST_CASE("saving mixed and augmented sets round-trips manifests") {
  const auto dir = temp_dir("polymix_mixing_save");
  std::vector<ClipRecord> records;
  records.push_back(write_clip(synth_clip(Instrument::kSax, 58, 100), dir,
                               "a.wav", Instrument::kSax,
                               Genre::kClassical));
  records.push_back(write_clip(synth_clip(Instrument::kCla, 60, 120), dir,
                               "b.wav", Instrument::kCla,
                               Genre::kPopRock));
  const MixResult mixed =
      build_mixed_dataset(records, MixStrategy::kRandom, 7);
  REQUIRE(!mixed.records.empty());

  const auto mix_dir = temp_dir("polymix_mixing_save/out_mix");
  const auto manifest = save_mixed(mixed.records, mix_dir);
  REQUIRE(manifest.size() == mixed.records.size());
  const auto reloaded = load_track_manifest(mix_dir / "manifest.jsonl");
  REQUIRE(reloaded.size() == manifest.size());
  for (std::size_t i = 0; i < reloaded.size(); ++i) {
    CHECK(reloaded[i].labels == mixed.records[i].labels);
    CHECK(reloaded[i].provenance == manifest[i].provenance);
    CHECK(std::filesystem::exists(reloaded[i].path));
    const AudioClip back = load_wav(reloaded[i].path);
    CHECK(back.samples.size() == mixed.records[i].clip.samples.size());
  }

  const auto aug = pitch_shift_augment(records, {2}, 4, 3);
  const auto aug_dir = temp_dir("polymix_mixing_save/out_aug");
  const auto aug_manifest = save_augmented(aug, aug_dir);
  const auto aug_reloaded = load_manifest(aug_dir / "manifest.jsonl");
  REQUIRE(aug_reloaded.size() == aug.size());
  for (std::size_t i = 0; i < aug_reloaded.size(); ++i) {
    CHECK(aug[i].labels.test(aug_reloaded[i].instrument));
    CHECK(std::filesystem::exists(aug_reloaded[i].path));
  }
}
