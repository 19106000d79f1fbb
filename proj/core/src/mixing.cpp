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
#include "polymix/mixing.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <optional>

#include "polymix/errors.hpp"
#include "polymix/pitch.hpp"
#include "polymix/rng.hpp"
#include "polymix/tempo.hpp"
#include "polymix/wav.hpp"

namespace polymix {
namespace {

constexpr double kSegmentSeconds = 1.0;
constexpr double kParentSeconds = 3.0;

// One-second slice of a standardized corpus clip, with lazy analysis
// caches so a segment reused across class pairs is only analyzed once.
struct Segment {
  AudioClip clip;
  std::string id;
  Genre genre = Genre::kClassical;
  std::optional<PitchTrack> track;
};

struct Parent {
  AudioClip clip;  // standardized, nominally three seconds
  std::string id;
  Genre genre = Genre::kClassical;
  bool tempo_checked = false;
  bool has_tempo = false;
  double bpm = 0.0;
};

const PitchTrack& track_of(Segment& s) {
  if (!s.track) s.track = track_pitch(s.clip);
  return *s.track;
}

bool tempo_of(Parent& p, double& bpm) {
  if (!p.tempo_checked) {
    p.tempo_checked = true;
    try {
      p.bpm = estimate_bpm(p.clip).bpm;
      p.has_tempo = true;
    } catch (const NoTempoError&) {
      p.has_tempo = false;
    }
  }
  bpm = p.bpm;
  return p.has_tempo;
}

std::string format_plan(const ShiftPlan& plan) {
  std::string out;
  char buf[64];
  for (const ShiftSegment& s : plan.segments) {
    std::snprintf(buf, sizeof buf, "%s%zu:%zu:%d", out.empty() ? "" : ",",
                  s.start_frame, s.end_frame, s.shift);
    out += buf;
  }
  return "plan=" + out;
}

std::string format_ratio(double ratio) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "ratio=%.17g", ratio);
  return buf;
}

LabelVector pair_labels(Instrument a, Instrument b) {
  LabelVector lv;
  lv.set(a);
  lv.set(b);
  return lv;
}

void truncate_pairs(PairList& pairs, int max_per_pair) {
  if (max_per_pair > 0 &&
      pairs.size() > static_cast<std::size_t>(max_per_pair)) {
    pairs.resize(static_cast<std::size_t>(max_per_pair));
  }
}

}  // namespace

std::string_view to_string(MixStrategy strategy) {
  switch (strategy) {
    case MixStrategy::kRandom: return "random";
    case MixStrategy::kGenre: return "genre";
    case MixStrategy::kTempo: return "tempo";
    case MixStrategy::kPitch: return "pitch";
  }
  throw ContractError("to_string: bad strategy");
}

MixStrategy parse_strategy(std::string_view text) {
  if (text == "random") return MixStrategy::kRandom;
  if (text == "genre") return MixStrategy::kGenre;
  if (text == "tempo") return MixStrategy::kTempo;
  if (text == "pitch") return MixStrategy::kPitch;
  throw ContractError("parse_strategy: unknown strategy '" +
                      std::string(text) + "'");
}

PairList pair_random(std::size_t size_a, std::size_t size_b,
                     std::uint64_t seed) {
  if (size_a == 0 || size_b == 0) {
    std::clog << "pair_random: empty input set, no pairs generated\n";
    return {};
  }
  std::vector<std::size_t> ia(size_a), ib(size_b);
  std::iota(ia.begin(), ia.end(), std::size_t{0});
  std::iota(ib.begin(), ib.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(ia);
  rng.shuffle(ib);
  const std::size_t n = std::min(size_a, size_b);
  PairList out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.emplace_back(ia[k], ib[k]);
  return out;
}

PairList pair_genre(const std::vector<Genre>& genres_a,
                    const std::vector<Genre>& genres_b, std::uint64_t seed) {
  Rng master(seed);
  PairList out;
  for (int g = 0; g < kNumGenres; ++g) {
    const std::uint64_t bucket_seed = master.fork_seed();
    std::vector<std::size_t> la, lb;
    for (std::size_t i = 0; i < genres_a.size(); ++i) {
      if (genres_a[i] == static_cast<Genre>(g)) la.push_back(i);
    }
    for (std::size_t i = 0; i < genres_b.size(); ++i) {
      if (genres_b[i] == static_cast<Genre>(g)) lb.push_back(i);
    }
    if (la.empty() || lb.empty()) continue;
    for (const auto& [pa, pb] : pair_random(la.size(), lb.size(), bucket_seed)) {
      out.emplace_back(la[pa], lb[pb]);
    }
  }
  return out;
}

MixResult build_mixed_dataset(const std::vector<ClipRecord>& corpus,
                              MixStrategy strategy, std::uint64_t seed,
                              const MixOptions& options) {
  std::array<std::vector<const ClipRecord*>, kNumInstruments> by_class{};
  for (const ClipRecord& r : corpus) {
    by_class[static_cast<std::size_t>(r.instrument)].push_back(&r);
  }
  int present = 0;
  for (const auto& v : by_class) present += !v.empty();
  if (present < 2) {
    throw ContractError(
        "build_mixed_dataset: corpus must cover at least two classes");
  }

  // Load and standardize every referenced clip once.
  std::array<std::vector<Parent>, kNumInstruments> parents{};
  std::array<std::vector<Segment>, kNumInstruments> segments{};
  for (int c = 0; c < kNumInstruments; ++c) {
    for (const ClipRecord* r : by_class[static_cast<std::size_t>(c)]) {
      AudioClip std_clip = standardize(load_wav(r->path));
      auto parts = segment_clip(std_clip, kSegmentSeconds);
      for (std::size_t k = 0; k < parts.size(); ++k) {
        Segment s;
        s.clip = std::move(parts[k]);
        s.id = r->path + "#" + std::to_string(k);
        s.genre = r->genre;
        segments[static_cast<std::size_t>(c)].push_back(std::move(s));
      }
      Parent p;
      p.clip = std::move(std_clip);
      p.id = r->path;
      p.genre = r->genre;
      parents[static_cast<std::size_t>(c)].push_back(std::move(p));
    }
  }

  Rng master(seed);
  MixResult result;
  for (int i = 0; i < kNumInstruments; ++i) {
    for (int j = i + 1; j < kNumInstruments; ++j) {
      // Forked unconditionally so each class pair's stream is stable no
      // matter which classes the corpus actually covers.
      const std::uint64_t sub_seed = master.fork_seed();
      auto& seg_a = segments[static_cast<std::size_t>(i)];
      auto& seg_b = segments[static_cast<std::size_t>(j)];
      auto& par_a = parents[static_cast<std::size_t>(i)];
      auto& par_b = parents[static_cast<std::size_t>(j)];
      if (seg_a.empty() || seg_b.empty()) continue;
      const LabelVector labels =
          pair_labels(static_cast<Instrument>(i), static_cast<Instrument>(j));

      switch (strategy) {
        case MixStrategy::kRandom:
        case MixStrategy::kGenre: {
          PairList pairs;
          if (strategy == MixStrategy::kRandom) {
            pairs = pair_random(seg_a.size(), seg_b.size(), sub_seed);
          } else {
            std::vector<Genre> ga, gb;
            for (const Segment& s : seg_a) ga.push_back(s.genre);
            for (const Segment& s : seg_b) gb.push_back(s.genre);
            pairs = pair_genre(ga, gb, sub_seed);
          }
          truncate_pairs(pairs, options.max_per_pair);
          for (const auto& [pa, pb] : pairs) {
            MixedRecord rec;
            rec.clip = overlay(seg_a[pa].clip, seg_b[pb].clip);
            rec.labels = labels;
            rec.genre = seg_a[pa].genre;
            rec.source_a = seg_a[pa].id;
            rec.source_b = seg_b[pb].id;
            rec.strategy = strategy;
            result.records.push_back(std::move(rec));
          }
          break;
        }
        case MixStrategy::kPitch: {
          PairList pairs = pair_random(seg_a.size(), seg_b.size(), sub_seed);
          truncate_pairs(pairs, options.max_per_pair);
          for (const auto& [pa, pb] : pairs) {
            Segment& a = seg_a[pa];
            Segment& b = seg_b[pb];
            const ShiftPlan plan = smooth_shift_track(
                compute_shift_track(track_of(a), track_of(b)));
            AudioClip shifted;
            try {
              shifted = apply_pitch_shift(b.clip, plan);
            } catch (const OutOfRangeError&) {
              ++result.skipped_pairs;  // interval beyond +-24 semitones
              continue;
            }
            MixedRecord rec;
            rec.clip = overlay(a.clip, shifted);
            rec.labels = labels;
            rec.genre = a.genre;
            rec.source_a = a.id;
            rec.source_b = b.id;
            rec.strategy = strategy;
            rec.detail = format_plan(plan);
            result.records.push_back(std::move(rec));
          }
          break;
        }
        case MixStrategy::kTempo: {
          PairList pairs = pair_random(par_a.size(), par_b.size(), sub_seed);
          truncate_pairs(pairs, options.max_per_pair);
          for (const auto& [pa, pb] : pairs) {
            Parent& a = par_a[pa];
            Parent& b = par_b[pb];
            double bpm_a = 0.0, bpm_b = 0.0;
            if (!tempo_of(a, bpm_a) || !tempo_of(b, bpm_b)) {
              ++result.skipped_pairs;
              continue;
            }
            const double ratio = tempo_sync_ratio(bpm_a, bpm_b);
            const AudioClip fit_a = fit_duration(a.clip, kParentSeconds);
            const AudioClip fit_b =
                fit_duration(time_stretch(b.clip, ratio), kParentSeconds);
            const AudioClip mixed = overlay(fit_a, fit_b);
            for (AudioClip& part : segment_clip(mixed, kSegmentSeconds)) {
              MixedRecord rec;
              rec.clip = std::move(part);
              rec.labels = labels;
              rec.genre = a.genre;
              rec.source_a = a.id;
              rec.source_b = b.id;
              rec.strategy = strategy;
              rec.detail = format_ratio(ratio);
              result.records.push_back(std::move(rec));
            }
          }
          break;
        }
      }
    }
  }
  return result;
}

std::vector<AugmentRecord> pitch_shift_augment(
    const std::vector<ClipRecord>& corpus, const std::vector<int>& semitones,
    std::size_t count, std::uint64_t seed) {
  if (semitones.empty()) {
    throw ContractError("pitch_shift_augment: empty semitone set");
  }
  for (int s : semitones) {
    if (s != 0 && s != 2 && s != -2 && s != 4 && s != -4 && s != 6 &&
        s != -6) {
      throw ContractError("pitch_shift_augment: semitone outside {0,+-2,+-4,+-6}");
    }
  }
  if (count == 0) return {};
  if (corpus.empty()) {
    throw ContractError("pitch_shift_augment: empty corpus");
  }

  struct Source {
    AudioClip clip;
    std::string id;
    Genre genre;
    Instrument instrument;
  };
  std::vector<Source> sources;
  for (const ClipRecord& r : corpus) {
    const AudioClip std_clip = standardize(load_wav(r.path));
    auto parts = segment_clip(std_clip, kSegmentSeconds);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      sources.push_back({std::move(parts[k]),
                         r.path + "#" + std::to_string(k), r.genre,
                         r.instrument});
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> order(sources.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<AugmentRecord> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const Source& src = sources[order[k % order.size()]];
    const int shift = semitones[static_cast<std::size_t>(
        rng.uniform_int(semitones.size()))];
    ShiftPlan plan;
    plan.segments.push_back(
        {0, pitch_frames(src.clip.samples.size()), shift});
    AugmentRecord rec;
    rec.clip = apply_pitch_shift(src.clip, plan);
    rec.labels.set(src.instrument);
    rec.genre = src.genre;
    rec.source = src.id;
    rec.shift = shift;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TrackRecord> save_mixed(const std::vector<MixedRecord>& records,
                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<TrackRecord> manifest;
  manifest.reserve(records.size());
  char name[64];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const MixedRecord& rec = records[i];
    std::snprintf(name, sizeof name, "mix_%s_%06zu.wav",
                  std::string(to_string(rec.strategy)).c_str(), i);
    const auto path = out_dir / name;
    save_wav(rec.clip, path);
    TrackRecord t;
    t.path = path.string();
    t.labels = rec.labels;
    t.genre = rec.genre;
    t.duration_s = rec.clip.duration_s();
    t.provenance = std::string(to_string(rec.strategy)) + "|" + rec.source_a +
                   "|" + rec.source_b +
                   (rec.detail.empty() ? "" : "|" + rec.detail);
    manifest.push_back(std::move(t));
  }
  save_track_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

std::vector<ClipRecord> save_augmented(
    const std::vector<AugmentRecord>& records,
    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<ClipRecord> manifest;
  manifest.reserve(records.size());
  char name[64];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AugmentRecord& rec = records[i];
    std::snprintf(name, sizeof name, "aug_%06zu.wav", i);
    const auto path = out_dir / name;
    save_wav(rec.clip, path);
    ClipRecord c;
    c.path = path.string();
    for (int k = 0; k < kNumInstruments; ++k) {
      if (rec.labels.test(static_cast<Instrument>(k))) {
        c.instrument = static_cast<Instrument>(k);
      }
    }
    c.genre = rec.genre;
    c.duration_s = rec.clip.duration_s();
    manifest.push_back(std::move(c));
  }
  save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace polymix
