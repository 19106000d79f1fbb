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
#include "polymix/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "polymix/errors.hpp"
#include "polymix/rng.hpp"
#include "polymix/wav.hpp"

namespace polymix {
namespace {

using nlohmann::json;

// One additive-synthesis recipe per class.  Profiles differ in register,
// harmonic weights, and decay so classes stay separable on mean spectra;
// the weights are caricatures, not acoustic models.
struct Timbre {
  int midi_lo;
  int midi_hi;
  std::array<double, 8> harmonics;
  bool sustained;
};

// Registers are a fifth wide and staggered; harmonic sets are sparse
// caricatures (absent partials are exactly zero) so the dB spectra of
// neighboring-register classes stay far apart.
constexpr std::array<Timbre, kNumInstruments> kTimbres = {{
    // cel: low register, saturated low harmonics
    {36, 43, {1.0, 0.85, 0.60, 0.00, 0.00, 0.00, 0.00, 0.00}, true},
    // cla: odd harmonics only
    {58, 65, {1.0, 0.00, 0.80, 0.00, 0.60, 0.00, 0.40, 0.00}, true},
    // flu: nearly pure tone
    {72, 79, {1.0, 0.20, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00}, true},
    // gac: plucked, smooth rolloff
    {45, 52, {1.0, 0.80, 0.60, 0.45, 0.00, 0.00, 0.00, 0.00}, false},
    // gel: plucked, scooped odd partials
    {40, 47, {1.0, 0.90, 0.00, 0.70, 0.00, 0.50, 0.00, 0.00}, false},
    // org: octave drawbars
    {48, 55, {1.0, 0.90, 0.00, 0.85, 0.00, 0.00, 0.00, 0.80}, true},
    // pia: struck, fast rolloff
    {61, 68, {1.0, 0.60, 0.40, 0.25, 0.15, 0.00, 0.00, 0.00}, false},
    // sax: broad and bright
    {55, 62, {1.0, 0.85, 0.70, 0.60, 0.45, 0.30, 0.00, 0.00}, true},
    // tru: energy centered above a weak fundamental
    {64, 71, {0.15, 1.00, 0.90, 0.80, 0.65, 0.50, 0.00, 0.00}, true},
    // vio: bright with gapped upper partials
    {67, 74, {1.0, 0.75, 0.65, 0.00, 0.50, 0.00, 0.30, 0.00}, true},
    // voi: formant bump over the third and fourth partials
    {52, 59, {1.0, 0.00, 0.90, 0.70, 0.00, 0.00, 0.00, 0.00}, true},
}};

constexpr double kMaxPartialHz = 10000.0;  // stays clean after downsampling

double midi_to_hz(int midi) {
  return 440.0 * std::pow(2.0, (midi - 69) / 12.0);
}

double pulse_envelope(double t, double beat_period, bool sustained) {
  const double u = t - std::floor(t / beat_period) * beat_period;
  const double attack = 0.005;
  const double floor_level = sustained ? 0.35 : 0.02;
  const double tau = sustained ? 0.15 : 0.09;
  const double rise = u < attack ? u / attack : 1.0;
  const double decay = std::exp(-std::max(0.0, u - attack) / tau);
  return floor_level + (1.0 - floor_level) * rise * decay;
}

std::string clip_name(Instrument inst, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d.wav",
                std::string(to_string(inst)).c_str(), index);
  return buf;
}

}  // namespace

void instrument_register(Instrument instrument, int& midi_lo, int& midi_hi) {
  const Timbre& t = kTimbres[static_cast<std::size_t>(instrument)];
  midi_lo = t.midi_lo;
  midi_hi = t.midi_hi;
}

AudioClip synth_clip(Instrument instrument, int midi, int bpm, double seconds,
                     int rate) {
  if (bpm <= 0 || seconds <= 0 || rate <= 0) {
    throw ContractError("synth_clip: bad parameters");
  }
  const Timbre& timbre = kTimbres[static_cast<std::size_t>(instrument)];
  const double f0 = midi_to_hz(midi);
  const double beat_period = 60.0 / bpm;

  double norm = 0.0;
  std::array<double, 8> amps{};
  for (std::size_t h = 0; h < amps.size(); ++h) {
    if (f0 * static_cast<double>(h + 1) < kMaxPartialHz) {
      amps[h] = timbre.harmonics[h];
      norm += amps[h];
    }
  }
  if (norm == 0.0) {  // register caps keep at least the fundamental
    amps[0] = 1.0;
    norm = 1.0;
  }

  AudioClip clip;
  clip.sample_rate = rate;
  clip.channels = 1;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  clip.samples.resize(n);
  const double gain = 0.7 / norm;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    double s = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h) {
      if (amps[h] == 0.0) continue;
      const double k = static_cast<double>(h + 1);
      s += amps[h] * std::sin(2.0 * M_PI * f0 * k * t + 0.3 * k);
    }
    clip.samples[i] = gain * s * pulse_envelope(t, beat_period, timbre.sustained);
  }
  return clip;
}

SynthResult synth_corpus(const std::filesystem::path& out_dir,
                         const std::array<int, kNumInstruments>& counts,
                         std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  SynthResult result;
  for (int c = 0; c < kNumInstruments; ++c) {
    const auto inst = static_cast<Instrument>(c);
    const Timbre& timbre = kTimbres[static_cast<std::size_t>(c)];
    for (int j = 0; j < counts[static_cast<std::size_t>(c)]; ++j) {
      const int midi =
          timbre.midi_lo + static_cast<int>(rng.uniform_int(
                               static_cast<std::uint64_t>(timbre.midi_hi - timbre.midi_lo + 1)));
      const int bpm = 60 + static_cast<int>(rng.uniform_int(121));
      const AudioClip clip = synth_clip(inst, midi, bpm);
      const auto path = out_dir / clip_name(inst, j);
      save_wav(clip, path);

      ClipRecord record;
      record.path = path.string();
      record.instrument = inst;
      record.genre = static_cast<Genre>(j % kNumGenres);
      record.duration_s = clip.duration_s();
      result.records.push_back(record);

      SynthTruth truth;
      truth.path = record.path;
      truth.instrument = inst;
      truth.genre = record.genre;
      truth.midi = midi;
      truth.f0_hz = midi_to_hz(midi);
      truth.bpm = bpm;
      result.truths.push_back(truth);
    }
  }
  save_truth(result.truths, out_dir / "truth.jsonl");
  return result;
}

std::vector<TrackRecord> synth_poly_tracks(
    const std::filesystem::path& out_dir, int n_tracks, std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  std::vector<TrackRecord> records;
  records.reserve(static_cast<std::size_t>(n_tracks));
  for (int t = 0; t < n_tracks; ++t) {
    const int a = static_cast<int>(rng.uniform_int(kNumInstruments));
    int b = static_cast<int>(rng.uniform_int(kNumInstruments - 1));
    if (b >= a) ++b;
    const auto inst_a = static_cast<Instrument>(a);
    const auto inst_b = static_cast<Instrument>(b);
    const Timbre& ta = kTimbres[static_cast<std::size_t>(a)];
    const Timbre& tb = kTimbres[static_cast<std::size_t>(b)];
    const int midi_a = ta.midi_lo + static_cast<int>(rng.uniform_int(
                                        static_cast<std::uint64_t>(ta.midi_hi - ta.midi_lo + 1)));
    const int midi_b = tb.midi_lo + static_cast<int>(rng.uniform_int(
                                        static_cast<std::uint64_t>(tb.midi_hi - tb.midi_lo + 1)));
    const int bpm_a = 60 + static_cast<int>(rng.uniform_int(121));
    const int bpm_b = 60 + static_cast<int>(rng.uniform_int(121));

    const AudioClip mixed = overlay(synth_clip(inst_a, midi_a, bpm_a),
                                    synth_clip(inst_b, midi_b, bpm_b));
    char buf[32];
    std::snprintf(buf, sizeof buf, "poly_%04d.wav", t);
    const auto path = out_dir / buf;
    save_wav(mixed, path);

    TrackRecord r;
    r.path = path.string();
    r.labels = make_labels({inst_a, inst_b});
    r.genre = static_cast<Genre>(t % kNumGenres);
    r.duration_s = mixed.duration_s();
    r.split = kSplitTest;
    r.provenance = std::string(to_string(inst_a)) + "+" +
                   std::string(to_string(inst_b));
    records.push_back(std::move(r));
  }
  return records;
}

void save_truth(const std::vector<SynthTruth>& truths,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const SynthTruth& t : truths) {
    json j;
    j["path"] = t.path;
    j["instrument"] = std::string(to_string(t.instrument));
    j["genre"] = std::string(to_string(t.genre));
    j["midi"] = t.midi;
    j["f0_hz"] = t.f0_hz;
    j["bpm"] = t.bpm;
    out << j.dump() << '\n';
  }
}

std::vector<SynthTruth> load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<SynthTruth> truths;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed truth record", line_no);
    SynthTruth t;
    t.path = j.at("path").get<std::string>();
    Instrument inst;
    if (!parse_instrument(j.at("instrument").get<std::string>(), inst)) {
      throw ValidationError("unknown instrument in truth record", line_no);
    }
    t.instrument = inst;
    Genre g;
    if (!parse_genre(j.at("genre").get<std::string>(), g)) {
      throw ValidationError("unknown genre in truth record", line_no);
    }
    t.genre = g;
    t.midi = j.at("midi").get<int>();
    t.f0_hz = j.at("f0_hz").get<double>();
    t.bpm = j.at("bpm").get<int>();
    truths.push_back(std::move(t));
  }
  return truths;
}

}  // namespace polymix
