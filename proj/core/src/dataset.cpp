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
#include "polymix/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "polymix/errors.hpp"
#include "polymix/wav.hpp"

static_assert(std::endian::native == std::endian::little,
              "store serialization assumes a little-endian host");

namespace polymix {
namespace {

using nlohmann::json;

constexpr char kStoreMagic[4] = {'C', 'Q', 'T', 'S'};
constexpr std::uint16_t kStoreVersion = 1;

json parse_line(const std::string& line, long line_no) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError("malformed manifest record", line_no);
  }
  return j;
}

std::string require_string(const json& j, const char* key, long line_no) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(std::string("missing or non-string '") + key + "'",
                          line_no);
  }
  return j.at(key).get<std::string>();
}

Genre parse_genre_field(const json& j, long line_no) {
  const std::string token = require_string(j, "genre", line_no);
  Genre g;
  if (!parse_genre(token, g)) {
    throw ValidationError("unknown genre '" + token + "'", line_no);
  }
  return g;
}

int parse_split_field(const json& j, long line_no) {
  if (!j.contains("split")) return kSplitUnassigned;
  const json& s = j.at("split");
  if (s.is_string()) {
    if (s.get<std::string>() == "test") return kSplitTest;
    throw ValidationError("unknown split '" + s.get<std::string>() + "'",
                          line_no);
  }
  if (s.is_number_integer() && s.get<long>() >= 0) {
    return static_cast<int>(s.get<long>());
  }
  throw ValidationError("split must be a fold index or \"test\"", line_no);
}

double parse_duration_field(const json& j, long line_no) {
  if (!j.contains("duration_s")) return 0.0;
  if (!j.at("duration_s").is_number()) {
    throw ValidationError("duration_s must be a number", line_no);
  }
  const double d = j.at("duration_s").get<double>();
  if (d < 0) throw ValidationError("duration_s must be non-negative", line_no);
  return d;
}

json split_to_json(int split) {
  if (split == kSplitTest) return json("test");
  return json(split);
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, line_no);
  }
}

void write_lines(const std::filesystem::path& path,
                 const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const json& j : lines) out << j.dump() << '\n';
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace

std::vector<ClipRecord> load_manifest(const std::filesystem::path& path) {
  std::vector<ClipRecord> records;
  for_each_line(path, [&records](const std::string& line, long line_no) {
    const json j = parse_line(line, line_no);
    ClipRecord r;
    r.path = require_string(j, "path", line_no);
    const std::string inst = require_string(j, "instrument", line_no);
    if (!parse_instrument(inst, r.instrument)) {
      throw ValidationError("unknown instrument '" + inst + "'", line_no);
    }
    r.genre = parse_genre_field(j, line_no);
    r.split = parse_split_field(j, line_no);
    r.duration_s = parse_duration_field(j, line_no);
    records.push_back(std::move(r));
  });
  return records;
}

void save_manifest(const std::vector<ClipRecord>& records,
                   const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const ClipRecord& r : records) {
    json j;
    j["path"] = r.path;
    j["instrument"] = std::string(to_string(r.instrument));
    j["genre"] = std::string(to_string(r.genre));
    if (r.duration_s > 0) j["duration_s"] = r.duration_s;
    if (r.split != kSplitUnassigned) j["split"] = split_to_json(r.split);
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

std::vector<TrackRecord> load_track_manifest(
    const std::filesystem::path& path) {
  std::vector<TrackRecord> records;
  for_each_line(path, [&records](const std::string& line, long line_no) {
    const json j = parse_line(line, line_no);
    TrackRecord r;
    r.path = require_string(j, "path", line_no);
    if (!j.contains("labels") || !j.at("labels").is_array() ||
        j.at("labels").empty()) {
      throw ValidationError("missing or empty 'labels' array", line_no);
    }
    for (const json& item : j.at("labels")) {
      if (!item.is_string()) {
        throw ValidationError("labels entries must be strings", line_no);
      }
      Instrument inst;
      if (!parse_instrument(item.get<std::string>(), inst)) {
        throw ValidationError(
            "unknown instrument '" + item.get<std::string>() + "'", line_no);
      }
      r.labels.set(inst);
    }
    r.genre = parse_genre_field(j, line_no);
    r.split = parse_split_field(j, line_no);
    r.duration_s = parse_duration_field(j, line_no);
    if (j.contains("provenance")) {
      r.provenance = require_string(j, "provenance", line_no);
    }
    records.push_back(std::move(r));
  });
  return records;
}

void save_track_manifest(const std::vector<TrackRecord>& records,
                         const std::filesystem::path& path) {
  std::vector<json> lines;
  lines.reserve(records.size());
  for (const TrackRecord& r : records) {
    json j;
    j["path"] = r.path;
    json labels = json::array();
    for (int i = 0; i < kNumInstruments; ++i) {
      if (r.labels.bits[static_cast<std::size_t>(i)]) {
        labels.push_back(std::string(kInstrumentNames[static_cast<std::size_t>(i)]));
      }
    }
    j["labels"] = std::move(labels);
    j["genre"] = std::string(to_string(r.genre));
    if (r.duration_s > 0) j["duration_s"] = r.duration_s;
    if (r.split != kSplitUnassigned) j["split"] = split_to_json(r.split);
    if (!r.provenance.empty()) j["provenance"] = r.provenance;
    lines.push_back(std::move(j));
  }
  write_lines(path, lines);
}

void write_store(const FeatureStore& store,
                 const std::filesystem::path& path) {
  if (store.labels.size() != store.features.size()) {
    throw ContractError("store: features and labels must be parallel");
  }
  const std::size_t cells =
      static_cast<std::size_t>(store.rows) * store.cols;
  for (const auto& f : store.features) {
    if (f.size() != cells) {
      throw ContractError("store: feature matrix has wrong shape");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write store " + path.string());
  out.write(kStoreMagic, 4);
  const auto put = [&out](const void* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p),
              static_cast<std::streamsize>(n));
  };
  const std::uint16_t version = kStoreVersion;
  const auto count = static_cast<std::uint32_t>(store.features.size());
  put(&version, 2);
  put(&count, 4);
  put(&store.rows, 4);
  put(&store.cols, 4);
  for (const auto& f : store.features) put(f.data(), f.size() * 4);
  for (const auto& l : store.labels) put(l.bits.data(), l.bits.size());
  if (!out) throw Error("short write to " + path.string());
}

FeatureStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptStoreError("cannot open store " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kStoreMagic, 4) != 0) {
    throw CorruptStoreError("bad store magic in " + path.string());
  }
  std::uint16_t version = 0;
  std::uint32_t count = 0;
  FeatureStore store;
  const auto get = [&in](void* p, std::size_t n) {
    return static_cast<bool>(
        in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)));
  };
  if (!get(&version, 2) || !get(&count, 4) || !get(&store.rows, 4) ||
      !get(&store.cols, 4)) {
    throw CorruptStoreError("truncated store header in " + path.string());
  }
  if (version != kStoreVersion) {
    throw CorruptStoreError("unsupported store version " +
                            std::to_string(version));
  }
  const std::uint64_t cells =
      static_cast<std::uint64_t>(store.rows) * store.cols;
  if (cells == 0 || cells > (1ull << 32)) {
    throw CorruptStoreError("implausible store dimensions");
  }
  store.features.resize(count);
  for (auto& f : store.features) {
    f.resize(cells);
    if (!get(f.data(), cells * 4)) {
      throw CorruptStoreError("truncated store payload in " + path.string());
    }
  }
  store.labels.resize(count);
  for (auto& l : store.labels) {
    if (!get(l.bits.data(), l.bits.size())) {
      throw CorruptStoreError("truncated store labels in " + path.string());
    }
    for (auto b : l.bits) {
      if (b > 1) throw CorruptStoreError("label byte out of range");
    }
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw CorruptStoreError("trailing bytes in store " + path.string());
  }
  return store;
}

IngestResult ingest_irmas(const std::filesystem::path& root) {
  // Filename genre tags per the source corpus convention; tags outside
  // our four-genre vocabulary cause the file to be skipped.
  static const std::map<std::string, Genre> kGenreTags = {
      {"cla", Genre::kClassical},
      {"pop_roc", Genre::kPopRock},
      {"jaz_blu", Genre::kJazzBlues},
      {"cou_fol", Genre::kCountryFolk},
  };

  IngestResult result;
  for (int i = 0; i < kNumInstruments; ++i) {
    const auto code = std::string(kInstrumentNames[static_cast<std::size_t>(i)]);
    const auto dir = root / code;
    if (!std::filesystem::is_directory(dir)) continue;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const std::string name = file.filename().string();
      // The genre is the last bracketed token that names one; earlier
      // tokens are instrument or drum annotations.
      bool have_genre = false;
      Genre genre = Genre::kClassical;
      std::size_t pos = 0;
      while ((pos = name.find('[', pos)) != std::string::npos) {
        const std::size_t end = name.find(']', pos);
        if (end == std::string::npos) break;
        const std::string token = name.substr(pos + 1, end - pos - 1);
        const auto it = kGenreTags.find(token);
        if (it != kGenreTags.end()) {
          genre = it->second;
          have_genre = true;
        }
        pos = end + 1;
      }
      if (!have_genre) {
        result.warnings.push_back("no recognized genre tag, skipped: " +
                                  file.string());
        continue;
      }
      ClipRecord r;
      r.path = file.string();
      r.instrument = static_cast<Instrument>(i);
      r.genre = genre;
      try {
        r.duration_s = wav_info(file).duration_s;
      } catch (const Error& e) {
        result.warnings.push_back(std::string("unreadable, skipped: ") +
                                  e.what());
        continue;
      }
      result.records.push_back(std::move(r));
    }
  }
  return result;
}

}  // namespace polymix
