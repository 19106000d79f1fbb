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
#ifndef POLYMIX_LABELS_HPP_
#define POLYMIX_LABELS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace polymix {

// The canonical instrument order (alphabetical by code) fixes the index
// meaning of every label vector, model output column, and store entry.
enum class Instrument : std::uint8_t {
  kCel = 0,
  kCla,
  kFlu,
  kGac,
  kGel,
  kOrg,
  kPia,
  kSax,
  kTru,
  kVio,
  kVoi,
};

constexpr int kNumInstruments = 11;
constexpr std::array<std::string_view, kNumInstruments> kInstrumentNames = {
    "cel", "cla", "flu", "gac", "gel", "org", "pia", "sax", "tru", "vio",
    "voi"};

enum class Genre : std::uint8_t {
  kClassical = 0,
  kPopRock,
  kJazzBlues,
  kCountryFolk,
};

constexpr int kNumGenres = 4;
constexpr std::array<std::string_view, kNumGenres> kGenreNames = {
    "classical", "pop_rock", "jazz_blues", "country_folk"};

std::string_view to_string(Instrument i);
std::string_view to_string(Genre g);

/// Parse a canonical code; returns false on an unknown token so callers
/// can attach their own context (manifest line numbers, CLI usage).
bool parse_instrument(std::string_view token, Instrument& out);
bool parse_genre(std::string_view token, Genre& out);

/// Binary indicator vector over the 11 instruments, canonical order.
struct LabelVector {
  std::array<std::uint8_t, kNumInstruments> bits{};

  void set(Instrument i) { bits[static_cast<std::size_t>(i)] = 1; }
  bool test(Instrument i) const {
    return bits[static_cast<std::size_t>(i)] != 0;
  }
  int count() const {
    int n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  bool operator==(const LabelVector&) const = default;
};

LabelVector make_labels(std::initializer_list<Instrument> instruments);

/// Comma-free compact form, e.g. "pia+vio" in canonical order.
std::string labels_to_string(const LabelVector& v);

}  // namespace polymix

#endif  // POLYMIX_LABELS_HPP_
