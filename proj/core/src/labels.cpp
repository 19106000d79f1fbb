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
#include "polymix/labels.hpp"

namespace polymix {

std::string_view to_string(Instrument i) {
  return kInstrumentNames[static_cast<std::size_t>(i)];
}

std::string_view to_string(Genre g) {
  return kGenreNames[static_cast<std::size_t>(g)];
}

bool parse_instrument(std::string_view token, Instrument& out) {
  for (int i = 0; i < kNumInstruments; ++i) {
    if (kInstrumentNames[static_cast<std::size_t>(i)] == token) {
      out = static_cast<Instrument>(i);
      return true;
    }
  }
  return false;
}

bool parse_genre(std::string_view token, Genre& out) {
  for (int i = 0; i < kNumGenres; ++i) {
    if (kGenreNames[static_cast<std::size_t>(i)] == token) {
      out = static_cast<Genre>(i);
      return true;
    }
  }
  return false;
}

LabelVector make_labels(std::initializer_list<Instrument> instruments) {
  LabelVector v;
  for (Instrument i : instruments) v.set(i);
  return v;
}

std::string labels_to_string(const LabelVector& v) {
  std::string out;
  for (int i = 0; i < kNumInstruments; ++i) {
    if (!v.bits[static_cast<std::size_t>(i)]) continue;
    if (!out.empty()) out += '+';
    out += kInstrumentNames[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace polymix
