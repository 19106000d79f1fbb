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
#ifndef POLYMIX_PHASE_VOCODER_HPP_
#define POLYMIX_PHASE_VOCODER_HPP_

#include <cstddef>
#include <vector>

namespace polymix {

constexpr int kPvWindow = 1024;
constexpr int kPvHop = 256;  // synthesis hop; analysis hop = ratio * this

/// Phase-vocoder resynthesis that advances through the input at `ratio`
/// samples per output sample, preserving pitch content.  Phases are
/// locked to spectral peaks per frame so tones stay coherent; at
/// ratio 1 the pipeline reconstructs the input exactly up to rounding.
/// Accepts ratios in [0.2, 4.2]; callers expose narrower contracts.
std::vector<double> pv_stretch(const std::vector<double>& x, double ratio,
                               std::size_t n_out);

}  // namespace polymix

#endif  // POLYMIX_PHASE_VOCODER_HPP_
