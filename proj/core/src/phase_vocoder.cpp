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
#include "polymix/phase_vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "polymix/errors.hpp"
#include "polymix/fft.hpp"

namespace polymix {
namespace {

constexpr int kBins = kPvWindow / 2 + 1;

double wrap_phase(double p) {
  return p - 2.0 * M_PI * std::round(p / (2.0 * M_PI));
}

/// Local magnitude maxima; every bin is then attributed to its nearest
/// peak so the rigid intra-partial phase structure survives stretching.
void find_peaks(const std::vector<double>& mag, std::vector<int>& peaks,
                std::vector<int>& owner) {
  peaks.clear();
  for (int b = 1; b + 1 < kBins; ++b) {
    if (mag[static_cast<std::size_t>(b)] > mag[static_cast<std::size_t>(b - 1)] &&
        mag[static_cast<std::size_t>(b)] >= mag[static_cast<std::size_t>(b + 1)]) {
      peaks.push_back(b);
    }
  }
  if (peaks.empty()) {
    for (int b = 0; b < kBins; ++b) owner[static_cast<std::size_t>(b)] = b;
    return;
  }
  std::size_t p = 0;
  for (int b = 0; b < kBins; ++b) {
    while (p + 1 < peaks.size() &&
           std::abs(peaks[p + 1] - b) < std::abs(peaks[p] - b)) {
      ++p;
    }
    owner[static_cast<std::size_t>(b)] = peaks[p];
  }
}

}  // namespace

std::vector<double> pv_stretch(const std::vector<double>& x, double ratio,
                               std::size_t n_out) {
  if (!(ratio >= 0.2 && ratio <= 4.2)) {
    throw ContractError("pv_stretch: ratio out of supported range");
  }
  if (x.empty()) throw ContractError("pv_stretch: empty input");
  std::vector<double> out(n_out, 0.0);
  if (n_out == 0) return out;

  const std::vector<double> window = hann_window(kPvWindow);

  // Synthesis frames start at k*hop - (window - hop) so the very first
  // output sample is already covered by a full complement of windows;
  // with a quarter-hop Hann the squared-window overlap sums to a
  // constant 1.5 across the whole output.
  const long long lead = kPvWindow - kPvHop;
  std::vector<long long> synth_pos, read_pos;
  for (long long k = 0;; ++k) {
    const long long s = k * kPvHop - lead;
    if (s >= static_cast<long long>(n_out)) break;
    synth_pos.push_back(s);
    read_pos.push_back(std::llround(ratio * static_cast<double>(s)));
  }

  long long lo = 0, hi = 0;
  for (long long a : read_pos) {
    lo = std::min(lo, a);
    hi = std::max(hi, a + kPvWindow);
  }
  const long long pad = -lo;
  std::vector<double> padded(static_cast<std::size_t>(hi - lo), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long long j = static_cast<long long>(i) + pad;
    if (j >= 0 && j < static_cast<long long>(padded.size())) {
      padded[static_cast<std::size_t>(j)] = x[i];
    }
  }

  RealFft fft(kPvWindow);
  std::vector<double> frame(kPvWindow);
  std::vector<std::complex<double>> spectrum(kBins);
  std::vector<double> mag(kBins), phase(kBins);
  std::vector<double> prev_phase(kBins, 0.0), synth_phase(kBins, 0.0);
  std::vector<int> peaks, owner(kBins);
  std::vector<std::complex<double>> synth_spec(kBins);
  std::vector<double> synth_frame(kPvWindow);
  std::vector<double> wsum(n_out, 0.0);

  for (std::size_t k = 0; k < synth_pos.size(); ++k) {
    const long long a = read_pos[k] + pad;
    for (int t = 0; t < kPvWindow; ++t) {
      frame[static_cast<std::size_t>(t)] =
          window[static_cast<std::size_t>(t)] *
          padded[static_cast<std::size_t>(a + t)];
    }
    fft.forward(frame.data(), spectrum.data());
    for (int b = 0; b < kBins; ++b) {
      mag[static_cast<std::size_t>(b)] = std::abs(spectrum[static_cast<std::size_t>(b)]);
      phase[static_cast<std::size_t>(b)] = std::arg(spectrum[static_cast<std::size_t>(b)]);
    }

    if (k == 0) {
      synth_phase = phase;
    } else {
      find_peaks(mag, peaks, owner);
      const auto delta_a = static_cast<double>(read_pos[k] - read_pos[k - 1]);
      std::vector<double> next(kBins);
      const auto propagate = [&](int b) {
        const double omega = 2.0 * M_PI * b / kPvWindow;
        const double dev = wrap_phase(phase[static_cast<std::size_t>(b)] -
                                      prev_phase[static_cast<std::size_t>(b)] -
                                      delta_a * omega);
        const double inst = omega + (delta_a > 0 ? dev / delta_a : 0.0);
        next[static_cast<std::size_t>(b)] =
            synth_phase[static_cast<std::size_t>(b)] + kPvHop * inst;
      };
      if (peaks.empty()) {
        for (int b = 0; b < kBins; ++b) propagate(b);
      } else {
        for (int p : peaks) propagate(p);
        for (int b = 0; b < kBins; ++b) {
          const int p = owner[static_cast<std::size_t>(b)];
          if (b == p) continue;
          next[static_cast<std::size_t>(b)] =
              next[static_cast<std::size_t>(p)] +
              phase[static_cast<std::size_t>(b)] -
              phase[static_cast<std::size_t>(p)];
        }
      }
      synth_phase = std::move(next);
    }
    prev_phase = phase;

    for (int b = 0; b < kBins; ++b) {
      synth_spec[static_cast<std::size_t>(b)] = std::polar(
          mag[static_cast<std::size_t>(b)], synth_phase[static_cast<std::size_t>(b)]);
    }
    fft.inverse(synth_spec.data(), synth_frame.data());

    const long long s = synth_pos[k];
    const long long t0 = std::max<long long>(0, -s);
    const long long t1 =
        std::min<long long>(kPvWindow, static_cast<long long>(n_out) - s);
    for (long long t = t0; t < t1; ++t) {
      const double w = window[static_cast<std::size_t>(t)];
      out[static_cast<std::size_t>(s + t)] +=
          w * synth_frame[static_cast<std::size_t>(t)];
      wsum[static_cast<std::size_t>(s + t)] += w * w;
    }
  }

  for (std::size_t i = 0; i < n_out; ++i) {
    out[i] = wsum[i] > 1e-9 ? out[i] / wsum[i] : 0.0;
  }
  return out;
}

}  // namespace polymix
