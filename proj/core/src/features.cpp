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
#include "polymix/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

#include "polymix/errors.hpp"
#include "polymix/fft.hpp"

namespace polymix {
namespace {

constexpr int kRate = 22050;
constexpr int kClipSamples = 22050;
constexpr int kFftSize = 16384;  // >= the longest kernel (11339 samples)
constexpr int kPad = kFftSize / 2;

/// Correlation template for one bin: the conjugated, window-normalized
/// complex exponential, phase-referenced to the kernel center.
struct Kernel {
  int half = 0;  // offset of the center tap
  Eigen::VectorXd re, im;
};

std::vector<Kernel> build_kernels() {
  const double q = 1.0 / (std::pow(2.0, 1.0 / 12.0) - 1.0);
  std::vector<Kernel> kernels(kCqtBins);
  for (int k = 0; k < kCqtBins; ++k) {
    const double fk = cqt_bin_frequency(k);
    const int n = static_cast<int>(std::ceil(q * kRate / fk));
    const std::vector<double> w = hann_window(n);
    double wsum = 0.0;
    for (double v : w) wsum += v;

    Kernel& kernel = kernels[static_cast<std::size_t>(k)];
    kernel.half = n / 2;
    kernel.re.resize(n);
    kernel.im.resize(n);
    for (int i = 0; i < n; ++i) {
      const double phase = 2.0 * M_PI * fk * (i - kernel.half) / kRate;
      const double g = w[static_cast<std::size_t>(i)] / wsum;
      kernel.re[i] = g * std::cos(phase);
      kernel.im[i] = -g * std::sin(phase);
    }
  }
  return kernels;
}

const std::vector<Kernel>& kernel_bank() {
  static const std::vector<Kernel> bank = build_kernels();
  return bank;
}

/// Clip samples reflect-padded by kPad on both sides (edge sample not
/// repeated), shared by both transform routes.
std::vector<double> reflect_pad(const AudioClip& clip) {
  const auto n = static_cast<long long>(clip.samples.size());
  std::vector<double> padded(static_cast<std::size_t>(n + 2 * kPad));
  for (long long i = -kPad; i < n + kPad; ++i) {
    long long j = i;
    while (j < 0 || j >= n) {
      if (j < 0) j = -j;
      if (j >= n) j = 2 * (n - 1) - j;
    }
    padded[static_cast<std::size_t>(i + kPad)] =
        clip.samples[static_cast<std::size_t>(j)];
  }
  return padded;
}

void check_input(const AudioClip& clip) {
  if (clip.channels != 1) throw ContractError("cqt expects mono input");
  if (clip.sample_rate != kRate) throw ContractError("cqt expects 22050 Hz");
  if (clip.samples.size() != kClipSamples) {
    throw ContractError("cqt expects exactly one second of audio");
  }
}

/// Sparse FFT-domain form of one kernel.  With S the real-input spectrum
/// of a frame, the correlation is sum(c_direct * S[f]) plus the
/// conjugate of sum(c_mirror * S[f]); entries below 1e-10 of the peak
/// are dropped.
struct SpectralKernel {
  std::vector<int> direct_bins, mirror_bins;
  std::vector<std::complex<double>> direct_coef, mirror_coef;
};

std::vector<SpectralKernel> build_spectral_kernels() {
  const std::vector<Kernel>& bank = kernel_bank();
  ComplexFft fft(kFftSize);
  std::vector<SpectralKernel> out(kCqtBins);

  std::vector<std::complex<double>> buf(kFftSize);
  std::vector<std::complex<double>> spec(kFftSize);
  for (int k = 0; k < kCqtBins; ++k) {
    const Kernel& kernel = bank[static_cast<std::size_t>(k)];
    const int n = static_cast<int>(kernel.re.size());
    const int offset = kFftSize / 2 - kernel.half;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < n; ++i) {
      buf[static_cast<std::size_t>(offset + i)] = {kernel.re[i], kernel.im[i]};
    }
    fft.forward(buf.data(), spec.data());

    // sum_i s[i] b[i] = (1/N) sum_f S[f] B[(N-f) mod N]; folding the
    // f > N/2 half of the sum onto the real-input spectrum leaves one
    // run over B's negative frequencies and one, conjugated, over its
    // positive ones.
    double peak = 0.0;
    for (const auto& v : spec) peak = std::max(peak, std::abs(v));
    const double threshold = 1e-10 * peak / kFftSize;
    SpectralKernel& sk = out[static_cast<std::size_t>(k)];
    for (int f = 0; f <= kFftSize / 2; ++f) {
      const std::complex<double> c =
          spec[static_cast<std::size_t>((kFftSize - f) % kFftSize)] /
          static_cast<double>(kFftSize);
      if (std::abs(c) > threshold) {
        sk.direct_bins.push_back(f);
        sk.direct_coef.push_back(c);
      }
    }
    for (int f = 1; f < kFftSize / 2; ++f) {
      const std::complex<double> c =
          std::conj(spec[static_cast<std::size_t>(f)]) /
          static_cast<double>(kFftSize);
      if (std::abs(c) > threshold) {
        sk.mirror_bins.push_back(f);
        sk.mirror_coef.push_back(c);
      }
    }
  }
  return out;
}

const std::vector<SpectralKernel>& spectral_kernel_bank() {
  static const std::vector<SpectralKernel> bank = build_spectral_kernels();
  return bank;
}

}  // namespace

double cqt_bin_frequency(int bin) {
  return kCqtFMin * std::pow(2.0, static_cast<double>(bin) / kCqtBinsPerOctave);
}

std::vector<double> cqt(const AudioClip& clip) {
  check_input(clip);
  const std::vector<double> padded = reflect_pad(clip);
  const std::vector<Kernel>& bank = kernel_bank();

  std::vector<double> mag(static_cast<std::size_t>(kCqtBins) * kCqtFrames);
  for (int k = 0; k < kCqtBins; ++k) {
    const Kernel& kernel = bank[static_cast<std::size_t>(k)];
    const auto n = static_cast<std::size_t>(kernel.re.size());
    for (int t = 0; t < kCqtFrames; ++t) {
      const std::size_t start =
          static_cast<std::size_t>(kPad + t * kCqtHop - kernel.half);
      Eigen::Map<const Eigen::VectorXd> seg(&padded[start],
                                            static_cast<long>(n));
      const double yr = seg.dot(kernel.re);
      const double yi = seg.dot(kernel.im);
      mag[static_cast<std::size_t>(k) * kCqtFrames +
          static_cast<std::size_t>(t)] = std::hypot(yr, yi);
    }
  }
  return mag;
}

std::vector<double> cqt_fft(const AudioClip& clip) {
  check_input(clip);
  const std::vector<double> padded = reflect_pad(clip);
  const std::vector<SpectralKernel>& bank = spectral_kernel_bank();

  RealFft fft(kFftSize);
  std::vector<double> frame(kFftSize);
  std::vector<std::complex<double>> spec(
      static_cast<std::size_t>(kFftSize / 2 + 1));

  std::vector<double> mag(static_cast<std::size_t>(kCqtBins) * kCqtFrames);
  for (int t = 0; t < kCqtFrames; ++t) {
    // Segment centered on the hop position; kPad shifts exactly cancel.
    std::copy_n(padded.begin() + t * kCqtHop, kFftSize, frame.begin());
    fft.forward(frame.data(), spec.data());

    for (int k = 0; k < kCqtBins; ++k) {
      const SpectralKernel& sk = bank[static_cast<std::size_t>(k)];
      std::complex<double> acc(0.0, 0.0), mirror(0.0, 0.0);
      for (std::size_t i = 0; i < sk.direct_bins.size(); ++i) {
        acc += sk.direct_coef[i] *
               spec[static_cast<std::size_t>(sk.direct_bins[i])];
      }
      for (std::size_t i = 0; i < sk.mirror_bins.size(); ++i) {
        mirror += sk.mirror_coef[i] *
                  spec[static_cast<std::size_t>(sk.mirror_bins[i])];
      }
      acc += std::conj(mirror);
      mag[static_cast<std::size_t>(k) * kCqtFrames +
          static_cast<std::size_t>(t)] = std::abs(acc);
    }
  }
  return mag;
}

Spectrogram scale_db(const std::vector<double>& mag) {
  Spectrogram spec;
  spec.data.assign(mag.size(), 0.0);
  double peak = 0.0;
  for (double m : mag) {
    if (m < 0.0 || !std::isfinite(m)) {
      throw ContractError("scale_db expects finite non-negative magnitudes");
    }
    peak = std::max(peak, m);
  }
  if (peak <= 0.0) return spec;

  for (std::size_t i = 0; i < mag.size(); ++i) {
    const double db =
        mag[i] > 0.0 ? 20.0 * std::log10(mag[i] / peak) : -80.0;
    spec.data[i] = std::clamp((db + 80.0) / 80.0, 0.0, 1.0);
  }
  return spec;
}

}  // namespace polymix
