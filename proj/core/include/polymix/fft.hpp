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
#ifndef POLYMIX_FFT_HPP_
#define POLYMIX_FFT_HPP_

#include <complex>
#include <memory>
#include <vector>

namespace polymix {

/// Fixed-size real-to-complex FFT pair.  Plans are created once per
/// instance with deterministic (estimate-mode) planning; execution copies
/// through aligned internal buffers, so one instance is reusable but not
/// shareable across threads.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  /// out must hold bins() entries.
  void forward(const double* in, std::complex<double>* out);
  /// in must hold bins() entries; output is scaled by 1/n so
  /// inverse(forward(x)) == x.
  void inverse(const std::complex<double>* in, double* out);

  /// Vector conveniences; x.size() must equal size().
  std::vector<std::complex<double>> forward(const std::vector<double>& x);
  std::vector<double> inverse(const std::vector<std::complex<double>>& spec);

 private:
  struct Impl;
  int n_;
  std::unique_ptr<Impl> impl_;
};

/// Fixed-size complex forward FFT (unnormalized).
class ComplexFft {
 public:
  explicit ComplexFft(int n);
  ~ComplexFft();
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;

  int size() const { return n_; }
  void forward(const std::complex<double>* in, std::complex<double>* out);

 private:
  struct Impl;
  int n_;
  std::unique_ptr<Impl> impl_;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

}  // namespace polymix

#endif  // POLYMIX_FFT_HPP_
