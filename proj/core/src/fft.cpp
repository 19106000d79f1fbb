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
#include "polymix/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>

#include "polymix/errors.hpp"

namespace polymix {
namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

RealFft::RealFft(int n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n <= 0) throw ContractError("RealFft: size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  impl_->real = fftw_alloc_real(static_cast<std::size_t>(n));
  impl_->cplx = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  impl_->fwd =
      fftw_plan_dft_r2c_1d(n, impl_->real, impl_->cplx, FFTW_ESTIMATE);
  impl_->inv =
      fftw_plan_dft_c2r_1d(n, impl_->cplx, impl_->real, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->inv) fftw_destroy_plan(impl_->inv);
  if (impl_->real) fftw_free(impl_->real);
  if (impl_->cplx) fftw_free(impl_->cplx);
}

void RealFft::forward(const double* in, std::complex<double>* out) {
  std::memcpy(impl_->real, in, sizeof(double) * static_cast<std::size_t>(n_));
  fftw_execute(impl_->fwd);
  std::memcpy(out, impl_->cplx,
              sizeof(fftw_complex) * static_cast<std::size_t>(bins()));
}

void RealFft::inverse(const std::complex<double>* in, double* out) {
  std::memcpy(impl_->cplx, in,
              sizeof(fftw_complex) * static_cast<std::size_t>(bins()));
  fftw_execute(impl_->inv);
  const double scale = 1.0 / n_;
  for (int i = 0; i < n_; ++i) out[i] = impl_->real[i] * scale;
}

std::vector<std::complex<double>> RealFft::forward(
    const std::vector<double>& x) {
  if (x.size() != static_cast<std::size_t>(n_)) {
    throw ContractError("RealFft::forward: length mismatch");
  }
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins()));
  forward(x.data(), spec.data());
  return spec;
}

std::vector<double> RealFft::inverse(
    const std::vector<std::complex<double>>& spec) {
  if (spec.size() != static_cast<std::size_t>(bins())) {
    throw ContractError("RealFft::inverse: length mismatch");
  }
  std::vector<double> x(static_cast<std::size_t>(n_));
  inverse(spec.data(), x.data());
  return x;
}

struct ComplexFft::Impl {
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;
};

ComplexFft::ComplexFft(int n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n <= 0) throw ContractError("ComplexFft: size must be positive");
  std::lock_guard<std::mutex> lock(plan_mutex());
  impl_->in = fftw_alloc_complex(static_cast<std::size_t>(n));
  impl_->out = fftw_alloc_complex(static_cast<std::size_t>(n));
  impl_->plan = fftw_plan_dft_1d(n, impl_->in, impl_->out, FFTW_FORWARD,
                                 FFTW_ESTIMATE);
}

ComplexFft::~ComplexFft() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (impl_->plan) fftw_destroy_plan(impl_->plan);
  if (impl_->in) fftw_free(impl_->in);
  if (impl_->out) fftw_free(impl_->out);
}

void ComplexFft::forward(const std::complex<double>* in,
                         std::complex<double>* out) {
  std::memcpy(impl_->in, in,
              sizeof(fftw_complex) * static_cast<std::size_t>(n_));
  fftw_execute(impl_->plan);
  std::memcpy(out, impl_->out,
              sizeof(fftw_complex) * static_cast<std::size_t>(n_));
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
  }
  return w;
}

}  // namespace polymix
