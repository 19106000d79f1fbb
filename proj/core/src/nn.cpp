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
#include "polymix/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include <Eigen/Dense>

#include "polymix/errors.hpp"
#include "polymix/rng.hpp"

namespace polymix {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr double kBnEpsilon = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = 0.9*running + 0.1*batch

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

/// Propagated shape: either a feature map {c, h, w} or a flat vector.
struct Dims {
  bool flat = false;
  std::size_t c = 0, h = 0, w = 0;  // flat uses c as the feature count
  std::size_t numel() const { return flat ? c : c * h * w; }
};

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kBatchNorm: return "bn";
    case LayerKind::kActivation: return "act";
    case LayerKind::kMaxPool: return "pool";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSigmoid: return "sigmoid";
  }
  return "layer";
}

// ---------------------------------------------------------------------
// Layers.  Each owns its parameters and whatever it must cache between a
// train-mode forward and the matching backward.  Activations themselves
// are cached once, model-wide, not per layer.

class Layer {
 public:
  Layer(std::string name, Dims in, Dims out)
      : name_(std::move(name)), in_(in), out_(out) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  const Dims& in_dims() const { return in_; }
  const Dims& out_dims() const { return out_; }

  /// in/out are full batches; batch size is in.shape[0].
  virtual void forward(const Tensor& in, Tensor& out,
                       const ForwardOptions& options, Rng& dropout_rng) = 0;

  /// din receives d(loss)/d(in); parameter grads accumulate.
  virtual void backward(const Tensor& in, const Tensor& out,
                        const Tensor& dout, Tensor& din) = 0;

  virtual std::vector<Parameter*> params() { return {}; }
  virtual std::vector<std::pair<std::string, Tensor*>> state() {
    std::vector<std::pair<std::string, Tensor*>> s;
    for (Parameter* p : params()) s.emplace_back(p->name, &p->value);
    return s;
  }

 protected:
  std::string name_;
  Dims in_, out_;
};

class ConvLayer : public Layer {
 public:
  ConvLayer(std::string name, Dims in, int out_c, Rng& rng)
      : Layer(std::move(name), in,
              Dims{false, static_cast<std::size_t>(out_c), in.h, in.w}),
        k_(in.c * 9) {
    weight_.name = name_ + ".weight";
    weight_.value = Tensor({static_cast<std::size_t>(out_c), in.c, 3, 3});
    weight_.grad = Tensor(weight_.value.shape);
    bias_.name = name_ + ".bias";
    bias_.value = Tensor({static_cast<std::size_t>(out_c)});
    bias_.grad = Tensor(bias_.value.shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(k_));
    for (double& w : weight_.value.data) w = rng.normal(0.0, stddev);
  }

  void forward(const Tensor& in, Tensor& out, const ForwardOptions&,
               Rng&) override {
    const std::size_t batch = in.shape[0];
    const std::size_t hw = in_.h * in_.w;
    cols_.resize(k_ * hw);
    ConstMapMat w(weight_.value.data.data(),
                  static_cast<Eigen::Index>(out_.c),
                  static_cast<Eigen::Index>(k_));
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(in.data.data() + b * in_.numel());
      ConstMapMat c(cols_.data(), static_cast<Eigen::Index>(k_),
                    static_cast<Eigen::Index>(hw));
      MapMat o(out.data.data() + b * out_.numel(),
               static_cast<Eigen::Index>(out_.c),
               static_cast<Eigen::Index>(hw));
      o.noalias() = w * c;
      for (std::size_t oc = 0; oc < out_.c; ++oc) {
        o.row(static_cast<Eigen::Index>(oc)).array() +=
            bias_.value[oc];
      }
    }
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& dout,
                Tensor& din) override {
    const std::size_t batch = in.shape[0];
    const std::size_t hw = in_.h * in_.w;
    cols_.resize(k_ * hw);
    col_grad_.resize(k_ * hw);
    ConstMapMat w(weight_.value.data.data(),
                  static_cast<Eigen::Index>(out_.c),
                  static_cast<Eigen::Index>(k_));
    MapMat dw(weight_.grad.data.data(), static_cast<Eigen::Index>(out_.c),
              static_cast<Eigen::Index>(k_));
    std::fill(din.data.begin(), din.data.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(in.data.data() + b * in_.numel());
      ConstMapMat c(cols_.data(), static_cast<Eigen::Index>(k_),
                    static_cast<Eigen::Index>(hw));
      ConstMapMat dy(dout.data.data() + b * out_.numel(),
                     static_cast<Eigen::Index>(out_.c),
                     static_cast<Eigen::Index>(hw));
      dw.noalias() += dy * c.transpose();
      // Sequential sum: Eigen's vectorized redux groups terms by buffer
      // alignment, which varies run to run and breaks bit reproducibility.
      const double* dyp = dout.data.data() + b * out_.numel();
      for (std::size_t oc = 0; oc < out_.c; ++oc) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += dyp[oc * hw + i];
        bias_.grad[oc] += acc;
      }
      MapMat cg(col_grad_.data(), static_cast<Eigen::Index>(k_),
                static_cast<Eigen::Index>(hw));
      cg.noalias() = w.transpose() * dy;
      col2im(din.data.data() + b * in_.numel());
    }
  }

  std::vector<Parameter*> params() override { return {&weight_, &bias_}; }

 private:
  // Patch matrix layout: row (c*3 + ky)*3 + kx, column y*W + x, so the
  // kernel applied at (y, x) reads input (y + ky - 1, x + kx - 1).
  void im2col(const double* src) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in_.h);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(in_.w);
    double* dst = cols_.data();
    for (std::size_t c = 0; c < in_.c; ++c) {
      const double* plane = src + c * in_.h * in_.w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          for (std::ptrdiff_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = y + ky - 1;
            if (sy < 0 || sy >= h) {
              std::fill(dst, dst + w, 0.0);
              dst += w;
              continue;
            }
            const double* row = plane + sy * w;
            for (std::ptrdiff_t x = 0; x < w; ++x) {
              const std::ptrdiff_t sx = x + kx - 1;
              *dst++ = (sx < 0 || sx >= w) ? 0.0 : row[sx];
            }
          }
        }
      }
    }
  }

  void col2im(double* dst) const {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in_.h);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(in_.w);
    const double* src = col_grad_.data();
    for (std::size_t c = 0; c < in_.c; ++c) {
      double* plane = dst + c * in_.h * in_.w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          for (std::ptrdiff_t y = 0; y < h; ++y) {
            const std::ptrdiff_t sy = y + ky - 1;
            if (sy < 0 || sy >= h) {
              src += w;
              continue;
            }
            double* row = plane + sy * w;
            for (std::ptrdiff_t x = 0; x < w; ++x) {
              const std::ptrdiff_t sx = x + kx - 1;
              if (sx >= 0 && sx < w) row[sx] += *src;
              ++src;
            }
          }
        }
      }
    }
  }

  std::size_t k_;  // in_c * 9
  Parameter weight_, bias_;
  std::vector<double> cols_, col_grad_;
};

/// Normalizes per channel over (batch, h, w), or per feature for flat
/// inputs.  Running statistics store the biased batch moments.
class BatchNormLayer : public Layer {
 public:
  BatchNormLayer(std::string name, Dims in) : Layer(std::move(name), in, in) {
    const std::size_t c = in.c;
    gamma_.name = name_ + ".gamma";
    gamma_.value = Tensor({c});
    std::fill(gamma_.value.data.begin(), gamma_.value.data.end(), 1.0);
    gamma_.grad = Tensor({c});
    beta_.name = name_ + ".beta";
    beta_.value = Tensor({c});
    beta_.grad = Tensor({c});
    running_mean_ = Tensor({c});
    running_var_ = Tensor({c});
    std::fill(running_var_.data.begin(), running_var_.data.end(), 1.0);
  }

  void forward(const Tensor& in, Tensor& out, const ForwardOptions& options,
               Rng&) override {
    const std::size_t batch = in.shape[0];
    const std::size_t c = channels();
    const std::size_t plane = plane_size();
    const std::size_t n = batch * plane;
    used_batch_stats_ = options.batch_stats;
    if (options.batch_stats) {
      mean_.assign(c, 0.0);
      inv_std_.assign(c, 0.0);
      if (options.cache_for_backward) xhat_.resize(in.numel());
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* src = in.data.data() + (b * c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) sum += src[i];
        }
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const double* src = in.data.data() + (b * c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = src[i] - mean;
            sq += d * d;
          }
        }
        const double var = sq / static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + kBnEpsilon);
        mean_[ch] = mean;
        inv_std_[ch] = inv;
        running_mean_[ch] =
            kBnMomentum * running_mean_[ch] + (1.0 - kBnMomentum) * mean;
        running_var_[ch] =
            kBnMomentum * running_var_[ch] + (1.0 - kBnMomentum) * var;
        const double g = gamma_.value[ch], be = beta_.value[ch];
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = (b * c + ch) * plane;
          const double* src = in.data.data() + off;
          double* dst = out.data.data() + off;
          if (options.cache_for_backward) {
            double* xh = xhat_.data() + off;
            for (std::size_t i = 0; i < plane; ++i) {
              xh[i] = (src[i] - mean) * inv;
              dst[i] = g * xh[i] + be;
            }
          } else {
            for (std::size_t i = 0; i < plane; ++i) {
              dst[i] = g * (src[i] - mean) * inv + be;
            }
          }
        }
      }
    } else {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double inv = 1.0 / std::sqrt(running_var_[ch] + kBnEpsilon);
        const double g = gamma_.value[ch], be = beta_.value[ch];
        const double mean = running_mean_[ch];
        for (std::size_t b = 0; b < batch; ++b) {
          const std::size_t off = (b * c + ch) * plane;
          const double* src = in.data.data() + off;
          double* dst = out.data.data() + off;
          for (std::size_t i = 0; i < plane; ++i) {
            dst[i] = g * (src[i] - mean) * inv + be;
          }
        }
      }
    }
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& dout,
                Tensor& din) override {
    if (!used_batch_stats_) {
      throw ContractError("batch_norm backward without batch statistics");
    }
    const std::size_t batch = in.shape[0];
    const std::size_t c = channels();
    const std::size_t plane = plane_size();
    const double n = static_cast<double>(batch * plane);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t off = (b * c + ch) * plane;
        const double* dy = dout.data.data() + off;
        const double* xh = xhat_.data() + off;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += dy[i];
          sum_dy_xhat += dy[i] * xh[i];
        }
      }
      gamma_.grad[ch] += sum_dy_xhat;
      beta_.grad[ch] += sum_dy;
      const double scale = gamma_.value[ch] * inv_std_[ch] / n;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t off = (b * c + ch) * plane;
        const double* dy = dout.data.data() + off;
        const double* xh = xhat_.data() + off;
        double* dx = din.data.data() + off;
        for (std::size_t i = 0; i < plane; ++i) {
          dx[i] = scale * (n * dy[i] - sum_dy - xh[i] * sum_dy_xhat);
        }
      }
    }
  }

  std::vector<Parameter*> params() override { return {&gamma_, &beta_}; }

  std::vector<std::pair<std::string, Tensor*>> state() override {
    return {{gamma_.name, &gamma_.value},
            {beta_.name, &beta_.value},
            {name_ + ".running_mean", &running_mean_},
            {name_ + ".running_var", &running_var_}};
  }

 private:
  std::size_t channels() const { return in_.c; }
  std::size_t plane_size() const { return in_.flat ? 1 : in_.h * in_.w; }

  Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
  std::vector<double> mean_, inv_std_, xhat_;
  bool used_batch_stats_ = false;
};

class ActivationLayer : public Layer {
 public:
  ActivationLayer(std::string name, Dims in, Activation act, double alpha)
      : Layer(std::move(name), in, in), act_(act), alpha_(alpha) {}

  void forward(const Tensor& in, Tensor& out, const ForwardOptions&,
               Rng&) override {
    const std::size_t n = in.numel();
    if (act_ == Activation::kElu) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = in[i];
        out.data[i] = x > 0.0 ? x : std::expm1(x);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = in[i];
        out.data[i] = x > 0.0 ? x : alpha_ * x;
      }
    }
  }

  // Positive outputs correspond to positive inputs for both functions, so
  // the derivative reconstructs from the cached output alone.
  void backward(const Tensor&, const Tensor& out, const Tensor& dout,
                Tensor& din) override {
    const std::size_t n = out.numel();
    if (act_ == Activation::kElu) {
      for (std::size_t i = 0; i < n; ++i) {
        const double y = out[i];
        din.data[i] = dout[i] * (y > 0.0 ? 1.0 : y + 1.0);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        din.data[i] = dout[i] * (out[i] > 0.0 ? 1.0 : alpha_);
      }
    }
  }

 private:
  Activation act_;
  double alpha_;
};

class MaxPoolLayer : public Layer {
 public:
  MaxPoolLayer(std::string name, Dims in, int ph, int pw)
      : Layer(std::move(name), in,
              Dims{false, in.c, in.h / static_cast<std::size_t>(ph),
                   in.w / static_cast<std::size_t>(pw)}),
        ph_(static_cast<std::size_t>(ph)),
        pw_(static_cast<std::size_t>(pw)) {}

  void forward(const Tensor& in, Tensor& out, const ForwardOptions& options,
               Rng&) override {
    const std::size_t batch = in.shape[0];
    if (options.cache_for_backward) {
      argmax_.resize(batch * out_.numel());
    }
    std::size_t o = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < in_.c; ++c) {
        const std::size_t plane = (b * in_.c + c) * in_.h * in_.w;
        for (std::size_t oy = 0; oy < out_.h; ++oy) {
          for (std::size_t ox = 0; ox < out_.w; ++ox, ++o) {
            double best = -1e300;
            std::size_t best_at = 0;
            for (std::size_t dy = 0; dy < ph_; ++dy) {
              const std::size_t base =
                  plane + (oy * ph_ + dy) * in_.w + ox * pw_;
              for (std::size_t dx = 0; dx < pw_; ++dx) {
                // First maximum wins in row-major scan order.
                if (in[base + dx] > best) {
                  best = in[base + dx];
                  best_at = base + dx;
                }
              }
            }
            out.data[o] = best;
            if (options.cache_for_backward) {
              argmax_[o] = static_cast<std::uint32_t>(best_at);
            }
          }
        }
      }
    }
  }

  void backward(const Tensor&, const Tensor&, const Tensor& dout,
                Tensor& din) override {
    std::fill(din.data.begin(), din.data.end(), 0.0);
    const std::size_t total = dout.data.size();
    for (std::size_t o = 0; o < total; ++o) {
      din.data[argmax_[o]] += dout[o];
    }
  }

 private:
  std::size_t ph_, pw_;
  std::vector<std::uint32_t> argmax_;
};

class DropoutLayer : public Layer {
 public:
  DropoutLayer(std::string name, Dims in, double rate)
      : Layer(std::move(name), in, in), rate_(rate) {}

  void forward(const Tensor& in, Tensor& out, const ForwardOptions& options,
               Rng& rng) override {
    const std::size_t n = in.numel();
    if (!options.dropout_active) {
      std::copy(in.data.begin(), in.data.end(), out.data.begin());
      // The matching backward must see an identity mask, not a stale one.
      if (options.cache_for_backward) mask_.assign(n, 1.0);
      return;
    }
    const double inv_keep = 1.0 / (1.0 - rate_);
    mask_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      mask_[i] = rng.uniform() >= rate_ ? inv_keep : 0.0;
      out.data[i] = in[i] * mask_[i];
    }
  }

  void backward(const Tensor&, const Tensor&, const Tensor& dout,
                Tensor& din) override {
    const std::size_t n = dout.data.size();
    for (std::size_t i = 0; i < n; ++i) din.data[i] = dout[i] * mask_[i];
  }

 private:
  double rate_;
  std::vector<double> mask_;
};

/// Pure reshape: row-major {B, C, H, W} already flattens in place.
class FlattenLayer : public Layer {
 public:
  FlattenLayer(std::string name, Dims in)
      : Layer(std::move(name), in, Dims{true, in.numel(), 0, 0}) {}

  void forward(const Tensor& in, Tensor& out, const ForwardOptions&,
               Rng&) override {
    std::copy(in.data.begin(), in.data.end(), out.data.begin());
  }

  void backward(const Tensor&, const Tensor&, const Tensor& dout,
                Tensor& din) override {
    std::copy(dout.data.begin(), dout.data.end(), din.data.begin());
  }
};

class DenseLayer : public Layer {
 public:
  DenseLayer(std::string name, Dims in, int units, Rng& rng)
      : Layer(std::move(name), in,
              Dims{true, static_cast<std::size_t>(units), 0, 0}) {
    weight_.name = name_ + ".weight";
    weight_.value = Tensor({static_cast<std::size_t>(units), in.c});
    weight_.grad = Tensor(weight_.value.shape);
    bias_.name = name_ + ".bias";
    bias_.value = Tensor({static_cast<std::size_t>(units)});
    bias_.grad = Tensor(bias_.value.shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(in.c));
    for (double& w : weight_.value.data) w = rng.normal(0.0, stddev);
  }

  void forward(const Tensor& in, Tensor& out, const ForwardOptions&,
               Rng&) override {
    const auto batch = static_cast<Eigen::Index>(in.shape[0]);
    ConstMapMat x(in.data.data(), batch, static_cast<Eigen::Index>(in_.c));
    ConstMapMat w(weight_.value.data.data(),
                  static_cast<Eigen::Index>(out_.c),
                  static_cast<Eigen::Index>(in_.c));
    MapMat y(out.data.data(), batch, static_cast<Eigen::Index>(out_.c));
    y.noalias() = x * w.transpose();
    ConstMapMat b(bias_.value.data.data(), 1,
                  static_cast<Eigen::Index>(out_.c));
    y.rowwise() += b.row(0);
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& dout,
                Tensor& din) override {
    const auto batch = static_cast<Eigen::Index>(in.shape[0]);
    ConstMapMat x(in.data.data(), batch, static_cast<Eigen::Index>(in_.c));
    ConstMapMat dy(dout.data.data(), batch,
                   static_cast<Eigen::Index>(out_.c));
    MapMat dw(weight_.grad.data.data(), static_cast<Eigen::Index>(out_.c),
              static_cast<Eigen::Index>(in_.c));
    dw.noalias() += dy.transpose() * x;
    // Sequential sums for the same reproducibility reason as the conv bias.
    for (std::size_t u = 0; u < out_.c; ++u) {
      double acc = 0.0;
      for (std::size_t b = 0; b < in.shape[0]; ++b) {
        acc += dout.data[b * out_.c + u];
      }
      bias_.grad[u] += acc;
    }
    ConstMapMat w(weight_.value.data.data(),
                  static_cast<Eigen::Index>(out_.c),
                  static_cast<Eigen::Index>(in_.c));
    MapMat dx(din.data.data(), batch, static_cast<Eigen::Index>(in_.c));
    dx.noalias() = dy * w;
  }

  std::vector<Parameter*> params() override { return {&weight_, &bias_}; }

 private:
  Parameter weight_, bias_;
};

class SigmoidLayer : public Layer {
 public:
  SigmoidLayer(std::string name, Dims in) : Layer(std::move(name), in, in) {}

  void forward(const Tensor& in, Tensor& out, const ForwardOptions&,
               Rng&) override {
    const std::size_t n = in.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = in[i];
      if (x >= 0.0) {
        out.data[i] = 1.0 / (1.0 + std::exp(-x));
      } else {
        const double e = std::exp(x);
        out.data[i] = e / (1.0 + e);
      }
    }
  }

  void backward(const Tensor&, const Tensor& out, const Tensor& dout,
                Tensor& din) override {
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const double y = out[i];
      din.data[i] = dout[i] * y * (1.0 - y);
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> s)
    : shape(std::move(s)), data(product(shape), 0.0) {}

struct Model::Impl {
  ModelConfig config;
  std::vector<std::unique_ptr<Layer>> layers;
  Rng dropout_rng{0};
  // acts[0] is the input batch, acts[i + 1] the output of layer i.
  std::vector<Tensor> acts;
  bool has_cache = false;

  void build(std::uint64_t seed) {
    Rng rng(seed);
    const std::uint64_t dropout_seed = rng.fork_seed();
    Dims dims{false, static_cast<std::size_t>(config.in_channels),
              static_cast<std::size_t>(config.in_height),
              static_cast<std::size_t>(config.in_width)};
    if (dims.c == 0 || dims.h == 0 || dims.w == 0) {
      throw ConfigError("model input shape has a zero dimension");
    }
    std::array<int, 8> kind_counts{};
    for (const LayerSpec& spec : config.layers) {
      const int ordinal = ++kind_counts[static_cast<std::size_t>(spec.kind)];
      const std::string name =
          std::string(kind_name(spec.kind)) + std::to_string(ordinal);
      switch (spec.kind) {
        case LayerKind::kConv: {
          if (dims.flat) throw ConfigError(name + ": conv after flatten");
          if (spec.units <= 0) throw ConfigError(name + ": depth must be > 0");
          layers.push_back(
              std::make_unique<ConvLayer>(name, dims, spec.units, rng));
          break;
        }
        case LayerKind::kBatchNorm:
          layers.push_back(std::make_unique<BatchNormLayer>(name, dims));
          break;
        case LayerKind::kActivation:
          layers.push_back(std::make_unique<ActivationLayer>(
              name, dims, spec.activation, spec.alpha));
          break;
        case LayerKind::kMaxPool: {
          if (dims.flat) throw ConfigError(name + ": pool after flatten");
          if (spec.pool_h <= 0 || spec.pool_w <= 0) {
            throw ConfigError(name + ": pool size must be > 0");
          }
          const std::size_t h = dims.h / static_cast<std::size_t>(spec.pool_h);
          const std::size_t w = dims.w / static_cast<std::size_t>(spec.pool_w);
          if (h == 0 || w == 0) {
            throw ConfigError(name + ": pooling chain exhausts the input");
          }
          layers.push_back(std::make_unique<MaxPoolLayer>(
              name, dims, spec.pool_h, spec.pool_w));
          break;
        }
        case LayerKind::kDropout:
          if (spec.rate < 0.0 || spec.rate >= 1.0) {
            throw ConfigError(name + ": rate must be in [0, 1)");
          }
          layers.push_back(
              std::make_unique<DropoutLayer>(name, dims, spec.rate));
          break;
        case LayerKind::kFlatten:
          if (dims.flat) throw ConfigError(name + ": input already flat");
          layers.push_back(std::make_unique<FlattenLayer>(name, dims));
          break;
        case LayerKind::kDense:
          if (!dims.flat) throw ConfigError(name + ": dense before flatten");
          if (spec.units <= 0) throw ConfigError(name + ": units must be > 0");
          layers.push_back(
              std::make_unique<DenseLayer>(name, dims, spec.units, rng));
          break;
        case LayerKind::kSigmoid:
          layers.push_back(std::make_unique<SigmoidLayer>(name, dims));
          break;
      }
      dims = layers.back()->out_dims();
    }
    dropout_rng = Rng(dropout_seed);
  }

  std::vector<Parameter*> all_params() {
    std::vector<Parameter*> out;
    for (auto& layer : layers) {
      for (Parameter* p : layer->params()) out.push_back(p);
    }
    return out;
  }
};

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = config;
  impl_->build(seed);
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

const ModelConfig& Model::config() const { return impl_->config; }

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : impl_->layers) {
    for (Parameter* p : layer->params()) n += p->value.numel();
  }
  return n;
}

std::vector<LayerShape> Model::output_shapes() const {
  std::vector<LayerShape> shapes;
  shapes.reserve(impl_->layers.size());
  for (const auto& layer : impl_->layers) {
    const Dims& d = layer->out_dims();
    shapes.push_back(d.flat ? LayerShape{layer->name(), d.c, 1, 1}
                            : LayerShape{layer->name(), d.c, d.h, d.w});
  }
  return shapes;
}

Tensor Model::forward(const Tensor& x, Mode mode) {
  const bool train = mode == Mode::kTrain;
  return forward(x, ForwardOptions{train, train, train});
}

Tensor Model::forward(const Tensor& x, const ForwardOptions& options) {
  if (x.shape.size() != 4 ||
      x.shape[1] != static_cast<std::size_t>(impl_->config.in_channels) ||
      x.shape[2] != static_cast<std::size_t>(impl_->config.in_height) ||
      x.shape[3] != static_cast<std::size_t>(impl_->config.in_width)) {
    throw ContractError("forward: input shape does not match the model");
  }
  const std::size_t batch = x.shape[0];
  if (batch == 0) throw ContractError("forward: empty batch");

  auto& acts = impl_->acts;
  acts.resize(impl_->layers.size() + 1);
  acts[0] = x;
  for (std::size_t i = 0; i < impl_->layers.size(); ++i) {
    Layer& layer = *impl_->layers[i];
    const Dims& d = layer.out_dims();
    Tensor& out = acts[i + 1];
    const std::vector<std::size_t> want =
        d.flat ? std::vector<std::size_t>{batch, d.c}
               : std::vector<std::size_t>{batch, d.c, d.h, d.w};
    if (out.shape != want) out = Tensor(want);
    layer.forward(acts[i], out, options, impl_->dropout_rng);
    for (double v : out.data) {
      if (!std::isfinite(v)) {
        throw NumericError("forward: non-finite output at layer " +
                           layer.name());
      }
    }
  }
  impl_->has_cache = options.cache_for_backward;
  return acts.back();
}

void Model::backward(const Tensor& grad_output) {
  if (!impl_->has_cache) {
    throw ContractError("backward: no cached train-mode forward");
  }
  if (grad_output.shape != impl_->acts.back().shape) {
    throw ContractError("backward: gradient shape mismatch");
  }
  Tensor dout = grad_output;
  Tensor din;
  for (std::size_t i = impl_->layers.size(); i-- > 0;) {
    Layer& layer = *impl_->layers[i];
    if (din.shape != impl_->acts[i].shape) din = Tensor(impl_->acts[i].shape);
    layer.backward(impl_->acts[i], impl_->acts[i + 1], dout, din);
    std::swap(dout, din);
  }
}

std::vector<Parameter*> Model::parameters() { return impl_->all_params(); }

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (auto& layer : impl_->layers) {
    for (Parameter* p : layer->params()) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::state_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (auto& layer : impl_->layers) {
    for (auto& entry : layer->state()) out.push_back(entry);
  }
  return out;
}

void Model::zero_grads() {
  for (Parameter* p : impl_->all_params()) {
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }
}

void Model::reseed_dropout(std::uint64_t seed) {
  impl_->dropout_rng = Rng(seed);
}

// ---------------------------------------------------------------------

LossResult bce_loss(const Tensor& scores, const Tensor& targets) {
  if (scores.shape != targets.shape) {
    throw ContractError("bce_loss: score/target shape mismatch");
  }
  const std::size_t n = scores.numel();
  if (n == 0) throw ContractError("bce_loss: empty input");
  constexpr double kClamp = 1e-7;
  LossResult result;
  result.grad = Tensor(scores.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = targets[i];
    const double raw = scores[i];
    const double s = std::clamp(raw, kClamp, 1.0 - kClamp);
    loss -= t * std::log(s) + (1.0 - t) * std::log(1.0 - s);
    // The clamp flattens the loss outside [kClamp, 1 - kClamp], so the
    // exact derivative there is zero.
    if (raw >= kClamp && raw <= 1.0 - kClamp) {
      result.grad.data[i] =
          (s - t) / (s * (1.0 - s) * static_cast<double>(n));
    }
  }
  result.loss = loss / static_cast<double>(n);
  return result;
}

AdamState make_adam(const std::vector<Parameter*>& params, double base_lr) {
  AdamState state;
  state.base_lr = base_lr;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Parameter* p : params) {
    state.m.emplace_back(p->value.shape);
    state.v.emplace_back(p->value.shape);
  }
  return state;
}

void adam_step(AdamState& state, const std::vector<Parameter*>& params,
               double lr) {
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: state/parameter count mismatch");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params[p]->value;
    const Tensor& grad = params[p]->grad;
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    if (value.shape != m.shape) {
      throw ContractError("adam_step: moment shape mismatch");
    }
    const std::size_t n = value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = grad[i];
      m.data[i] = kAdamBeta1 * m.data[i] + (1.0 - kAdamBeta1) * g;
      v.data[i] = kAdamBeta2 * v.data[i] + (1.0 - kAdamBeta2) * g * g;
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      value.data[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    }
  }
}

double effective_lr(double base_lr, int epoch, double plateau_factor) {
  return base_lr * std::pow(0.9, epoch) * plateau_factor;
}

// ---------------------------------------------------------------------
// Checkpoint format, all little-endian:
//   "PMXM", u32 version,
//   config: u32 name length + bytes, u32 in_c/in_h/in_w, u32 layer count,
//           per layer u32 kind, i32 units/pool_h/pool_w, f64 rate,
//           u32 activation, f64 alpha,
//   u32 tensor count, per tensor u32 ndim, u32 dims..., f32 payload,
//   u8 adam flag; if set: f64 base_lr, u64 step, then m and v tensors.

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) throw FormatError("checkpoint: truncated file");
  return value;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  std::vector<float> payload(t.data.begin(), t.data.end());
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

void read_tensor_into(std::istream& in, Tensor& t) {
  const auto ndim = read_pod<std::uint32_t>(in);
  if (ndim > 8) throw FormatError("checkpoint: implausible tensor rank");
  std::vector<std::size_t> shape(ndim);
  std::size_t n = 1;
  for (auto& d : shape) {
    d = read_pod<std::uint32_t>(in);
    if (d == 0 || n > (1u << 30) / std::max<std::size_t>(d, 1)) {
      throw FormatError("checkpoint: implausible tensor shape");
    }
    n *= d;
  }
  if (shape != t.shape) {
    throw FormatError("checkpoint: tensor shape does not match the config");
  }
  std::vector<float> payload(n);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw FormatError("checkpoint: truncated tensor payload");
  std::copy(payload.begin(), payload.end(), t.data.begin());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model,
                     const AdamState* adam) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("save_checkpoint: cannot open " +
                                path.string());
  out.write("PMXM", 4);
  write_pod<std::uint32_t>(out, 1);
  const ModelConfig& config = model.config();
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(config.name.size()));
  out.write(config.name.data(),
            static_cast<std::streamsize>(config.name.size()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(config.in_channels));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(config.in_height));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(config.in_width));
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(config.layers.size()));
  for (const LayerSpec& spec : config.layers) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(spec.kind));
    write_pod<std::int32_t>(out, spec.units);
    write_pod<std::int32_t>(out, spec.pool_h);
    write_pod<std::int32_t>(out, spec.pool_w);
    write_pod<double>(out, spec.rate);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(spec.activation));
    write_pod<double>(out, spec.alpha);
  }
  const auto tensors = model.state_tensors();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) write_tensor(out, *tensor);
  write_pod<std::uint8_t>(out, adam ? 1 : 0);
  if (adam) {
    write_pod<double>(out, adam->base_lr);
    write_pod<std::uint64_t>(out, adam->step);
    for (const Tensor& t : adam->m) write_tensor(out, t);
    for (const Tensor& t : adam->v) write_tensor(out, t);
  }
  if (!out) throw ContractError("save_checkpoint: write failed");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_checkpoint: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PMXM", 4) != 0) {
    throw FormatError("load_checkpoint: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != 1) throw FormatError("load_checkpoint: unknown version");
  ModelConfig config;
  const auto name_len = read_pod<std::uint32_t>(in);
  if (name_len > 4096) throw FormatError("load_checkpoint: bad name length");
  config.name.resize(name_len);
  in.read(config.name.data(), name_len);
  config.in_channels = static_cast<int>(read_pod<std::uint32_t>(in));
  config.in_height = static_cast<int>(read_pod<std::uint32_t>(in));
  config.in_width = static_cast<int>(read_pod<std::uint32_t>(in));
  const auto n_layers = read_pod<std::uint32_t>(in);
  if (n_layers > 1024) throw FormatError("load_checkpoint: bad layer count");
  config.layers.resize(n_layers);
  for (LayerSpec& spec : config.layers) {
    const auto kind = read_pod<std::uint32_t>(in);
    if (kind > static_cast<std::uint32_t>(LayerKind::kSigmoid)) {
      throw FormatError("load_checkpoint: unknown layer kind");
    }
    spec.kind = static_cast<LayerKind>(kind);
    spec.units = read_pod<std::int32_t>(in);
    spec.pool_h = read_pod<std::int32_t>(in);
    spec.pool_w = read_pod<std::int32_t>(in);
    spec.rate = read_pod<double>(in);
    const auto act = read_pod<std::uint32_t>(in);
    if (act > static_cast<std::uint32_t>(Activation::kLeakyRelu)) {
      throw FormatError("load_checkpoint: unknown activation");
    }
    spec.activation = static_cast<Activation>(act);
    spec.alpha = read_pod<double>(in);
  }
  LoadedCheckpoint loaded{Model(config, 0), std::nullopt};
  const auto tensors = loaded.model.state_tensors();
  const auto n_tensors = read_pod<std::uint32_t>(in);
  if (n_tensors != tensors.size()) {
    throw FormatError("load_checkpoint: tensor count mismatch");
  }
  for (const auto& [name, tensor] : tensors) read_tensor_into(in, *tensor);
  const auto has_adam = read_pod<std::uint8_t>(in);
  if (has_adam == 1) {
    AdamState adam = make_adam(loaded.model.parameters());
    adam.base_lr = read_pod<double>(in);
    adam.step = read_pod<std::uint64_t>(in);
    for (Tensor& t : adam.m) read_tensor_into(in, t);
    for (Tensor& t : adam.v) read_tensor_into(in, t);
    loaded.adam = std::move(adam);
  } else if (has_adam != 0) {
    throw FormatError("load_checkpoint: bad adam flag");
  }
  return loaded;
}

// ---------------------------------------------------------------------

namespace {

ModelConfig blocks_config(std::string name, int convs_per_block,
                          Activation act, std::array<int, 4> depths,
                          int dense_units, int classes) {
  constexpr std::array<std::pair<int, int>, 4> kPools = {
      {{2, 2}, {2, 2}, {3, 3}, {3, 3}}};
  ModelConfig config;
  config.name = std::move(name);
  auto activation = [&] {
    LayerSpec s;
    s.kind = LayerKind::kActivation;
    s.activation = act;
    s.alpha = 0.3;
    return s;
  };
  for (int block = 0; block < 4; ++block) {
    for (int c = 0; c < convs_per_block; ++c) {
      LayerSpec conv;
      conv.kind = LayerKind::kConv;
      conv.units = depths[static_cast<std::size_t>(block)];
      config.layers.push_back(conv);
    }
    config.layers.push_back({LayerKind::kBatchNorm});
    config.layers.push_back(activation());
    LayerSpec pool;
    pool.kind = LayerKind::kMaxPool;
    pool.pool_h = kPools[static_cast<std::size_t>(block)].first;
    pool.pool_w = kPools[static_cast<std::size_t>(block)].second;
    config.layers.push_back(pool);
    LayerSpec drop;
    drop.kind = LayerKind::kDropout;
    drop.rate = 0.2;
    config.layers.push_back(drop);
  }
  config.layers.push_back({LayerKind::kFlatten});
  LayerSpec dense1;
  dense1.kind = LayerKind::kDense;
  dense1.units = dense_units;
  config.layers.push_back(dense1);
  config.layers.push_back(activation());
  config.layers.push_back({LayerKind::kBatchNorm});
  LayerSpec drop;
  drop.kind = LayerKind::kDropout;
  drop.rate = 0.5;
  config.layers.push_back(drop);
  LayerSpec dense2;
  dense2.kind = LayerKind::kDense;
  dense2.units = classes;
  config.layers.push_back(dense2);
  config.layers.push_back({LayerKind::kSigmoid});
  return config;
}

}  // namespace

ModelConfig initial_config(std::array<int, 4> depths, int dense_units,
                           int classes) {
  return blocks_config("initial", 1, Activation::kElu, depths, dense_units,
                       classes);
}

ModelConfig proposed_config(std::array<int, 4> depths, int dense_units,
                            int classes) {
  return blocks_config("proposed", 2, Activation::kLeakyRelu, depths,
                       dense_units, classes);
}

}  // namespace polymix
