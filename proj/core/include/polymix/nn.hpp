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
#ifndef POLYMIX_NN_HPP_
#define POLYMIX_NN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace polymix {

// Minimal CNN stack: the fixed layer set needed for the two instrument
// classifiers, with exact analytic gradients throughout.  Everything runs
// in 64-bit on a single thread; that is the deterministic reference path,
// and checkpoints narrow to 32-bit floats on disk.

/// Dense row-major value holder for parameters, activations, and batches.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  std::size_t numel() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

enum class LayerKind : std::uint32_t {
  kConv = 0,      // 3x3, stride 1, zero-pad same
  kBatchNorm = 1,
  kActivation = 2,
  kMaxPool = 3,   // floor division, no padding
  kDropout = 4,   // inverted scaling, active in train mode only
  kFlatten = 5,
  kDense = 6,
  kSigmoid = 7,
};

enum class Activation : std::uint32_t { kElu = 0, kLeakyRelu = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  int units = 0;       // conv output channels or dense units
  int pool_h = 0;
  int pool_w = 0;
  double rate = 0.0;   // dropout rate
  Activation activation = Activation::kElu;
  double alpha = 0.3;  // leaky-relu slope

  bool operator==(const LayerSpec&) const = default;
};

struct ModelConfig {
  std::string name;
  int in_channels = 1;
  int in_height = 96;
  int in_width = 87;
  std::vector<LayerSpec> layers;

  bool operator==(const ModelConfig&) const = default;
};

/// Single-conv blocks with ELU throughout.  Block depths and pool sizes
/// default to the full classifier; pass smaller depths for test scale.
ModelConfig initial_config(std::array<int, 4> depths = {64, 128, 256, 640},
                           int dense_units = 1024, int classes = 11);

/// Double-conv blocks with leaky-ReLU (slope 0.3) throughout.
ModelConfig proposed_config(std::array<int, 4> depths = {64, 128, 256, 640},
                            int dense_units = 1024, int classes = 11);

/// Output shape of one layer; dense-side layers report {units, 1, 1}.
struct LayerShape {
  std::string name;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;
};

enum class Mode { kTrain, kInfer };

/// Orthogonal switches behind Mode, exposed so tests can isolate the
/// stochastic parts (e.g. train-path dropout against running statistics).
struct ForwardOptions {
  bool dropout_active = false;     // draw and apply dropout masks
  bool batch_stats = false;        // batch-norm uses batch statistics
  bool cache_for_backward = false;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

class Model {
 public:
  /// Builds the network with He-normal weights, zero biases, and identity
  /// batch-norm, all drawn deterministically from the seed.
  Model(const ModelConfig& config, std::uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const;
  std::size_t parameter_count() const;
  std::vector<LayerShape> output_shapes() const;

  /// x has shape {B, C, H, W}.  Returns the last layer's output, {B, K}
  /// for a classifier config.  Non-finite values anywhere abort with a
  /// diagnostic naming the first offending layer.
  Tensor forward(const Tensor& x, Mode mode);
  Tensor forward(const Tensor& x, const ForwardOptions& options);

  /// Accumulates exact gradients into every parameter's grad tensor given
  /// d(loss)/d(output).  Requires a preceding cached (train) forward.
  void backward(const Tensor& grad_output);

  /// Trainable parameters in declaration order (also checkpoint order).
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  /// Trainable parameters plus batch-norm running statistics, the full
  /// persisted state, in declaration order.
  std::vector<std::pair<std::string, Tensor*>> state_tensors();

  void zero_grads();

  /// Resets the stream behind dropout masks; with the same seed, the next
  /// forward draws identical masks.
  void reseed_dropout(std::uint64_t seed);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(scores), same shape as scores
};

/// Mean binary cross-entropy over all score entries, with scores clamped
/// to [1e-7, 1 - 1e-7] inside the logs.  Targets are 0/1.
LossResult bce_loss(const Tensor& scores, const Tensor& targets);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

struct AdamState {
  double base_lr = 1e-4;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // first moments, one per parameter
  std::vector<Tensor> v;  // second moments
};

AdamState make_adam(const std::vector<Parameter*>& params,
                    double base_lr = 1e-4);

/// One Adam update with bias correction at the given effective rate;
/// gradients are read from each parameter's grad tensor.
void adam_step(AdamState& state, const std::vector<Parameter*>& params,
               double lr);

/// base_lr scaled by the 10%-per-epoch decay and the plateau factor.
double effective_lr(double base_lr, int epoch, double plateau_factor);

/// Binary checkpoint: magic "PMXM", version, config descriptor, then all
/// state tensors in declaration order as little-endian float32 with shape
/// prefixes, and an optional Adam section for resume.
void save_checkpoint(const std::filesystem::path& path, Model& model,
                     const AdamState* adam = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<AdamState> adam;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace polymix

#endif  // POLYMIX_NN_HPP_
