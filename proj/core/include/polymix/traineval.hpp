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
#ifndef POLYMIX_TRAINEVAL_HPP_
#define POLYMIX_TRAINEVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "polymix/audio.hpp"
#include "polymix/dataset.hpp"
#include "polymix/nn.hpp"

namespace polymix {

/// Fold index per store row, each in 0..k-1.  For every instrument the
/// per-fold sample counts differ by at most one.
struct FoldAssignment {
  int k = 5;
  std::vector<int> fold;
};

/// Stratified assignment: rows are grouped by exact label set, shuffled
/// with the seed, and dealt so that both every label set and every single
/// instrument stay balanced across folds.  Any instrument present in the
/// store must have at least k rows (StratificationError otherwise).
FoldAssignment make_folds(const FeatureStore& store, int k,
                          std::uint64_t seed);

struct TrainSchedule {
  double base_lr = 1e-4;
  double decay = 0.9;  // per-epoch multiplicative lr decay
  int lr_patience = 5;
  int stop_patience = 7;
  double improve_threshold = 1e-4;  // absolute validation-loss improvement
  double plateau_factor = 0.5;      // lr multiplier on plateau
  int batch_size = 128;
  int max_epochs = 500;  // safety cap; early stopping normally fires first
};

/// Plateau bookkeeping for one training run.  Improvement means the
/// observed loss undercuts the best seen by at least improve_threshold.
/// After lr_patience consecutive non-improving epochs the cumulative
/// plateau factor is multiplied by plateau_factor (and that counter
/// restarts); after stop_patience consecutive non-improving epochs the
/// run stops.  Epochs are numbered from zero in observation order.
class LrController {
 public:
  struct Decision {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  explicit LrController(const TrainSchedule& schedule);
  Decision observe(double val_loss);

  double plateau_factor() const { return plateau_; }
  double best_loss() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  TrainSchedule schedule_;
  double plateau_ = 1.0;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = -1;
  int epoch_ = -1;
  int lr_bad_ = 0;
  int stop_bad_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool improved = false;
  bool lr_reduced = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

/// Gather store rows into a {B, 1, rows, cols} input tensor / a {B, 11}
/// target tensor (the store holds 32-bit features; training math is
/// 64-bit).
Tensor store_batch(const FeatureStore& store,
                   std::span<const std::size_t> rows);
Tensor store_targets(const FeatureStore& store,
                     std::span<const std::size_t> rows);

/// Train on every fold except val_fold, validating on val_fold after each
/// epoch: seeded shuffle, fixed-size batches (final partial batch kept),
/// BCE loss, Adam at lr = base_lr * decay^epoch * plateau_factor.  On
/// return the model carries the parameters (and batch-norm statistics) of
/// its best-validation-loss epoch.  Bit-reproducible for fixed seeds.
TrainHistory train_fold(Model& model, const FeatureStore& store,
                        const FoldAssignment& folds, int val_fold,
                        const TrainSchedule& schedule, std::uint64_t seed);

/// Score one track: split into one-second segments (remainder dropped),
/// CQT + dB-scale each, run an infer-mode forward, and average the
/// per-segment scores.  The clip must already be standardized to the
/// feature rate; anything under one second raises TooShortError.
std::vector<double> predict_track(Model& model, const AudioClip& track);

/// Parallel score / ground-truth matrices, row-major over tracks.
struct PredictionMatrix {
  std::size_t classes = static_cast<std::size_t>(kNumInstruments);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  std::size_t rows() const { return classes ? scores.size() / classes : 0; }
  double score(std::size_t r, std::size_t c) const {
    return scores[r * classes + c];
  }
  bool label(std::size_t r, std::size_t c) const {
    return labels[r * classes + c] != 0;
  }
};

/// Label ranking average precision.  Per row, each true label j scores
/// |{true k: f_k >= f_j}| / |{any k: f_k >= f_j}|; the row averages its
/// true labels' scores and rows average to the result.  Ties resolve
/// through the >= counts.  A row without true labels is a ContractError.
double lrap(const PredictionMatrix& pm);

/// Per-class ROC AUC by the rank-sum formulation, ties credited half.
/// Classes lacking a positive or a negative are skipped: listed in
/// `skipped`, reported as 0 in per_class, excluded from the mean.  No
/// scorable class at all is a ContractError.
struct AucReport {
  std::vector<double> per_class;
  std::vector<int> skipped;
  double mean = 0.0;
};
AucReport auc_scores(const PredictionMatrix& pm);

/// F1 at a score threshold: per-class (0/0 counted as 0), macro mean over
/// all classes, micro over pooled counts.
struct F1Report {
  double micro = 0.0;
  double macro = 0.0;
  std::vector<double> per_class;
};
F1Report f1_scores(const PredictionMatrix& pm, double threshold = 0.5);

/// Element-wise mean of the score matrices; labels must be identical
/// across inputs and pass through unchanged.
PredictionMatrix ensemble_average(std::span<const PredictionMatrix> preds);

struct MetricsReport {
  double lrap = 0.0;
  double mean_auc = 0.0;
  std::vector<double> per_class_auc;
  std::vector<int> unscored_auc_classes;
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  std::vector<double> per_class_f1;
};
MetricsReport compute_metrics(const PredictionMatrix& pm,
                              double threshold = 0.5);

/// Sample statistics (n-1 denominator; a single value has deviation 0).
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(std::span<const double> values);

/// Three-decimal "mean ± std" presentation, e.g. "0.767 ± 0.008".
std::string format_mean_std(std::span<const double> values);

/// Prediction CSV: track_id, 11 score columns, 11 label columns in
/// canonical instrument order.  Scores print as %.17g so a read-back is
/// bit-exact.
struct PredictionsFile {
  std::vector<std::string> track_ids;
  PredictionMatrix pm;
};
void write_predictions_csv(const std::filesystem::path& path,
                           const PredictionsFile& preds);
PredictionsFile read_predictions_csv(const std::filesystem::path& path);

}  // namespace polymix

#endif  // POLYMIX_TRAINEVAL_HPP_
