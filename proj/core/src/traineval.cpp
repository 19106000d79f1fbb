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
#include "polymix/traineval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "polymix/errors.hpp"
#include "polymix/features.hpp"
#include "polymix/rng.hpp"

namespace polymix {

namespace {

int popcount16(std::uint16_t m) {
  int n = 0;
  while (m) {
    n += m & 1;
    m >>= 1;
  }
  return n;
}

}  // namespace

FoldAssignment make_folds(const FeatureStore& store, int k,
                          std::uint64_t seed) {
  if (k <= 0) throw ContractError("make_folds: fold count must be positive");
  const std::size_t n = store.count();
  if (store.labels.size() != n) {
    throw ContractError("make_folds: store features and labels disagree");
  }
  if (n == 0) throw ContractError("make_folds: empty store");

  std::vector<std::uint16_t> mask(n, 0);
  std::array<std::size_t, kNumInstruments> total{};
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < kNumInstruments; ++c) {
      if (store.labels[i].bits[static_cast<std::size_t>(c)]) {
        mask[i] |= static_cast<std::uint16_t>(1u << c);
        ++total[static_cast<std::size_t>(c)];
      }
    }
    if (mask[i] == 0) {
      throw ContractError("make_folds: row " + std::to_string(i) +
                          " has no labels");
    }
  }
  for (int c = 0; c < kNumInstruments; ++c) {
    const std::size_t t = total[static_cast<std::size_t>(c)];
    if (t > 0 && t < static_cast<std::size_t>(k)) {
      throw StratificationError(
          "class " + std::string(kInstrumentNames[static_cast<std::size_t>(c)]) +
          " has " + std::to_string(t) + " samples, fewer than " +
          std::to_string(k) + " folds");
    }
  }

  // Strata are exact label sets, walked in ascending-mask order so the
  // assignment depends only on the store contents and the seed.
  std::map<std::uint16_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < n; ++i) strata[mask[i]].push_back(i);

  Rng rng(seed);
  FoldAssignment out;
  out.k = k;
  out.fold.assign(n, -1);

  // Full rounds land one row per fold and cannot unbalance anything; only
  // the per-stratum remainders need placement care.  A stratum's leftover
  // rows are interchangeable, so placing them means choosing a SET of
  // r distinct folds, at most C(k, r) options.
  struct Remainder {
    std::uint16_t mask = 0;
    std::vector<std::size_t> rows;
    std::vector<double> fold_bias;  // seeded tie-break per fold
    std::vector<int> folds;         // chosen by the search below
  };
  std::vector<Remainder> rems;
  for (auto& [m, rows] : strata) {
    rng.shuffle(rows);
    const std::size_t full = rows.size() / static_cast<std::size_t>(k) *
                             static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < full; ++i) {
      out.fold[rows[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    if (full < rows.size()) {
      Remainder r;
      r.mask = m;
      r.rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(full),
                    rows.end());
      r.fold_bias.resize(static_cast<std::size_t>(k));
      for (double& b : r.fold_bias) b = rng.uniform();
      rems.push_back(std::move(r));
    }
  }

  // Per class, R = qk + r remainder rows force exactly r folds to take
  // q + 1 of them and the rest q: with the per-fold count capped at the
  // ceiling and at most r folds allowed to reach it, hitting the total R
  // leaves no slack, so respecting the caps IS the balance invariant.
  std::array<int, kNumInstruments> quota{}, ceil_slots{};
  for (const Remainder& rem : rems) {
    for (int c = 0; c < kNumInstruments; ++c) {
      if (rem.mask & (1u << c)) {
        ceil_slots[static_cast<std::size_t>(c)] +=
            static_cast<int>(rem.rows.size());
      }
    }
  }
  for (int c = 0; c < kNumInstruments; ++c) {
    quota[static_cast<std::size_t>(c)] =
        ceil_slots[static_cast<std::size_t>(c)] / k;
    ceil_slots[static_cast<std::size_t>(c)] %= k;
  }

  // Most constrained strata first: wide masks touch more class budgets.
  std::stable_sort(rems.begin(), rems.end(),
                   [](const Remainder& a, const Remainder& b) {
                     if (popcount16(a.mask) != popcount16(b.mask)) {
                       return popcount16(a.mask) > popcount16(b.mask);
                     }
                     return a.rows.size() > b.rows.size();
                   });

  // Depth-first search over fold sets, guided toward evenly loaded folds
  // but free to backtrack.  Realistic stores resolve near-greedily; the
  // node budget turns a genuinely unsatisfiable store into an error.
  std::vector<std::array<int, kNumInstruments>> cnt(
      static_cast<std::size_t>(k));
  for (auto& row : cnt) row.fill(0);
  std::array<int, kNumInstruments> ceil_used{}, strata_left{};
  for (const Remainder& rem : rems) {
    for (int c = 0; c < kNumInstruments; ++c) {
      if (rem.mask & (1u << c)) ++strata_left[static_cast<std::size_t>(c)];
    }
  }
  std::vector<int> load(static_cast<std::size_t>(k), 0);
  long budget = 2'000'000;

  auto place = [&](Remainder& rem, int f, int dir) {
    for (int c = 0; c < kNumInstruments; ++c) {
      if (!(rem.mask & (1u << c))) continue;
      auto& e = cnt[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)];
      if (dir > 0 && e == quota[static_cast<std::size_t>(c)]) {
        ++ceil_used[static_cast<std::size_t>(c)];
      }
      if (dir < 0 && e == quota[static_cast<std::size_t>(c)] + 1) {
        --ceil_used[static_cast<std::size_t>(c)];
      }
      e += dir;
    }
    load[static_cast<std::size_t>(f)] += dir;
  };

  auto fits = [&](const Remainder& rem, int f) {
    for (int c = 0; c < kNumInstruments; ++c) {
      if (!(rem.mask & (1u << c))) continue;
      const int e =
          cnt[static_cast<std::size_t>(f)][static_cast<std::size_t>(c)];
      if (e > quota[static_cast<std::size_t>(c)]) return false;
      if (e == quota[static_cast<std::size_t>(c)] &&
          ceil_used[static_cast<std::size_t>(c)] >=
              ceil_slots[static_cast<std::size_t>(c)]) {
        return false;
      }
    }
    return true;
  };

  std::function<bool(std::size_t)> assign = [&](std::size_t idx) -> bool {
    if (idx == rems.size()) return true;
    if (--budget < 0) return false;
    Remainder& rem = rems[idx];
    const int r = static_cast<int>(rem.rows.size());
    for (int c = 0; c < kNumInstruments; ++c) {
      if (rem.mask & (1u << c)) --strata_left[static_cast<std::size_t>(c)];
    }

    // All r-subsets of folds, cheapest-looking first.
    std::vector<std::vector<int>> sets;
    std::vector<int> pickv(static_cast<std::size_t>(r));
    std::function<void(int, int)> combos = [&](int from, int depth) {
      if (depth == r) {
        sets.push_back(pickv);
        return;
      }
      for (int f = from; f <= k - (r - depth); ++f) {
        pickv[static_cast<std::size_t>(depth)] = f;
        combos(f + 1, depth + 1);
      }
    };
    combos(0, 0);
    std::stable_sort(sets.begin(), sets.end(),
                     [&](const std::vector<int>& a,
                         const std::vector<int>& b) {
                       double la = 0.0, lb = 0.0;
                       for (int f : a) {
                         la += load[static_cast<std::size_t>(f)] +
                               rem.fold_bias[static_cast<std::size_t>(f)];
                       }
                       for (int f : b) {
                         lb += load[static_cast<std::size_t>(f)] +
                               rem.fold_bias[static_cast<std::size_t>(f)];
                       }
                       return la < lb;
                     });

    for (const std::vector<int>& set : sets) {
      // Check-and-place one fold at a time: two folds can individually fit
      // yet jointly exhaust a class's ceiling budget.
      std::size_t placed = 0;
      while (placed < set.size() &&
             fits(rem, set[placed])) {
        place(rem, set[placed], +1);
        ++placed;
      }
      if (placed < set.size()) {
        while (placed > 0) place(rem, set[--placed], -1);
        continue;
      }
      // A fold no future stratum of class c can reach must already hold
      // its floor quota.
      bool reachable = true;
      for (int c = 0; c < kNumInstruments && reachable; ++c) {
        if (!(rem.mask & (1u << c))) continue;
        for (int f = 0; f < k && reachable; ++f) {
          reachable = cnt[static_cast<std::size_t>(f)]
                         [static_cast<std::size_t>(c)] +
                          strata_left[static_cast<std::size_t>(c)] >=
                      quota[static_cast<std::size_t>(c)];
        }
      }
      if (reachable && assign(idx + 1)) {
        rem.folds.assign(set.begin(), set.end());
        return true;
      }
      for (int f : set) place(rem, f, -1);
      if (budget < 0) break;
    }

    for (int c = 0; c < kNumInstruments; ++c) {
      if (rem.mask & (1u << c)) ++strata_left[static_cast<std::size_t>(c)];
    }
    return false;
  };

  if (!assign(0)) {
    throw StratificationError(
        "no fold assignment balances every class within one sample");
  }
  for (const Remainder& rem : rems) {
    for (std::size_t i = 0; i < rem.rows.size(); ++i) {
      out.fold[rem.rows[i]] = rem.folds[i];
    }
  }
  return out;
}

LrController::LrController(const TrainSchedule& schedule)
    : schedule_(schedule) {
  if (schedule.lr_patience <= 0 || schedule.stop_patience <= 0) {
    throw ContractError("schedule: patience values must be positive");
  }
}

LrController::Decision LrController::observe(double val_loss) {
  ++epoch_;
  Decision d;
  d.improved = val_loss <= best_ - schedule_.improve_threshold;
  if (d.improved) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    lr_bad_ = 0;
    stop_bad_ = 0;
    return d;
  }
  ++lr_bad_;
  ++stop_bad_;
  if (lr_bad_ >= schedule_.lr_patience) {
    plateau_ *= schedule_.plateau_factor;
    lr_bad_ = 0;
    d.reduce_lr = true;
  }
  d.stop = stop_bad_ >= schedule_.stop_patience;
  return d;
}

Tensor store_batch(const FeatureStore& store,
                   std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("store_batch: empty row list");
  const std::size_t plane =
      static_cast<std::size_t>(store.rows) * store.cols;
  Tensor t({rows.size(), 1, static_cast<std::size_t>(store.rows),
            static_cast<std::size_t>(store.cols)});
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b] >= store.count()) {
      throw ContractError("store_batch: row index out of range");
    }
    const std::vector<float>& src = store.features[rows[b]];
    double* dst = t.data.data() + b * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i];
  }
  return t;
}

Tensor store_targets(const FeatureStore& store,
                     std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("store_targets: empty row list");
  Tensor t({rows.size(), static_cast<std::size_t>(kNumInstruments)});
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (rows[b] >= store.count()) {
      throw ContractError("store_targets: row index out of range");
    }
    const LabelVector& lv = store.labels[rows[b]];
    for (int c = 0; c < kNumInstruments; ++c) {
      t.data[b * static_cast<std::size_t>(kNumInstruments) +
             static_cast<std::size_t>(c)] =
          lv.bits[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
    }
  }
  return t;
}

namespace {

double dataset_loss(Model& model, const FeatureStore& store,
                    const std::vector<std::size_t>& rows, int batch_size) {
  double acc = 0.0;
  for (std::size_t at = 0; at < rows.size();
       at += static_cast<std::size_t>(batch_size)) {
    const std::size_t take =
        std::min(static_cast<std::size_t>(batch_size), rows.size() - at);
    const std::span<const std::size_t> part(rows.data() + at, take);
    const Tensor x = store_batch(store, part);
    const Tensor y = store_targets(store, part);
    const Tensor scores = model.forward(x, Mode::kInfer);
    acc += bce_loss(scores, y).loss * static_cast<double>(take);
  }
  return acc / static_cast<double>(rows.size());
}

}  // namespace

TrainHistory train_fold(Model& model, const FeatureStore& store,
                        const FoldAssignment& folds, int val_fold,
                        const TrainSchedule& schedule, std::uint64_t seed) {
  if (folds.fold.size() != store.count()) {
    throw ContractError("train_fold: fold assignment does not cover store");
  }
  if (val_fold < 0 || val_fold >= folds.k) {
    throw ContractError("train_fold: validation fold out of range");
  }
  if (schedule.batch_size <= 0 || schedule.max_epochs <= 0) {
    throw ContractError("train_fold: schedule sizes must be positive");
  }
  const ModelConfig& cfg = model.config();
  if (cfg.in_channels != 1 ||
      cfg.in_height != static_cast<int>(store.rows) ||
      cfg.in_width != static_cast<int>(store.cols)) {
    throw ContractError("train_fold: store shape does not fit the model");
  }

  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t i = 0; i < store.count(); ++i) {
    (folds.fold[i] == val_fold ? val_rows : train_rows).push_back(i);
  }
  if (train_rows.empty()) {
    throw ContractError("train_fold: training partition is empty");
  }
  if (val_rows.empty()) {
    throw ContractError("train_fold: validation partition is empty");
  }

  Rng rng(seed);
  AdamState adam = make_adam(model.parameters(), schedule.base_lr);
  LrController controller(schedule);
  TrainHistory history;

  std::vector<std::vector<double>> best_state;
  auto snapshot = [&] {
    best_state.clear();
    for (const auto& [name, tensor] : model.state_tensors()) {
      (void)name;
      best_state.push_back(tensor->data);
    }
  };

  for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
    const double lr = schedule.base_lr *
                      std::pow(schedule.decay, epoch) *
                      controller.plateau_factor();
    rng.shuffle(train_rows);

    double train_acc = 0.0;
    for (std::size_t at = 0; at < train_rows.size();
         at += static_cast<std::size_t>(schedule.batch_size)) {
      const std::size_t take =
          std::min(static_cast<std::size_t>(schedule.batch_size),
                   train_rows.size() - at);
      const std::span<const std::size_t> part(train_rows.data() + at, take);
      const Tensor x = store_batch(store, part);
      const Tensor y = store_targets(store, part);
      model.zero_grads();
      const Tensor scores = model.forward(x, Mode::kTrain);
      const LossResult loss = bce_loss(scores, y);
      model.backward(loss.grad);
      adam_step(adam, model.parameters(), lr);
      train_acc += loss.loss * static_cast<double>(take);
    }
    const double train_loss =
        train_acc / static_cast<double>(train_rows.size());
    const double val_loss =
        dataset_loss(model, store, val_rows, schedule.batch_size);

    const LrController::Decision d = controller.observe(val_loss);
    if (d.improved) snapshot();
    history.epochs.push_back(
        {epoch, lr, train_loss, val_loss, d.improved, d.reduce_lr});
    if (d.stop) {
      history.early_stopped = true;
      break;
    }
  }

  history.best_epoch = controller.best_epoch();
  history.best_val_loss = controller.best_loss();
  if (!best_state.empty()) {
    const auto tensors = model.state_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      tensors[i].second->data = best_state[i];
    }
  }
  return history;
}

std::vector<double> predict_track(Model& model, const AudioClip& track) {
  const ModelConfig& cfg = model.config();
  if (cfg.in_channels != 1 || cfg.in_height != kCqtBins ||
      cfg.in_width != kCqtFrames) {
    throw ContractError("predict_track: model does not take CQT input");
  }
  if (track.sample_rate != kDefaultRate || track.channels != 1) {
    throw ContractError(
        "predict_track: clip must be standardized to mono feature rate");
  }
  const std::vector<AudioClip> segments = segment_clip(track, 1.0);
  if (segments.empty()) {
    throw TooShortError("predict_track: track shorter than one second");
  }

  const std::size_t plane = static_cast<std::size_t>(kCqtBins) * kCqtFrames;
  Tensor x({segments.size(), 1, static_cast<std::size_t>(kCqtBins),
            static_cast<std::size_t>(kCqtFrames)});
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Spectrogram spec = scale_db(cqt(segments[s]));
    std::copy(spec.data.begin(), spec.data.end(),
              x.data.begin() + static_cast<std::ptrdiff_t>(s * plane));
  }

  const Tensor scores = model.forward(x, Mode::kInfer);
  const std::size_t classes = scores.shape[1];
  std::vector<double> mean(classes, 0.0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (std::size_t c = 0; c < classes; ++c) {
      mean[c] += scores.data[s * classes + c];
    }
  }
  for (double& v : mean) v /= static_cast<double>(segments.size());
  return mean;
}

namespace {

void validate_matrix(const PredictionMatrix& pm, const char* op) {
  if (pm.classes == 0) {
    throw ContractError(std::string(op) + ": zero classes");
  }
  if (pm.scores.size() != pm.labels.size() ||
      pm.scores.size() % pm.classes != 0) {
    throw ContractError(std::string(op) +
                        ": scores and labels must be parallel matrices");
  }
  if (pm.scores.empty()) {
    throw ContractError(std::string(op) + ": empty prediction matrix");
  }
}

}  // namespace

double lrap(const PredictionMatrix& pm) {
  validate_matrix(pm, "lrap");
  const std::size_t n = pm.rows();
  const std::size_t c = pm.classes;
  double total = 0.0;
  std::vector<double> all, pos;
  for (std::size_t r = 0; r < n; ++r) {
    all.clear();
    pos.clear();
    for (std::size_t j = 0; j < c; ++j) {
      all.push_back(pm.score(r, j));
      if (pm.label(r, j)) pos.push_back(pm.score(r, j));
    }
    if (pos.empty()) {
      throw ContractError("lrap: row " + std::to_string(r) +
                          " has no true labels");
    }
    std::sort(all.begin(), all.end());
    std::sort(pos.begin(), pos.end());
    // rank(f) counts scores >= f, so it is the count above the first
    // ascending-order element not below f; same for the true-label count.
    double row_sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!pm.label(r, j)) continue;
      const double f = pm.score(r, j);
      const std::size_t rank =
          c - static_cast<std::size_t>(
                  std::lower_bound(all.begin(), all.end(), f) - all.begin());
      const std::size_t ell =
          pos.size() -
          static_cast<std::size_t>(
              std::lower_bound(pos.begin(), pos.end(), f) - pos.begin());
      row_sum += static_cast<double>(ell) / static_cast<double>(rank);
    }
    total += row_sum / static_cast<double>(pos.size());
  }
  return total / static_cast<double>(n);
}

AucReport auc_scores(const PredictionMatrix& pm) {
  validate_matrix(pm, "auc_scores");
  const std::size_t n = pm.rows();
  AucReport rep;
  rep.per_class.assign(pm.classes, 0.0);
  double sum = 0.0;
  int scored = 0;
  std::vector<std::pair<double, bool>> col(n);
  for (std::size_t c = 0; c < pm.classes; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t r = 0; r < n; ++r) {
      col[r] = {pm.score(r, c), pm.label(r, c)};
      n_pos += pm.label(r, c);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
      rep.skipped.push_back(static_cast<int>(c));
      continue;
    }
    std::sort(col.begin(), col.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // Rank sum with average ranks over tie groups; ties therefore earn
    // exactly half credit per positive-negative pair.
    double rank_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && col[j].first == col[i].first) ++j;
      const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;
      for (std::size_t t = i; t < j; ++t) {
        if (col[t].second) rank_pos += avg_rank;
      }
      i = j;
    }
    const double u = rank_pos - static_cast<double>(n_pos) *
                                    static_cast<double>(n_pos + 1) / 2.0;
    const double auc =
        u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    rep.per_class[c] = auc;
    sum += auc;
    ++scored;
  }
  if (scored == 0) {
    throw ContractError(
        "auc_scores: no class has both positives and negatives");
  }
  rep.mean = sum / static_cast<double>(scored);
  return rep;
}

F1Report f1_scores(const PredictionMatrix& pm, double threshold) {
  validate_matrix(pm, "f1_scores");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ContractError("f1_scores: threshold must lie inside (0, 1)");
  }
  const std::size_t n = pm.rows();
  F1Report rep;
  rep.per_class.assign(pm.classes, 0.0);
  long tp_all = 0, fp_all = 0, fn_all = 0;
  double macro = 0.0;
  for (std::size_t c = 0; c < pm.classes; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const bool pred = pm.score(r, c) >= threshold;
      const bool truth = pm.label(r, c);
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const long denom = 2 * tp + fp + fn;
    rep.per_class[c] =
        denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom)
              : 0.0;
    macro += rep.per_class[c];
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  rep.macro = macro / static_cast<double>(pm.classes);
  const long denom_all = 2 * tp_all + fp_all + fn_all;
  rep.micro = denom_all ? 2.0 * static_cast<double>(tp_all) /
                              static_cast<double>(denom_all)
                        : 0.0;
  return rep;
}

PredictionMatrix ensemble_average(std::span<const PredictionMatrix> preds) {
  if (preds.empty()) {
    throw ContractError("ensemble_average: no prediction matrices");
  }
  validate_matrix(preds[0], "ensemble_average");
  PredictionMatrix out;
  out.classes = preds[0].classes;
  out.labels = preds[0].labels;
  out.scores.assign(preds[0].scores.size(), 0.0);
  for (const PredictionMatrix& pm : preds) {
    validate_matrix(pm, "ensemble_average");
    if (pm.classes != out.classes || pm.scores.size() != out.scores.size()) {
      throw ContractError("ensemble_average: matrices differ in shape");
    }
    if (pm.labels != out.labels) {
      throw ContractError("ensemble_average: matrices differ in labels");
    }
    for (std::size_t i = 0; i < out.scores.size(); ++i) {
      out.scores[i] += pm.scores[i];
    }
  }
  for (double& s : out.scores) s /= static_cast<double>(preds.size());
  return out;
}

MetricsReport compute_metrics(const PredictionMatrix& pm, double threshold) {
  MetricsReport rep;
  rep.lrap = lrap(pm);
  AucReport auc = auc_scores(pm);
  rep.mean_auc = auc.mean;
  rep.per_class_auc = std::move(auc.per_class);
  rep.unscored_auc_classes = std::move(auc.skipped);
  F1Report f1 = f1_scores(pm, threshold);
  rep.f1_micro = f1.micro;
  rep.f1_macro = f1.macro;
  rep.per_class_f1 = std::move(f1.per_class);
  return rep;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean_std: no values");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::string format_mean_std(std::span<const double> values) {
  const MeanStd ms = mean_std(values);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", ms.mean, ms.std);
  return buf;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const PredictionsFile& preds) {
  validate_matrix(preds.pm, "write_predictions_csv");
  if (preds.pm.classes != static_cast<std::size_t>(kNumInstruments)) {
    throw ContractError("write_predictions_csv: matrix is not 11-class");
  }
  if (preds.track_ids.size() != preds.pm.rows()) {
    throw ContractError(
        "write_predictions_csv: one track id required per row");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write predictions " + path.string());

  out << "track_id";
  for (auto code : kInstrumentNames) out << ",score_" << code;
  for (auto code : kInstrumentNames) out << ",label_" << code;
  out << "\n";

  char buf[32];
  for (std::size_t r = 0; r < preds.pm.rows(); ++r) {
    const std::string& id = preds.track_ids[r];
    if (id.find_first_of(",\n\r") != std::string::npos) {
      throw ContractError("write_predictions_csv: track id '" + id +
                          "' contains a delimiter");
    }
    out << id;
    for (std::size_t c = 0; c < preds.pm.classes; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", preds.pm.score(r, c));
      out << ',' << buf;
    }
    for (std::size_t c = 0; c < preds.pm.classes; ++c) {
      out << ',' << (preds.pm.label(r, c) ? '1' : '0');
    }
    out << "\n";
  }
  if (!out) throw Error("short write to " + path.string());
}

PredictionsFile read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions " + path.string());

  std::string line;
  if (!std::getline(in, line) || line.rfind("track_id", 0) != 0) {
    throw FormatError("predictions: missing track_id header in " +
                      path.string());
  }

  PredictionsFile out;
  out.pm.classes = static_cast<std::size_t>(kNumInstruments);
  const std::size_t fields =
      1 + 2 * static_cast<std::size_t>(kNumInstruments);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      parts.push_back(line.substr(
          start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (parts.size() != fields) {
      throw FormatError("predictions: line " + std::to_string(line_no) +
                        " has " + std::to_string(parts.size()) +
                        " fields, expected " + std::to_string(fields));
    }
    out.track_ids.push_back(parts[0]);
    for (int c = 0; c < kNumInstruments; ++c) {
      const std::string& tok = parts[1 + static_cast<std::size_t>(c)];
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || tok.empty()) {
        throw FormatError("predictions: bad score on line " +
                          std::to_string(line_no));
      }
      out.pm.scores.push_back(v);
    }
    for (int c = 0; c < kNumInstruments; ++c) {
      const std::string& tok =
          parts[1 + static_cast<std::size_t>(kNumInstruments + c)];
      if (tok != "0" && tok != "1") {
        throw FormatError("predictions: bad label on line " +
                          std::to_string(line_no));
      }
      out.pm.labels.push_back(tok == "1" ? 1 : 0);
    }
  }
  return out;
}

}  // namespace polymix
