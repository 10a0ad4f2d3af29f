// Copyright 2026 The simt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simt/checkpoint.hpp"
#include "simt/corpus.hpp"
#include "simt/model.hpp"

namespace simt {

struct TrainConfig {
  double learning_rate = 5e-4;  // peak, reached at the end of warm-up
  int warmup_updates = 400;
  double warmup_init_lr = 1e-7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled
  double label_smoothing = 0.1;
  double dropout = 0.1;
  int max_updates = 5000;
  std::uint64_t seed = 1;
  int checkpoint_every = 250;  // also the validation cadence
  std::size_t max_tokens = 512;  // padded tokens per batch
  std::optional<int> fixed_k;     // plain wait-k baseline
  bool multipath = true;
  int isolation_check_every = 100;  // 0 disables the adapter-gradient audit

  /// Throws UsageError on the first violated invariant.
  void validate() const;
};

/// Linear warm-up from warmup_init_lr to the peak, then peak * sqrt(warmup / u).
double lr_at(int update, const TrainConfig& config);

struct TrainState {
  int update = 0;
  int epoch = 0;
  std::uint64_t epoch_seed = 0;  // batch plan of the current epoch
  std::size_t cursor = 0;        // next batch within that plan
  std::string rng_state;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> adam_m;  // parameter order
  std::vector<std::vector<double>> adam_v;

  std::string metadata_json() const;
  static TrainState from_checkpoint(const Checkpoint& checkpoint);
};

struct TrainLogRow {
  int update = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double lr = 0.0;
};

std::string format_train_log(const std::vector<TrainLogRow>& rows);

struct TrainOutputs {
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::filesystem::path checkpoint;  // latest, with trainer state; empty = none
  std::filesystem::path best;        // lowest validation loss; empty = none
  std::filesystem::path log;         // TSV; empty = none
};

struct TrainResult {
  TrainState state;
  std::vector<TrainLogRow> log;
};

/// Resumes from `resume` when given. Throws DivergenceError on a non-finite loss.
TrainResult train(SimtModel& model, std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> valid_pairs,
                  const TrainConfig& config, const TrainOutputs& outputs = {},
                  std::optional<TrainState> resume = std::nullopt);

/// Freezes the backbone (it stays bit-identical) and trains only the adapters.
/// Throws UsageError for a model without adapters.
TrainResult train_frozen_adapters(SimtModel& model, std::span<const EncodedPair> train_pairs,
                                  std::span<const EncodedPair> valid_pairs, const TrainConfig& config,
                                  const TrainOutputs& outputs = {}, std::optional<TrainState> resume = std::nullopt);

/// Mean validation loss: fixed_k if set, otherwise averaged over k in {1, 3, 5, 7, 9}.
double validation_loss(const SimtModel& model, std::span<const EncodedPair> pairs, const TrainConfig& config);

/// Checkpoint carrying the trainer state (metadata) and Adam moments (extras).
Checkpoint training_checkpoint(const SimtModel& model, const TrainOutputs& outputs, const TrainState& state);

}  // namespace simt
