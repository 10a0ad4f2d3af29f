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

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/metrics.hpp"
#include "simt/model.hpp"
#include "simt/policy.hpp"

namespace simt {

// Generated task splits with one joint vocabulary, encoded for the model.
struct TaskData {
  TaskCorpora corpora;
  Vocabulary vocab;
  std::vector<EncodedPair> train;
  std::vector<EncodedPair> valid;
  std::vector<EncodedPair> test;
};

TaskData prepare_task(const TaskSpec& spec);
/// Same, from existing corpora; the vocabulary comes from the training split.
TaskData prepare_corpora(TaskCorpora corpora);

struct EvalRecord {
  std::string policy;   // "fixed" or "adaptive"
  std::string setting;  // "k=3" or "rho=0.2/0"
  double bleu = 0.0;
  double accuracy = 0.0;
  LatencyReport latency;
  double al_reference = 0.0;  // AL against reference lengths; not part of the TSV
  double seconds = 0.0;
};

struct Threshold {
  double rho_min;
  double rho_max;
};

/// (0.2,0) (0.4,0) (0.6,0) (0.8,0) (1,0) (1,0.2) (1,0.4) (1,0.6) (1,0.8)
std::vector<Threshold> default_threshold_grid();
std::string threshold_label(const Threshold& t);

struct EvalOptions {
  BleuOptions bleu;
  std::optional<std::size_t> max_output_length;  // default 2|x| + 10 per sentence
};

struct CorpusDecode {
  std::vector<TokenList> hypotheses;
  std::vector<ActionTrace> traces;
  double seconds = 0.0;
};

/// Decodes every pair with `decode` and scores the result against the targets.
/// Sentences with no written token are left out of the latency averages.
EvalRecord score_decode(const CorpusDecode& decoded, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                        const EvalOptions& options = {});

CorpusDecode decode_fixed(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab, int k,
                          const EvalOptions& options = {});
CorpusDecode decode_adaptive(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                             const PolicyConfig& config, const EvalOptions& options = {},
                             AdapterNormTrace* norms = nullptr);

EvalRecord evaluate_fixed(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab, int k,
                          const EvalOptions& options = {});
EvalRecord evaluate_adaptive(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                             const PolicyConfig& config, const EvalOptions& options = {});

std::vector<EvalRecord> sweep_fixed(const SimtModel& model, std::span<const EncodedPair> pairs,
                                    const Vocabulary& vocab, std::span<const int> ks, const EvalOptions& options = {});
std::vector<EvalRecord> sweep_adaptive(const SimtModel& model, std::span<const EncodedPair> pairs,
                                       const Vocabulary& vocab, int k_min, int k_max,
                                       std::span<const Threshold> grid, const EvalOptions& options = {});

/// Canonical order: AL, then policy, then setting.
void sort_records(std::vector<EvalRecord>& records);

/// Header plus one row per record: policy, setting, BLEU, acc, AL, CW, AP, DAL, seconds.
std::string format_eval_tsv(const std::vector<EvalRecord>& records, bool include_seconds = true);

struct NormMatrix {
  std::vector<std::string> settings;      // columns
  std::vector<std::vector<double>> rows;  // one per adapter-carrying layer
};

/// Mean adapter output norm per layer under each adaptive setting.
/// Throws UsageError for a model without adapters.
NormMatrix instrument_norms(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                            int k_min, int k_max, std::span<const Threshold> grid, const EvalOptions& options = {});
std::string format_norm_tsv(const NormMatrix& matrix);

struct TimingRow {
  std::string model;  // label supplied by the caller
  int k = 0;
  int runs = 0;
  double mean_seconds = 0.0;
  std::optional<double> stddev_seconds;  // needs at least two runs
  bool outputs_identical = true;         // decoded tokens equal across runs
};

std::vector<TimingRow> time_fixed_decoding(const SimtModel& model, const std::string& label,
                                           std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                                           std::span<const int> ks, int runs);
std::string format_timing_tsv(const std::vector<TimingRow>& rows);

/// Latency of saved traces; |x| per line comes from `source_lengths`.
/// Throws InputError when the counts disagree or a trace reads past its source.
LatencyReport trace_latency(std::span<const ActionTrace> traces, std::span<const int> source_lengths);

}  // namespace simt
