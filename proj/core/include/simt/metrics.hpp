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

#include <string>
#include <string_view>
#include <vector>

#include "simt/corpus.hpp"

namespace simt {

// g(t) for t = 1..|y|: how many source tokens had been read when target token
// t was written. End-of-sequence markers are not counted on either side.
struct DelaySchedule {
  int source_length = 0;
  std::vector<int> delays;

  int target_length() const { return static_cast<int>(delays.size()); }

  /// Throws InputError unless |x|, |y| >= 1 and g is non-decreasing within [0, |x|].
  void validate() const;

  /// g_k(t) = min(|x|, t + k - 1)
  static DelaySchedule wait_k(int k, int source_length, int target_length);
  /// Reads the whole source before the first write.
  static DelaySchedule full_sentence(int source_length, int target_length);
  /// Builds g from an 'R'/'W' action string.
  static DelaySchedule from_actions(std::string_view actions, int source_length);
};

struct LatencyReport {
  double al = 0.0;
  double cw = 0.0;
  double ap = 0.0;
  double dal = 0.0;
};

/// Average Lagging over the steps up to tau, the first t with g(t) = |x|.
/// Throws IncompleteScheduleError when g never reaches |x|.
double average_lagging(const DelaySchedule& s);

/// As above, but a schedule that stops before reading all of x (the model
/// ended early) averages over every step instead of throwing.
double average_lagging_lenient(const DelaySchedule& s);

/// Lenient AL whose ideal-policy deduction uses a reference length |y*|
/// instead of the produced |y|, so over- or under-generation does not shift it.
double average_lagging_reference(const DelaySchedule& s, int reference_length);

/// Average run of consecutive reads between writes, with g(0) = 0.
double consecutive_wait(const DelaySchedule& s);

/// Mean fraction of the source read per written token.
double average_proportion(const DelaySchedule& s);

/// g'(1) = g(1), g'(i) = max(g(i), g'(i-1) + |x|/|y|), and
/// DAL = 1/|y| * sum_i [ g'(i) - (i-1) / (|x|/|y|) ].
/// The deduction divides by |x|/|y| (not |y|/|x| as in AL); kept as defined.
double differentiable_average_lagging(const DelaySchedule& s);

LatencyReport latency_metrics(const DelaySchedule& s);
/// latency_metrics with average_lagging_lenient.
LatencyReport latency_metrics_lenient(const DelaySchedule& s);

/// Same four metrics computed in a single pass over an 'R'/'W' string, without
/// materializing g. Exists as an independent route to cross-check the above.
LatencyReport latency_from_actions(std::string_view actions, int source_length);

/// Unweighted mean over sentences.
LatencyReport mean_latency(const std::vector<LatencyReport>& reports);

struct BleuOptions {
  int max_order = 4;
  /// Add-one smoothing of the n >= 2 precisions, for tiny corpora where a
  /// zero 4-gram count would otherwise zero the score.
  bool add_one_smoothing = false;
};

/// Corpus BLEU on a 0..100 scale: geometric mean of clipped n-gram precisions
/// times the brevity penalty. One reference per hypothesis.
double corpus_bleu(const std::vector<TokenList>& hypotheses, const std::vector<TokenList>& references,
                   const BleuOptions& options = {});

/// Position-wise match rate over reference tokens (extra hypothesis tokens
/// are ignored, missing ones count as errors).
double token_accuracy(const std::vector<TokenList>& hypotheses, const std::vector<TokenList>& references);

struct MetricReport {
  LatencyReport latency;
  double bleu = 0.0;
  double token_accuracy = 0.0;
};

}  // namespace simt
