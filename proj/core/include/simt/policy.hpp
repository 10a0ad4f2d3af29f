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
#include <string_view>
#include <vector>

#include "simt/metrics.hpp"
#include "simt/model.hpp"
#include "simt/rng.hpp"

namespace simt {

/// g_k(t) = min(|x|, t + k - 1). Throws UsageError unless k, t, |x| >= 1.
int wait_k_schedule(int k, int source_length, int t);

/// Uniform draw from [1, max_source_length].
int sample_train_k(Rng& rng, int max_source_length);

struct PolicyConfig {
  int k_min = 1;
  int k_max = 9;
  double rho_min = 1.0;  // threshold at k_min
  double rho_max = 0.0;  // threshold at k_max

  void validate() const;
};

/// rho_k interpolated linearly between (k_min, rho_min) and (k_max, rho_max);
/// constant when k_min == k_max. Throws UsageError for k outside the range.
double threshold(int k, const PolicyConfig& config);

// READ/WRITE history of one sentence as 'R'/'W'. Reading the source end
// marker and writing </s> are not actions here; they show up as flags.
struct ActionTrace {
  std::string actions;
  bool source_exhausted = false;  // the end marker was read
  bool eos_emitted = false;       // decoding stopped on </s>
  bool truncated = false;         // stopped at the output length guard

  int reads() const;
  int writes() const;
  /// g(t) for every WRITE.
  std::vector<int> delays() const;
  DelaySchedule schedule() const;

  const std::string& to_string() const { return actions; }
  /// Throws ParseError on characters other than 'R' and 'W'.
  static ActionTrace from_string(std::string_view line);
};

// Source tokens delivered one READ at a time; the end marker follows the
// last real token.
class SourceStream {
 public:
  explicit SourceStream(std::span<const int> tokens) : tokens_(tokens) {}
  bool exhausted() const { return position_ > tokens_.size(); }
  bool at_end_marker() const { return position_ == tokens_.size(); }
  /// Next token id, the end marker once the real tokens run out.
  int next();
  std::size_t size() const { return tokens_.size(); }

 private:
  std::span<const int> tokens_;
  std::size_t position_ = 0;
};

struct DecodeResult {
  std::vector<int> tokens;  // without </s>
  ActionTrace trace;
};

/// 2|x| + 10
std::size_t default_max_output_length(std::size_t source_length);

/// Greedy wait-k: before writing step t, reads until g_k(t) positions (the
/// end marker included) are visible. Uses adapter route(k) throughout.
DecodeResult fixed_waitk_decode(const SimtModel& model, std::span<const int> source, int k,
                                std::optional<std::size_t> max_output_length = std::nullopt,
                                AdapterNormTrace* norms = nullptr);

/// Uncertainty-driven policy: the first token is read up front; while the
/// source lasts, lagging k = reads - writes forces a READ below k_min, and
/// otherwise the top probability under route(min(k, k_max)) is compared with
/// rho_k (k < k_max only). Once the end marker is read the rest is generated
/// with route(k_max).
DecodeResult adaptive_decode(const SimtModel& model, std::span<const int> source, const PolicyConfig& config,
                             std::optional<std::size_t> max_output_length = std::nullopt,
                             AdapterNormTrace* norms = nullptr);

}  // namespace simt
