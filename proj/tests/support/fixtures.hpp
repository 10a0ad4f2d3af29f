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

// Shared builders for model-level tests and the acceptance runner.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/model.hpp"
#include "simt/ops.hpp"
#include "simt/rng.hpp"

namespace simt::testing {

inline std::vector<EncodedPair> random_pairs(std::size_t count, int vocab, int min_len, int max_len, Rng& rng) {
  std::vector<EncodedPair> pairs(count);
  for (auto& p : pairs) {
    const auto src_len = rng.uniform_int(min_len, max_len);
    const auto tgt_len = rng.uniform_int(min_len, max_len);
    for (std::int64_t i = 0; i < src_len; ++i) {
      p.source.push_back(static_cast<int>(rng.uniform_int(Vocabulary::kReserved, vocab - 1)));
    }
    for (std::int64_t i = 0; i < tgt_len; ++i) {
      p.target.push_back(static_cast<int>(rng.uniform_int(Vocabulary::kReserved, vocab - 1)));
    }
  }
  return pairs;
}

inline Batch batch_of(const std::vector<EncodedPair>& pairs) {
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  return collate(pairs, idx);
}

/// Gives every adapter a non-trivial up-projection so all paths carry signal.
inline void randomize_adapters(SimtModel& model, Rng& rng, double stddev = 0.1) {
  for (auto& [name, tensor] : model.parameters().items()) {
    if (!is_adapter_parameter(name)) continue;
    if (name.find(".up.") == std::string::npos && name.find(".down.") == std::string::npos) continue;
    for (auto& v : tensor.mutable_values()) v = stddev * rng.normal();
  }
}

/// Perturbs every parameter slightly (layer-norm gains away from 1, biases away from 0).
inline void jitter_parameters(SimtModel& model, Rng& rng, double stddev = 0.05) {
  for (auto& [name, tensor] : model.parameters().items()) {
    for (auto& v : tensor.mutable_values()) v += stddev * rng.normal();
  }
}

inline constexpr int kUnbounded = 1 << 20;

struct StreamingCheck {
  std::size_t steps = 0;
  std::size_t mismatches = 0;  // distributions differing in any bit
};

/// Greedy wait-k decoding that appends source tokens as the schedule demands,
/// compared step by step against one teacher-forced pass over the full source
/// with the g_k(t) cross-attention mask.
inline StreamingCheck streaming_vs_full(const SimtModel& model, const EncodedPair& pair, int k) {
  EncoderState state = model.begin_encoding();
  std::size_t next = 0;
  std::vector<int> prefix;
  std::vector<std::vector<double>> streamed;
  const std::size_t max_len = 2 * pair.source.size() + 10;
  for (std::size_t t = 1; t <= max_len; ++t) {
    const long need = static_cast<long>(t) + k - 1;
    while (!state.complete && static_cast<long>(state.length) < need) {
      model.encode_append(state, next < pair.source.size() ? pair.source[next] : Vocabulary::kEos);
      ++next;
    }
    auto dist = model.decode_step(state, prefix, k, static_cast<int>(t));
    const auto best = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    streamed.push_back(std::move(dist));
    if (best == Vocabulary::kEos) break;
    prefix.push_back(best);
  }

  std::vector<EncodedPair> one{{pair.source, prefix}};
  const Batch batch = batch_of(one);
  NoGradGuard no_grad;
  const Tensor probs = ops::softmax(model.forward_logits(batch, k, k), -1);
  const std::size_t vocab = probs.dim(2);
  StreamingCheck check;
  for (std::size_t t = 0; t < streamed.size(); ++t) {
    ++check.steps;
    for (std::size_t v = 0; v < vocab; ++v) {
      if (std::bit_cast<std::uint64_t>(probs.values()[t * vocab + v]) !=
          std::bit_cast<std::uint64_t>(streamed[t][v])) {
        ++check.mismatches;
        break;
      }
    }
  }
  return check;
}

}  // namespace simt::testing
