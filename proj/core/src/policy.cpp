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

#include "simt/policy.hpp"

#include <algorithm>
#include <cmath>

#include "simt/errors.hpp"

namespace simt {

int wait_k_schedule(int k, int source_length, int t) {
  if (k < 1 || t < 1 || source_length < 1) {
    throw UsageError("wait_k_schedule: k, t and |x| must be >= 1");
  }
  return static_cast<int>(std::min<long>(source_length, static_cast<long>(t) + k - 1));
}

int sample_train_k(Rng& rng, int max_source_length) {
  if (max_source_length < 1) throw UsageError("sample_train_k: max source length must be >= 1");
  return static_cast<int>(rng.uniform_int(1, max_source_length));
}

void PolicyConfig::validate() const {
  if (k_min < 1) throw UsageError("policy: k_min must be >= 1");
  if (k_max < k_min) throw UsageError("policy: k_max must be >= k_min");
  if (!std::isfinite(rho_min) || !std::isfinite(rho_max)) throw UsageError("policy: thresholds must be finite");
}

double threshold(int k, const PolicyConfig& config) {
  config.validate();
  if (k < config.k_min || k > config.k_max) {
    throw UsageError("threshold: k = " + std::to_string(k) + " outside [" + std::to_string(config.k_min) + ", " +
                     std::to_string(config.k_max) + "]");
  }
  if (config.k_min == config.k_max) return config.rho_min;
  const double d = (config.rho_min - config.rho_max) / static_cast<double>(config.k_max - config.k_min);
  return config.rho_min - d * static_cast<double>(k - config.k_min);
}

// ---- ActionTrace -----------------------------------------------------------

int ActionTrace::reads() const { return static_cast<int>(std::count(actions.begin(), actions.end(), 'R')); }

int ActionTrace::writes() const { return static_cast<int>(std::count(actions.begin(), actions.end(), 'W')); }

std::vector<int> ActionTrace::delays() const {
  std::vector<int> g;
  int read = 0;
  for (char a : actions) {
    if (a == 'R') {
      ++read;
    } else {
      g.push_back(read);
    }
  }
  return g;
}

DelaySchedule ActionTrace::schedule() const { return DelaySchedule{reads(), delays()}; }

ActionTrace ActionTrace::from_string(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  ActionTrace trace;
  for (char c : line) {
    if (c != 'R' && c != 'W') throw ParseError(1, std::string("action trace: unexpected character '") + c + "'");
  }
  trace.actions = std::string(line);
  return trace;
}

int SourceStream::next() {
  if (exhausted()) throw PreconditionError("source stream already exhausted");
  const int tok = position_ < tokens_.size() ? tokens_[position_] : Vocabulary::kEos;
  ++position_;
  return tok;
}

std::size_t default_max_output_length(std::size_t source_length) { return 2 * source_length + 10; }

// ---- Decoders ------------------------------------------------------------------

namespace {

struct Decoder {
  const SimtModel& model;
  SourceStream stream;
  EncoderState state;
  std::vector<std::size_t> visible;  // per emitted row, what it saw
  DecodeResult result;
  std::size_t max_length;
  AdapterNormTrace* norms;

  Decoder(const SimtModel& m, std::span<const int> source, std::optional<std::size_t> max_len,
          AdapterNormTrace* n)
      : model(m),
        stream(source),
        state(m.begin_encoding()),
        max_length(max_len.value_or(default_max_output_length(source.size()))),
        norms(n) {
    if (source.empty()) throw PreconditionError("decode: empty source");
    if (norms) norms->begin_sentence();
  }

  void read() {
    const bool marker = stream.at_end_marker();
    model.encode_append(state, stream.next());
    if (marker) {
      result.trace.source_exhausted = true;
    } else {
      result.trace.actions += 'R';
    }
  }

  // Top token and its probability with the current source visible.
  std::pair<int, double> query(int adapter_k) {
    visible.push_back(state.length);
    const auto dist = model.next_distribution(state, result.tokens, visible, adapter_k, norms);
    visible.pop_back();
    const auto best = std::max_element(dist.begin(), dist.end());
    return {static_cast<int>(best - dist.begin()), *best};
  }

  // Returns false once decoding is over.
  bool write(int token) {
    if (token == Vocabulary::kEos) {
      result.trace.eos_emitted = true;
      return false;
    }
    visible.push_back(state.length);
    result.tokens.push_back(token);
    result.trace.actions += 'W';
    if (result.tokens.size() >= max_length) {
      result.trace.truncated = true;
      return false;
    }
    return true;
  }
};

}  // namespace

DecodeResult fixed_waitk_decode(const SimtModel& model, std::span<const int> source, int k,
                                std::optional<std::size_t> max_output_length, AdapterNormTrace* norms) {
  if (k < 1) throw UsageError("fixed_waitk_decode: k must be >= 1");
  Decoder dec(model, source, max_output_length, norms);
  if (dec.max_length == 0) {
    dec.result.trace.truncated = true;
    return std::move(dec.result);
  }
  for (long t = 1;; ++t) {
    const long need = t + k - 1;
    while (!dec.state.complete && static_cast<long>(dec.state.length) < need) dec.read();
    if (!dec.write(dec.query(k).first)) break;
  }
  return std::move(dec.result);
}

DecodeResult adaptive_decode(const SimtModel& model, std::span<const int> source, const PolicyConfig& config,
                             std::optional<std::size_t> max_output_length, AdapterNormTrace* norms) {
  config.validate();
  Decoder dec(model, source, max_output_length, norms);
  if (dec.max_length == 0) {
    dec.result.trace.truncated = true;
    return std::move(dec.result);
  }
  dec.read();
  while (!dec.state.complete) {
    const int k = static_cast<int>(dec.state.length) - static_cast<int>(dec.result.tokens.size());
    if (k < config.k_min) {
      dec.read();
      continue;
    }
    const auto [token, p_top] = dec.query(std::min(k, config.k_max));
    if (k < config.k_max && p_top < threshold(k, config)) {
      dec.read();
      continue;
    }
    if (!dec.write(token)) return std::move(dec.result);
  }
  while (dec.write(dec.query(config.k_max).first)) {
  }
  return std::move(dec.result);
}

}  // namespace simt
