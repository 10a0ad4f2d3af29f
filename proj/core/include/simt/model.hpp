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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/rng.hpp"
#include "simt/tensor.hpp"

namespace simt {

struct ModelConfig {
  int source_vocab = 0;
  int target_vocab = 0;
  int embed_dim = 64;
  int ffn_dim = 128;
  int num_layers = 2;  // encoder and decoder each
  int num_heads = 2;
  double dropout = 0.1;
  /// K_A: minimum lagging served by each adapter; strictly increasing from 1.
  std::vector<int> adapter_lagging{1, 3, 5, 7};
  int adapter_bottleneck = 16;
  /// Decoder layers (0-based) that carry an adapter bank. Empty = no adapters.
  std::vector<int> adapter_layers{0, 1};
  /// Only adapters receive gradients when set.
  bool backbone_frozen = false;

  /// Throws UsageError describing the first violated invariant.
  void validate() const;
  bool has_adapters() const { return !adapter_layers.empty(); }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;

  /// Small defaults for synthetic tasks (2+2 layers, dim 64, 2 heads).
  static ModelConfig desk(int source_vocab, int target_vocab);
  /// 6+6 layers, dim 512, FFN 1024, 4 heads, 8 adapters of bottleneck 64.
  static ModelConfig paper(int source_vocab, int target_vocab);
  /// dim 16 model used for gradient checks.
  static ModelConfig tiny(int source_vocab, int target_vocab);
};

/// Index into K_A of the largest entry <= k.
std::size_t route(int k, std::span<const int> adapter_lagging);

// Named parameter arrays in registration order.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor tensor);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, std::size_t> index_;
};

bool is_adapter_parameter(const std::string& name);

// Causal encoder states for the source prefix read so far. Appending a token
// never touches earlier rows.
struct EncoderState {
  std::size_t length = 0;   // positions encoded, including </s> once read
  bool complete = false;    // </s> has been appended
  std::vector<std::vector<double>> keys;    // per encoder layer, row-major [length, d]
  std::vector<std::vector<double>> values;  // per encoder layer
  std::vector<double> memory;               // final-layer output Z, [length, d]
};

// Collects per-step L2 norms of adapter outputs (before the residual add).
class AdapterNormTrace {
 public:
  explicit AdapterNormTrace(std::size_t adapter_layers) : layers_(adapter_layers) {}

  void begin_sentence();
  void record(std::size_t slot, double norm);
  std::size_t layers() const { return layers_; }
  std::size_t sentences() const { return sentences_.size(); }

  /// For each adapter layer, the mean over steps averaged over sentences.
  /// Throws UsageError if nothing was recorded.
  std::vector<double> layer_means() const;

 private:
  std::size_t layers_;
  std::vector<std::vector<std::vector<double>>> sentences_;  // [sentence][slot][step]
};

std::vector<double> adapter_norms(const AdapterNormTrace& trace);

class SimtModel {
 public:
  /// Fresh parameters: Xavier-normal weights, unit layer norms, adapters with
  /// small random down-projections and zero up-projections.
  SimtModel(ModelConfig config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  /// Copies values for every name present in both models (shapes must agree).
  /// Returns the number of tensors copied.
  std::size_t load_values(const std::map<std::string, std::vector<double>>& values, bool require_all);

  std::size_t route(int k) const;
  void set_backbone_frozen(bool frozen);
  /// Throws UsageError outside [0, 1).
  void set_dropout(double rate);

  // ---- Streaming inference (no tape) ------------------------------------

  EncoderState begin_encoding() const;
  /// Appends one source token (</s> marks the state complete).
  void encode_append(EncoderState& state, int token) const;
  /// Convenience: appends every token then </s>.
  EncoderState encode(std::span<const int> source) const;

  /// Next-token distribution with the adapter selected by route(adapter_k).
  /// `prefix` excludes <s>; decoder row i (row 0 is <s>) cross-attends to the
  /// first visible[i] encoder rows, so |visible| = |prefix| + 1 and the last
  /// entry is what the current step sees. Earlier entries replay what each
  /// row saw when it was produced, matching the teacher-forced masks.
  std::vector<double> next_distribution(const EncoderState& state, std::span<const int> prefix,
                                        std::span<const std::size_t> visible, int adapter_k,
                                        AdapterNormTrace* norms = nullptr) const;

  /// Wait-k step t = |prefix| + 1: row i sees g_k(i + 1) rows; uses route(k).
  /// Requires at least t + k - 1 rows unless the source is complete.
  std::vector<double> decode_step(const EncoderState& state, std::span<const int> prefix, int k, int t,
                                  AdapterNormTrace* norms = nullptr) const;

  // ---- Teacher forcing --------------------------------------------------

  /// Logits [B, T, V]. Cross-attention row t sees min(|x|+1, t + lag - 1)
  /// encoder positions, or all of them when lag is empty. The adapter column
  /// is route(adapter_k). Dropout is applied only when `dropout_rng` is set.
  Tensor forward_logits(const Batch& batch, std::optional<int> lag, int adapter_k,
                        Rng* dropout_rng = nullptr) const;

  /// Mean label-smoothed loss under the wait-k mask for lagging k.
  Tensor forward_train(const Batch& batch, int k, double label_smoothing, Rng* dropout_rng = nullptr) const;

 private:
  struct Linear {
    Tensor weight;
    Tensor bias;
  };
  struct Norm {
    Tensor gain;
    Tensor bias;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct EncoderLayer {
    Norm ln_attn, ln_ffn;
    Attention self_attn;
    Linear fc1, fc2;
  };
  struct Adapter {
    Norm ln;
    Linear down, up;
  };
  struct DecoderLayer {
    Norm ln_self, ln_cross, ln_ffn;
    Attention self_attn, cross_attn;
    Linear fc1, fc2;
    std::vector<Adapter> adapters;  // one per K_A entry; empty if no bank here
    std::size_t slot = 0;           // index among adapter-carrying layers
  };

  Linear make_linear(const std::string& name, int in, int out, Rng& rng, double stddev = -1.0);
  Norm make_norm(const std::string& name, int dim);
  Attention make_attention(const std::string& name, Rng& rng);

  Tensor embed(const Tensor& table, std::span<const int> ids, std::size_t batch, std::size_t steps,
               std::size_t first_position) const;
  Tensor split_heads(const Tensor& x) const;
  Tensor merge_heads(const Tensor& x) const;
  Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask, Rng* rng) const;
  Tensor feed_forward(const Tensor& x, const Linear& fc1, const Linear& fc2, Rng* rng) const;
  Tensor residual_dropout(const Tensor& x, Rng* rng) const;
  Tensor run_decoder(std::span<const int> target_in, std::size_t batch, std::size_t steps, const Tensor& memory,
                     const Tensor& self_mask, const Tensor* cross_mask, std::size_t adapter_index, Rng* rng,
                     AdapterNormTrace* norms) const;

  ModelConfig config_;
  ParameterStore params_;
  Tensor src_embed_, tgt_embed_;
  std::vector<EncoderLayer> encoder_;
  Norm encoder_final_;
  std::vector<DecoderLayer> decoder_;
  Norm decoder_final_;
  Linear output_;
};

/// Additive attention masks (0 visible, -inf hidden), replicated over heads.
Tensor encoder_self_mask(const Batch& batch, std::size_t heads);
Tensor decoder_self_mask(const Batch& batch, std::size_t heads);
Tensor cross_attention_mask(const Batch& batch, std::size_t heads, std::optional<int> lag);

}  // namespace simt
