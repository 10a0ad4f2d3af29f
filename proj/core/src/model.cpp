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

#include "simt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "simt/errors.hpp"
#include "simt/ops.hpp"

namespace simt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor random_normal(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::vector<double> sinusoid(std::size_t position, std::size_t dim) {
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < dim; i += 2) {
    const double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
    row[i] = std::sin(static_cast<double>(position) * rate);
    if (i + 1 < dim) row[i + 1] = std::cos(static_cast<double>(position) * rate);
  }
  return row;
}

Tensor causal_mask(std::size_t heads, std::size_t steps) {
  std::vector<double> m(heads * steps * steps, 0.0);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t j = i + 1; j < steps; ++j) m[(h * steps + i) * steps + j] = kNegInf;
  return Tensor::from({1, heads, steps, steps}, std::move(m));
}

}  // namespace

// ---- ModelConfig ---------------------------------------------------------

void ModelConfig::validate() const {
  if (source_vocab <= Vocabulary::kReserved || target_vocab <= Vocabulary::kReserved) {
    throw UsageError("model config: vocabularies must hold more than the reserved tokens");
  }
  if (embed_dim < 1 || ffn_dim < 1 || num_layers < 1 || num_heads < 1) {
    throw UsageError("model config: dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw UsageError("model config: embed_dim " + std::to_string(embed_dim) + " not divisible by " +
                     std::to_string(num_heads) + " heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("model config: dropout must lie in [0, 1)");
  if (adapter_lagging.empty() || adapter_lagging.front() != 1) {
    throw UsageError("model config: adapter lagging must be non-empty and start at 1");
  }
  for (std::size_t i = 1; i < adapter_lagging.size(); ++i) {
    if (adapter_lagging[i] <= adapter_lagging[i - 1]) {
      throw UsageError("model config: adapter lagging must be strictly increasing");
    }
  }
  if (adapter_bottleneck < 1) throw UsageError("model config: adapter bottleneck must be >= 1");
  for (std::size_t i = 0; i < adapter_layers.size(); ++i) {
    if (adapter_layers[i] < 0 || adapter_layers[i] >= num_layers ||
        (i > 0 && adapter_layers[i] <= adapter_layers[i - 1])) {
      throw UsageError("model config: adapter layers must be increasing indices below num_layers");
    }
  }
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{{"source_vocab", source_vocab},
                   {"target_vocab", target_vocab},
                   {"embed_dim", embed_dim},
                   {"ffn_dim", ffn_dim},
                   {"num_layers", num_layers},
                   {"num_heads", num_heads},
                   {"dropout", dropout},
                   {"adapter_lagging", adapter_lagging},
                   {"adapter_bottleneck", adapter_bottleneck},
                   {"adapter_layers", adapter_layers},
                   {"backbone_frozen", backbone_frozen}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.source_vocab = j.at("source_vocab").get<int>();
    c.target_vocab = j.at("target_vocab").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.adapter_lagging = j.at("adapter_lagging").get<std::vector<int>>();
    c.adapter_bottleneck = j.at("adapter_bottleneck").get<int>();
    c.adapter_layers = j.at("adapter_layers").get<std::vector<int>>();
    c.backbone_frozen = j.value("backbone_frozen", false);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
}

ModelConfig ModelConfig::desk(int source_vocab, int target_vocab) {
  ModelConfig c;
  c.source_vocab = source_vocab;
  c.target_vocab = target_vocab;
  return c;
}

ModelConfig ModelConfig::paper(int source_vocab, int target_vocab) {
  ModelConfig c;
  c.source_vocab = source_vocab;
  c.target_vocab = target_vocab;
  c.embed_dim = 512;
  c.ffn_dim = 1024;
  c.num_layers = 6;
  c.num_heads = 4;
  c.dropout = 0.3;
  c.adapter_lagging = {1, 3, 5, 7, 9, 11, 13, 15};
  c.adapter_bottleneck = 64;
  c.adapter_layers = {0, 1, 2, 3, 4, 5};
  return c;
}

ModelConfig ModelConfig::tiny(int source_vocab, int target_vocab) {
  ModelConfig c;
  c.source_vocab = source_vocab;
  c.target_vocab = target_vocab;
  c.embed_dim = 16;
  c.ffn_dim = 32;
  c.num_heads = 2;
  c.adapter_bottleneck = 4;
  c.dropout = 0.0;
  return c;
}

std::size_t route(int k, std::span<const int> adapter_lagging) {
  if (adapter_lagging.empty() || k < adapter_lagging.front()) {
    throw RoutingError("no adapter serves lagging " + std::to_string(k));
  }
  std::size_t selected = 0;
  for (std::size_t i = 0; i < adapter_lagging.size(); ++i) {
    if (k >= adapter_lagging[i]) selected = i;
  }
  return selected;
}

// ---- ParameterStore ------------------------------------------------------

Tensor& ParameterStore::add(const std::string& name, Tensor tensor) {
  if (index_.count(name)) throw UsageError("duplicate parameter " + name);
  index_[name] = items_.size();
  items_.emplace_back(name, std::move(tensor));
  return items_.back().second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return items_[it->second].second;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return items_[it->second].second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

bool is_adapter_parameter(const std::string& name) { return name.find(".adapter.") != std::string::npos; }

// ---- AdapterNormTrace ----------------------------------------------------

void AdapterNormTrace::begin_sentence() { sentences_.emplace_back(layers_); }

void AdapterNormTrace::record(std::size_t slot, double norm) {
  if (sentences_.empty()) begin_sentence();
  sentences_.back().at(slot).push_back(norm);
}

std::vector<double> AdapterNormTrace::layer_means() const {
  std::vector<double> means(layers_, 0.0);
  std::size_t counted = 0;
  for (const auto& sentence : sentences_) {
    if (sentence.empty() || sentence.front().empty()) continue;
    for (std::size_t l = 0; l < layers_; ++l) {
      double total = 0.0;
      for (double v : sentence[l]) total += v;
      means[l] += total / static_cast<double>(sentence[l].size());
    }
    ++counted;
  }
  if (counted == 0 || layers_ == 0) throw UsageError("adapter norms: no decoding steps recorded");
  for (auto& m : means) m /= static_cast<double>(counted);
  return means;
}

std::vector<double> adapter_norms(const AdapterNormTrace& trace) { return trace.layer_means(); }

// ---- Masks -----------------------------------------------------------------

Tensor encoder_self_mask(const Batch& batch, std::size_t heads) {
  const std::size_t s = batch.source_steps;
  std::vector<double> m(batch.size * heads * s * s, 0.0);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const auto len = static_cast<std::size_t>(batch.source_lengths[b]);
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j)
          if (j > i || j >= len) m[((b * heads + h) * s + i) * s + j] = kNegInf;
  }
  return Tensor::from({batch.size, heads, s, s}, std::move(m));
}

Tensor decoder_self_mask(const Batch& batch, std::size_t heads) {
  const std::size_t t = batch.target_steps;
  std::vector<double> m(batch.size * heads * t * t, 0.0);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const auto len = static_cast<std::size_t>(batch.target_lengths[b]);
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j)
          if (j > i || j >= len) m[((b * heads + h) * t + i) * t + j] = kNegInf;
  }
  return Tensor::from({batch.size, heads, t, t}, std::move(m));
}

Tensor cross_attention_mask(const Batch& batch, std::size_t heads, std::optional<int> lag) {
  const std::size_t t = batch.target_steps;
  const std::size_t s = batch.source_steps;
  if (lag && *lag < 1) throw UsageError("lagging must be >= 1");
  std::vector<double> m(batch.size * heads * t * s, 0.0);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const long len = batch.source_lengths[b];
    for (std::size_t i = 0; i < t; ++i) {
      // Step i+1 reads g(i+1) = min(|x|+1, i + k) positions.
      const long visible = lag ? std::min<long>(len, static_cast<long>(i) + *lag) : len;
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t j = static_cast<std::size_t>(visible); j < s; ++j)
          m[((b * heads + h) * t + i) * s + j] = kNegInf;
    }
  }
  return Tensor::from({batch.size, heads, t, s}, std::move(m));
}

// ---- SimtModel ---------------------------------------------------------------

SimtModel::Linear SimtModel::make_linear(const std::string& name, int in, int out, Rng& rng, double stddev) {
  if (stddev < 0.0) stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  Linear l;
  l.weight = params_.add(name + ".weight",
                         random_normal({static_cast<std::size_t>(in), static_cast<std::size_t>(out)}, stddev, rng));
  l.bias = params_.add(name + ".bias", Tensor::zeros({static_cast<std::size_t>(out)}, true));
  return l;
}

SimtModel::Norm SimtModel::make_norm(const std::string& name, int dim) {
  Norm n;
  n.gain = params_.add(name + ".gain", Tensor::full({static_cast<std::size_t>(dim)}, 1.0, true));
  n.bias = params_.add(name + ".bias", Tensor::zeros({static_cast<std::size_t>(dim)}, true));
  return n;
}

SimtModel::Attention SimtModel::make_attention(const std::string& name, Rng& rng) {
  const int d = config_.embed_dim;
  Attention a;
  a.q = make_linear(name + ".q", d, d, rng);
  a.k = make_linear(name + ".k", d, d, rng);
  a.v = make_linear(name + ".v", d, d, rng);
  a.o = make_linear(name + ".o", d, d, rng);
  return a;
}

SimtModel::SimtModel(ModelConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  const int d = config_.embed_dim;
  const double embed_std = 1.0 / std::sqrt(static_cast<double>(d));
  src_embed_ = params_.add(
      "src_embed", random_normal({static_cast<std::size_t>(config_.source_vocab), static_cast<std::size_t>(d)},
                                 embed_std, rng));
  tgt_embed_ = params_.add(
      "tgt_embed", random_normal({static_cast<std::size_t>(config_.target_vocab), static_cast<std::size_t>(d)},
                                 embed_std, rng));
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    EncoderLayer layer;
    layer.ln_attn = make_norm(p + ".ln_attn", d);
    layer.self_attn = make_attention(p + ".self_attn", rng);
    layer.ln_ffn = make_norm(p + ".ln_ffn", d);
    layer.fc1 = make_linear(p + ".fc1", d, config_.ffn_dim, rng);
    layer.fc2 = make_linear(p + ".fc2", config_.ffn_dim, d, rng);
    encoder_.push_back(std::move(layer));
  }
  encoder_final_ = make_norm("encoder.final_ln", d);

  std::size_t slot = 0;
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    DecoderLayer layer;
    layer.ln_self = make_norm(p + ".ln_self", d);
    layer.self_attn = make_attention(p + ".self_attn", rng);
    layer.ln_cross = make_norm(p + ".ln_cross", d);
    layer.cross_attn = make_attention(p + ".cross_attn", rng);
    layer.ln_ffn = make_norm(p + ".ln_ffn", d);
    layer.fc1 = make_linear(p + ".fc1", d, config_.ffn_dim, rng);
    layer.fc2 = make_linear(p + ".fc2", config_.ffn_dim, d, rng);
    if (std::find(config_.adapter_layers.begin(), config_.adapter_layers.end(), l) != config_.adapter_layers.end()) {
      layer.slot = slot++;
      for (int lag : config_.adapter_lagging) {
        const std::string a = p + ".adapter." + std::to_string(lag);
        Adapter adapter;
        adapter.ln = make_norm(a + ".ln", d);
        adapter.down = make_linear(a + ".down", d, config_.adapter_bottleneck, rng, 0.01);
        adapter.up = make_linear(a + ".up", config_.adapter_bottleneck, d, rng, 0.0);
        layer.adapters.push_back(std::move(adapter));
      }
    }
    decoder_.push_back(std::move(layer));
  }
  decoder_final_ = make_norm("decoder.final_ln", d);
  output_ = make_linear("output", d, config_.target_vocab, rng);
  set_backbone_frozen(config_.backbone_frozen);
}

std::size_t SimtModel::load_values(const std::map<std::string, std::vector<double>>& values, bool require_all) {
  std::size_t copied = 0;
  for (auto& [name, tensor] : params_.items()) {
    auto it = values.find(name);
    if (it == values.end()) {
      if (require_all) throw InputError("checkpoint lacks parameter " + name);
      continue;
    }
    if (it->second.size() != tensor.size()) {
      throw DimensionError("parameter " + name + ": checkpoint holds " + std::to_string(it->second.size()) +
                           " values, model expects " + shape_string(tensor.shape()));
    }
    std::copy(it->second.begin(), it->second.end(), tensor.mutable_values().begin());
    ++copied;
  }
  return copied;
}

std::size_t SimtModel::route(int k) const { return simt::route(k, config_.adapter_lagging); }

void SimtModel::set_backbone_frozen(bool frozen) {
  config_.backbone_frozen = frozen;
  for (auto& [name, tensor] : params_.items()) {
    const bool trainable = is_adapter_parameter(name) || !frozen;
    if (tensor.requires_grad() != trainable) tensor.set_requires_grad(trainable);
  }
}

void SimtModel::set_dropout(double rate) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout must lie in [0, 1)");
  config_.dropout = rate;
}

Tensor SimtModel::embed(const Tensor& table, std::span<const int> ids, std::size_t batch, std::size_t steps,
                        std::size_t first_position) const {
  const auto d = static_cast<std::size_t>(config_.embed_dim);
  Tensor x = ops::scale(ops::embedding(table, ids, {batch, steps}), std::sqrt(static_cast<double>(d)));
  std::vector<double> pos(batch * steps * d);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto row = sinusoid(first_position + t, d);
    for (std::size_t b = 0; b < batch; ++b) std::copy(row.begin(), row.end(), pos.begin() + (b * steps + t) * d);
  }
  return ops::add(x, Tensor::from({batch, steps, d}, std::move(pos)));
}

Tensor SimtModel::split_heads(const Tensor& x) const {
  const auto h = static_cast<std::size_t>(config_.num_heads);
  const std::size_t d = x.dim(2);
  return ops::swap_axes12(ops::reshape(x, {x.dim(0), x.dim(1), h, d / h}));
}

Tensor SimtModel::merge_heads(const Tensor& x) const {
  Tensor swapped = ops::swap_axes12(x);
  return ops::reshape(swapped, {swapped.dim(0), swapped.dim(1), swapped.dim(2) * swapped.dim(3)});
}

Tensor SimtModel::attend(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask, Rng* rng) const {
  const double head_dim = static_cast<double>(config_.embed_dim / config_.num_heads);
  Tensor qh = ops::scale(split_heads(q), 1.0 / std::sqrt(head_dim));
  Tensor scores = ops::matmul(qh, split_heads(k), ops::Transpose::kYes);
  if (mask) scores = ops::add_mask(scores, *mask);
  Tensor weights = ops::softmax(scores, -1);
  if (rng) weights = ops::dropout(weights, config_.dropout, *rng);
  return merge_heads(ops::matmul(weights, split_heads(v)));
}

Tensor SimtModel::residual_dropout(const Tensor& x, Rng* rng) const {
  return rng ? ops::dropout(x, config_.dropout, *rng) : x;
}

Tensor SimtModel::feed_forward(const Tensor& x, const Linear& fc1, const Linear& fc2, Rng* rng) const {
  Tensor h = ops::relu(ops::add_bias(ops::matmul(x, fc1.weight), fc1.bias));
  h = residual_dropout(h, rng);
  return ops::add_bias(ops::matmul(h, fc2.weight), fc2.bias);
}

namespace {

Tensor apply(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return ops::add_bias(ops::matmul(x, weight), bias);
}

}  // namespace

Tensor SimtModel::run_decoder(std::span<const int> target_in, std::size_t batch, std::size_t steps,
                              const Tensor& memory, const Tensor& self_mask, const Tensor* cross_mask,
                              std::size_t adapter_index, Rng* rng, AdapterNormTrace* norms) const {
  Tensor x = residual_dropout(embed(tgt_embed_, target_in, batch, steps, 0), rng);
  for (const auto& layer : decoder_) {
    Tensor h = ops::layer_norm(x, layer.ln_self.gain, layer.ln_self.bias);
    const auto& sa = layer.self_attn;
    Tensor a = attend(apply(h, sa.q.weight, sa.q.bias), apply(h, sa.k.weight, sa.k.bias),
                      apply(h, sa.v.weight, sa.v.bias), &self_mask, rng);
    x = ops::add(x, residual_dropout(apply(a, sa.o.weight, sa.o.bias), rng));

    h = ops::layer_norm(x, layer.ln_cross.gain, layer.ln_cross.bias);
    const auto& ca = layer.cross_attn;
    a = attend(apply(h, ca.q.weight, ca.q.bias), apply(memory, ca.k.weight, ca.k.bias),
               apply(memory, ca.v.weight, ca.v.bias), cross_mask, rng);
    x = ops::add(x, residual_dropout(apply(a, ca.o.weight, ca.o.bias), rng));

    h = ops::layer_norm(x, layer.ln_ffn.gain, layer.ln_ffn.bias);
    x = ops::add(x, residual_dropout(feed_forward(h, layer.fc1, layer.fc2, rng), rng));

    if (!layer.adapters.empty()) {
      const Adapter& ad = layer.adapters.at(adapter_index);
      Tensor z = ops::layer_norm(x, ad.ln.gain, ad.ln.bias);
      z = ops::relu(apply(z, ad.down.weight, ad.down.bias));
      z = apply(z, ad.up.weight, ad.up.bias);
      if (norms) {
        const std::size_t d = z.dim(2);
        auto last = z.values().subspan(z.size() - d, d);
        double sq = 0.0;
        for (double v : last) sq += v * v;
        norms->record(layer.slot, std::sqrt(sq));
      }
      x = ops::add(x, z);
    }
  }
  return ops::layer_norm(x, decoder_final_.gain, decoder_final_.bias);
}

// ---- Streaming inference ------------------------------------------------------

EncoderState SimtModel::begin_encoding() const {
  EncoderState state;
  state.keys.resize(encoder_.size());
  state.values.resize(encoder_.size());
  return state;
}

void SimtModel::encode_append(EncoderState& state, int token) const {
  if (state.complete) throw PreconditionError("encode_append: source already ended");
  if (token < 0 || token >= config_.source_vocab) {
    throw InputError("source token id " + std::to_string(token) + " outside vocabulary of " +
                     std::to_string(config_.source_vocab));
  }
  NoGradGuard no_grad;
  const auto d = static_cast<std::size_t>(config_.embed_dim);
  const std::size_t rows = state.length + 1;
  const int ids[] = {token};
  Tensor x = embed(src_embed_, ids, 1, 1, state.length);
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    const auto& layer = encoder_[l];
    const auto& sa = layer.self_attn;
    Tensor h = ops::layer_norm(x, layer.ln_attn.gain, layer.ln_attn.bias);
    Tensor q = apply(h, sa.q.weight, sa.q.bias);
    Tensor k_new = apply(h, sa.k.weight, sa.k.bias);
    Tensor v_new = apply(h, sa.v.weight, sa.v.bias);
    state.keys[l].insert(state.keys[l].end(), k_new.values().begin(), k_new.values().end());
    state.values[l].insert(state.values[l].end(), v_new.values().begin(), v_new.values().end());
    Tensor keys = Tensor::from({1, rows, d}, state.keys[l]);
    Tensor values = Tensor::from({1, rows, d}, state.values[l]);
    Tensor a = attend(q, keys, values, nullptr, nullptr);
    x = ops::add(x, apply(a, sa.o.weight, sa.o.bias));
    h = ops::layer_norm(x, layer.ln_ffn.gain, layer.ln_ffn.bias);
    x = ops::add(x, feed_forward(h, layer.fc1, layer.fc2, nullptr));
  }
  Tensor z = ops::layer_norm(x, encoder_final_.gain, encoder_final_.bias);
  state.memory.insert(state.memory.end(), z.values().begin(), z.values().end());
  state.length = rows;
  if (token == Vocabulary::kEos) state.complete = true;
}

EncoderState SimtModel::encode(std::span<const int> source) const {
  EncoderState state = begin_encoding();
  for (int tok : source) encode_append(state, tok);
  encode_append(state, Vocabulary::kEos);
  return state;
}

std::vector<double> SimtModel::next_distribution(const EncoderState& state, std::span<const int> prefix,
                                                 std::span<const std::size_t> visible, int adapter_k,
                                                 AdapterNormTrace* norms) const {
  const std::size_t steps = prefix.size() + 1;
  if (visible.size() != steps) {
    throw PreconditionError("decode: " + std::to_string(visible.size()) + " visibility entries for " +
                            std::to_string(steps) + " decoder rows");
  }
  for (std::size_t i = 0; i < steps; ++i) {
    if (visible[i] < 1 || visible[i] > state.length || (i > 0 && visible[i] < visible[i - 1])) {
      throw PreconditionError("decode: row " + std::to_string(i) + " sees " + std::to_string(visible[i]) +
                              " positions with " + std::to_string(state.length) + " encoded");
    }
  }
  for (int tok : prefix) {
    if (tok < 0 || tok >= config_.target_vocab) throw InputError("target prefix id outside vocabulary");
  }
  NoGradGuard no_grad;
  const auto d = static_cast<std::size_t>(config_.embed_dim);
  const auto heads = static_cast<std::size_t>(config_.num_heads);
  const std::size_t cols = visible.back();
  std::vector<int> target_in;
  target_in.reserve(steps);
  target_in.push_back(Vocabulary::kBos);
  target_in.insert(target_in.end(), prefix.begin(), prefix.end());
  Tensor memory = Tensor::from(
      {1, cols, d},
      std::vector<double>(state.memory.begin(), state.memory.begin() + static_cast<std::ptrdiff_t>(cols * d)));
  std::vector<double> cross(heads * steps * cols, 0.0);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < steps; ++i)
      for (std::size_t j = visible[i]; j < cols; ++j) cross[(h * steps + i) * cols + j] = kNegInf;
  const Tensor cross_mask = Tensor::from({1, heads, steps, cols}, std::move(cross));
  const Tensor self_mask = causal_mask(heads, steps);
  const std::size_t adapter_index = config_.has_adapters() ? route(adapter_k) : 0;
  Tensor hidden = run_decoder(target_in, 1, steps, memory, self_mask, &cross_mask, adapter_index, nullptr, norms);
  Tensor last = ops::slice_axis1(hidden, steps - 1, steps);
  Tensor probs = ops::softmax(apply(last, output_.weight, output_.bias), -1);
  return {probs.values().begin(), probs.values().end()};
}

std::vector<double> SimtModel::decode_step(const EncoderState& state, std::span<const int> prefix, int k, int t,
                                           AdapterNormTrace* norms) const {
  if (k < 1) throw PreconditionError("decode_step: lagging must be >= 1");
  if (t != static_cast<int>(prefix.size()) + 1) {
    throw PreconditionError("decode_step: step " + std::to_string(t) + " with a prefix of " +
                            std::to_string(prefix.size()));
  }
  const long wanted = static_cast<long>(t) + k - 1;
  if (!state.complete && static_cast<long>(state.length) < wanted) {
    throw PreconditionError("decode_step: g_k(t) = " + std::to_string(wanted) + " source positions needed, " +
                            std::to_string(state.length) + " read");
  }
  std::vector<std::size_t> visible(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) {
    visible[static_cast<std::size_t>(i)] =
        static_cast<std::size_t>(std::min<long>(static_cast<long>(i) + k, static_cast<long>(state.length)));
  }
  return next_distribution(state, prefix, visible, k, norms);
}

// ---- Teacher forcing -------------------------------------------------------------

Tensor SimtModel::forward_logits(const Batch& batch, std::optional<int> lag, int adapter_k, Rng* dropout_rng) const {
  if (dropout_rng && config_.dropout == 0.0) dropout_rng = nullptr;
  const auto heads = static_cast<std::size_t>(config_.num_heads);
  Tensor x = residual_dropout(embed(src_embed_, batch.source, batch.size, batch.source_steps, 0), dropout_rng);
  const Tensor enc_mask = encoder_self_mask(batch, heads);
  for (const auto& layer : encoder_) {
    const auto& sa = layer.self_attn;
    Tensor h = ops::layer_norm(x, layer.ln_attn.gain, layer.ln_attn.bias);
    Tensor a = attend(apply(h, sa.q.weight, sa.q.bias), apply(h, sa.k.weight, sa.k.bias),
                      apply(h, sa.v.weight, sa.v.bias), &enc_mask, dropout_rng);
    x = ops::add(x, residual_dropout(apply(a, sa.o.weight, sa.o.bias), dropout_rng));
    h = ops::layer_norm(x, layer.ln_ffn.gain, layer.ln_ffn.bias);
    x = ops::add(x, residual_dropout(feed_forward(h, layer.fc1, layer.fc2, dropout_rng), dropout_rng));
  }
  Tensor memory = ops::layer_norm(x, encoder_final_.gain, encoder_final_.bias);

  const Tensor self_mask = decoder_self_mask(batch, heads);
  const Tensor cross_mask = cross_attention_mask(batch, heads, lag);
  const std::size_t adapter_index = config_.has_adapters() ? route(adapter_k) : 0;
  Tensor hidden = run_decoder(batch.target_in, batch.size, batch.target_steps, memory, self_mask, &cross_mask,
                              adapter_index, dropout_rng, nullptr);
  return apply(hidden, output_.weight, output_.bias);
}

Tensor SimtModel::forward_train(const Batch& batch, int k, double label_smoothing, Rng* dropout_rng) const {
  if (k < 1) throw UsageError("forward_train: lagging must be >= 1");
  Tensor logits = forward_logits(batch, k, k, dropout_rng);
  return ops::cross_entropy_label_smoothed(logits, batch.target_out, label_smoothing, Vocabulary::kPad);
}

}  // namespace simt
