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

#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>

#include "../support/fixtures.hpp"
#include "gradcheck.hpp"
#include "simt/checkpoint.hpp"
#include "simt/errors.hpp"
#include "simt/model.hpp"
#include "simt/ops.hpp"

using namespace simt;
using simt::testing::batch_of;
using simt::testing::random_pairs;

namespace {

constexpr int kVocab = 12;

SimtModel tiny_model(std::uint64_t seed = 3) {
  Rng rng(seed);
  return SimtModel(ModelConfig::tiny(kVocab, kVocab), rng);
}

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("route picks the largest lagging not above k") {
  const std::vector<int> paper{1, 3, 5, 7, 9, 11, 13, 15};
  CHECK(paper[route(3, paper)] == 3);
  CHECK(paper[route(20, paper)] == 15);
  CHECK(paper[route(4, paper)] == 3);
  const std::vector<int> sparse{1, 5, 9, 13};
  CHECK(sparse[route(4, sparse)] == 1);
  CHECK(sparse[route(1, sparse)] == 1);
  CHECK_THROWS_AS(route(0, sparse), RoutingError);
}

TEST_CASE("routing partitions lagging values at the boundaries") {
  const std::vector<int> lags{1, 3, 5, 7};
  for (std::size_t i = 0; i < lags.size(); ++i) {
    CHECK(route(lags[i], lags) == i);
    if (lags[i] > 1) CHECK(route(lags[i] - 1, lags) == i - 1);
  }
}

TEST_CASE("config validation") {
  auto c = ModelConfig::desk(16, 16);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.num_heads = 3;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.adapter_lagging = {2, 3};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.adapter_lagging = {1, 3, 3};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.adapter_layers = {2};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK(ModelConfig::from_json(c.to_json()) == c);
  CHECK(ModelConfig::paper(16, 16).adapter_lagging.size() == 8);
}

TEST_CASE("parameter naming and adapter bank layout") {
  auto model = tiny_model();
  const auto& p = model.parameters();
  CHECK(p.contains("decoder.1.adapter.7.up.weight"));
  CHECK(p.contains("encoder.final_ln.gain"));
  CHECK(all_zero(p.get("decoder.0.adapter.3.up.weight").values()));
  CHECK_FALSE(all_zero(p.get("decoder.0.adapter.3.down.weight").values()));
  CHECK(is_adapter_parameter("decoder.0.adapter.1.ln.gain"));
  CHECK_FALSE(is_adapter_parameter("decoder.0.fc1.weight"));

  auto cfg = ModelConfig::tiny(kVocab, kVocab);
  cfg.adapter_layers = {1};
  Rng rng(1);
  SimtModel last_only(cfg, rng);
  CHECK_FALSE(last_only.parameters().contains("decoder.0.adapter.1.up.weight"));
  CHECK(last_only.parameters().contains("decoder.1.adapter.1.up.weight"));
}

TEST_CASE("encoder states never depend on later tokens") {
  auto model = tiny_model();
  Rng rng(5);
  simt::testing::jitter_parameters(model, rng);
  const std::vector<int> source{4, 5, 6, 7, 8, 9, 10};
  const auto base = model.encode(source);
  const std::size_t d = static_cast<std::size_t>(model.config().embed_dim);
  for (std::size_t j = 1; j < source.size(); ++j) {
    auto changed = source;
    changed[j] = changed[j] == 11 ? 4 : 11;
    const auto other = model.encode(changed);
    std::span<const double> a(base.memory.data(), j * d), b(other.memory.data(), j * d);
    CHECK(bit_equal(a, b));
    CHECK_FALSE(bit_equal(std::span<const double>(base.memory.data() + j * d, d),
                          std::span<const double>(other.memory.data() + j * d, d)));
  }
}

TEST_CASE("incremental decoding matches masked full recomputation bit for bit") {
  auto model = tiny_model();
  Rng rng(11);
  simt::testing::jitter_parameters(model, rng);
  simt::testing::randomize_adapters(model, rng);
  const auto pairs = random_pairs(6, kVocab, 3, 9, rng);
  for (int k : {1, 2, 3, 5, 7, simt::testing::kUnbounded}) {
    for (const auto& pair : pairs) {
      const auto check = simt::testing::streaming_vs_full(model, pair, k);
      CHECK(check.steps > 0);
      CHECK(check.mismatches == 0);
    }
  }
}

TEST_CASE("decode_step refuses to run ahead of the source") {
  auto model = tiny_model();
  auto state = model.begin_encoding();
  model.encode_append(state, 4);
  model.encode_append(state, 5);
  std::vector<int> prefix;
  CHECK_NOTHROW(model.decode_step(state, prefix, 2, 1));
  CHECK_THROWS_AS(model.decode_step(state, prefix, 3, 1), PreconditionError);
  CHECK_THROWS_AS(model.decode_step(state, prefix, 2, 2), PreconditionError);
  model.encode_append(state, Vocabulary::kEos);
  CHECK(state.complete);
  CHECK_NOTHROW(model.decode_step(state, prefix, 9, 1));
  CHECK_THROWS_AS(model.encode_append(state, 4), PreconditionError);
  CHECK_THROWS_AS(model.encode_append(model.begin_encoding() = model.begin_encoding(), kVocab), InputError);
}

TEST_CASE("fresh adapters leave the backbone function unchanged") {
  auto with = tiny_model(9);
  Rng rng(2);
  simt::testing::jitter_parameters(with, rng);
  for (auto& [name, t] : with.parameters().items()) {
    if (name.find(".up.") != std::string::npos) std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
  }
  auto cfg = with.config();
  cfg.adapter_layers.clear();
  Rng rng2(0);
  SimtModel without(cfg, rng2);
  std::map<std::string, std::vector<double>> values;
  for (const auto& [name, t] : with.parameters().items()) values[name] = {t.values().begin(), t.values().end()};
  without.load_values(values, false);

  const std::vector<int> source{4, 8, 6, 5};
  const auto sa = with.encode(source);
  const auto sb = without.encode(source);
  const std::vector<int> prefix{7, 9};
  const std::vector<std::size_t> visible{2, 4, 5};
  for (int k : {1, 3, 8}) {
    CHECK(bit_equal(with.next_distribution(sa, prefix, visible, k), without.next_distribution(sb, prefix, visible, k)));
  }
}

TEST_CASE("only the routed adapter receives gradient") {
  auto model = tiny_model();
  Rng rng(4);
  simt::testing::randomize_adapters(model, rng);
  const auto pairs = random_pairs(3, kVocab, 3, 8, rng);
  const Batch batch = batch_of(pairs);
  for (int k : {1, 2, 3, 4, 6, 9}) {
    auto& params = model.parameters();
    params.zero_grad();
    backward(model.forward_train(batch, k, 0.1));
    const std::string routed = ".adapter." + std::to_string(model.config().adapter_lagging[model.route(k)]) + ".";
    for (const auto& [name, t] : params.items()) {
      if (!is_adapter_parameter(name)) continue;
      if (name.find(routed) == std::string::npos) {
        CHECK_MESSAGE(all_zero(t.grad()), name);
      } else if (name.find(".up.weight") != std::string::npos) {
        CHECK_FALSE(all_zero(t.grad()));
      }
    }
  }
}

TEST_CASE("frozen backbone yields adapter-only gradients") {
  auto model = tiny_model();
  Rng rng(4);
  simt::testing::randomize_adapters(model, rng);
  model.set_backbone_frozen(true);
  const Batch batch = batch_of(random_pairs(2, kVocab, 3, 6, rng));
  model.parameters().zero_grad();
  backward(model.forward_train(batch, 3, 0.1));
  bool adapter_moved = false;
  for (const auto& [name, t] : model.parameters().items()) {
    if (is_adapter_parameter(name)) {
      adapter_moved = adapter_moved || !all_zero(t.grad());
    } else {
      CHECK_MESSAGE(all_zero(t.grad()), name);
    }
  }
  CHECK(adapter_moved);
  model.set_backbone_frozen(false);
  CHECK(model.parameters().get("output.weight").requires_grad());
}

TEST_CASE("gradients agree with central differences on a tiny model") {
  auto cfg = ModelConfig::tiny(8, 8);
  Rng rng(21);
  SimtModel model(cfg, rng);
  simt::testing::jitter_parameters(model, rng);
  simt::testing::randomize_adapters(model, rng);
  const Batch batch = batch_of(random_pairs(2, 8, 2, 4, rng));
  std::vector<Tensor> params;
  for (auto& [name, t] : model.parameters().items()) params.push_back(t);
  const auto result =
      simt::testing::grad_check([&] { return model.forward_train(batch, 2, 0.1); }, params);
  CHECK(result.checked == model.parameters().scalar_count());
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("adapter norms follow the up-projection") {
  auto model = tiny_model();
  const std::vector<int> source{4, 5, 6};
  const auto state = model.encode(source);
  const std::vector<int> prefix{7};
  const std::vector<std::size_t> visible{3, 4};
  AdapterNormTrace zero(2);
  zero.begin_sentence();
  model.next_distribution(state, prefix, visible, 3, &zero);
  for (double v : zero.layer_means()) CHECK(v == 0.0);

  Rng rng(8);
  simt::testing::randomize_adapters(model, rng);
  AdapterNormTrace once(2), twice(2);
  once.begin_sentence();
  model.next_distribution(state, prefix, visible, 1, &once);
  for (auto& [name, t] : model.parameters().items()) {
    if (name.find("adapter.1.up") != std::string::npos) {
      for (auto& v : t.mutable_values()) v *= 2.0;
    }
  }
  twice.begin_sentence();
  model.next_distribution(state, prefix, visible, 1, &twice);
  const auto a = once.layer_means();
  const auto b = twice.layer_means();
  CHECK(a[0] > 0.0);
  CHECK(b[0] == 2.0 * a[0]);
  CHECK_THROWS_AS(AdapterNormTrace(2).layer_means(), UsageError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto model = tiny_model();
  Rng rng(6);
  simt::testing::jitter_parameters(model, rng);
  const auto vocab = Vocabulary::from_tokens({"a", "b", "c", "d", "e", "f", "g", "h"});
  auto ck = snapshot(model, vocab, vocab);
  ck.extras.emplace_back("adam.m", std::vector<double>{1.5, -0.0, 1e-300});
  ck.metadata = R"({"update":7})";
  const auto path = std::filesystem::temp_directory_path() / "simt_test_model.ckpt";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(back.config == ck.config);
  CHECK(back.source_vocab.tokens() == vocab.tokens());
  CHECK(back.metadata == ck.metadata);
  REQUIRE(back.parameters.size() == ck.parameters.size());
  for (std::size_t i = 0; i < ck.parameters.size(); ++i) {
    CHECK(back.parameters[i].first == ck.parameters[i].first);
    CHECK(bit_equal(back.parameters[i].second, ck.parameters[i].second));
  }
  CHECK(bit_equal(back.extras.at(0).second, ck.extras.at(0).second));
  const auto rebuilt = back.make_model();
  CHECK(parameter_hash(rebuilt, false) == parameter_hash(model, false));
  CHECK(parameter_hash(rebuilt, true) == parameter_hash(model, true));
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ck));

  auto bytes = serialize_checkpoint(ck);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), InputError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bytes), InputError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/simt.ckpt"), InputError);
  std::filesystem::remove(path);
}
