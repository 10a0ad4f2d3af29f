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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "simt/checkpoint.hpp"
#include "simt/errors.hpp"
#include "simt/trainer.hpp"

using namespace simt;

namespace {

constexpr int kVocab = 10;

struct Setup {
  std::vector<EncodedPair> train;
  std::vector<EncodedPair> valid;
  Vocabulary vocab;
};

Setup small_data() {
  Rng rng(4);
  Setup s;
  s.train = simt::testing::random_pairs(40, kVocab, 2, 6, rng);
  s.valid = simt::testing::random_pairs(8, kVocab, 2, 6, rng);
  s.vocab = Vocabulary::from_tokens({"a", "b", "c", "d", "e", "f"});
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.max_updates = 12;
  c.warmup_updates = 4;
  c.learning_rate = 1e-3;
  c.checkpoint_every = 4;
  c.max_tokens = 40;
  c.dropout = 0.1;
  c.isolation_check_every = 1;
  return c;
}

SimtModel small_model(std::uint64_t seed = 2) {
  Rng rng(seed);
  return SimtModel(ModelConfig::tiny(kVocab, kVocab), rng);
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("simt_trainer_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.warmup_updates = 400;
  c.learning_rate = 5e-4;
  CHECK(lr_at(400, c) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(lr_at(1600, c) == doctest::Approx(2.5e-4).epsilon(1e-12));
  CHECK(lr_at(1, c) == doctest::Approx(1e-7 + (5e-4 - 1e-7) / 400).epsilon(1e-12));
  CHECK(lr_at(1, c) < 2e-6);
  for (int u = 2; u <= 400; ++u) CHECK(lr_at(u, c) > lr_at(u - 1, c));
  for (int u = 401; u <= 2000; ++u) CHECK(lr_at(u, c) < lr_at(u - 1, c));
  CHECK_THROWS_AS(lr_at(0, c), UsageError);
}

TEST_CASE("train config invariants") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.fixed_k = 3;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.multipath = false;
  CHECK_NOTHROW(c.validate());
  c = TrainConfig{};
  c.multipath = false;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.warmup_updates = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.label_smoothing = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("training is deterministic per seed and lowers the loss") {
  const auto data = small_data();
  auto a = small_model();
  auto b = small_model();
  auto cfg = small_config();
  cfg.max_updates = 40;
  cfg.checkpoint_every = 10;
  const auto ra = train(a, data.train, data.valid, cfg);
  const auto rb = train(b, data.train, data.valid, cfg);
  CHECK(parameter_hash(a, false) == parameter_hash(b, false));
  CHECK(parameter_hash(a, true) == parameter_hash(b, true));
  CHECK(format_train_log(ra.log) == format_train_log(rb.log));
  REQUIRE(ra.log.size() == 4);
  CHECK(ra.log.back().valid_loss < ra.log.front().valid_loss);
  CHECK(ra.state.update == 40);

  auto c = small_model();
  cfg.seed = 99;
  train(c, data.train, data.valid, cfg);
  CHECK(parameter_hash(c, false) != parameter_hash(a, false));
}

TEST_CASE("resuming from a checkpoint continues bit-identically") {
  const auto data = small_data();
  auto cfg = small_config();
  cfg.max_updates = 12;
  auto whole = small_model();
  const auto full = train(whole, data.train, data.valid, cfg);

  const auto ckpt = temp("resume.ckpt");
  const auto log = temp("resume.tsv");
  TrainOutputs out{data.vocab, data.vocab, ckpt, {}, log};
  auto first = small_model();
  auto cfg_half = cfg;
  cfg_half.max_updates = 8;
  train(first, data.train, data.valid, cfg_half, out);

  const auto loaded = load_checkpoint(ckpt);
  auto resumed = loaded.make_model();
  auto state = TrainState::from_checkpoint(loaded);
  CHECK(state.update == 8);
  const auto rest = train(resumed, data.train, data.valid, cfg, out, state);
  CHECK(parameter_hash(resumed, false) == parameter_hash(whole, false));
  CHECK(parameter_hash(resumed, true) == parameter_hash(whole, true));
  CHECK(rest.log.back().valid_loss == full.log.back().valid_loss);
  CHECK(slurp(log) == format_train_log(full.log));
  std::filesystem::remove(ckpt);
  std::filesystem::remove(log);
}

TEST_CASE("frozen backbone training only moves adapters") {
  const auto data = small_data();
  auto model = small_model();
  const auto backbone = parameter_hash(model, false);
  const auto adapters = parameter_hash(model, true);
  train_frozen_adapters(model, data.train, data.valid, small_config());
  CHECK(parameter_hash(model, false) == backbone);
  CHECK(parameter_hash(model, true) != adapters);

  auto cfg = ModelConfig::tiny(kVocab, kVocab);
  cfg.adapter_layers.clear();
  Rng rng(1);
  SimtModel plain(cfg, rng);
  CHECK_THROWS_AS(train_frozen_adapters(plain, data.train, data.valid, small_config()), UsageError);
}

TEST_CASE("fixed-k training and validation") {
  const auto data = small_data();
  auto model = small_model();
  auto cfg = small_config();
  cfg.multipath = false;
  cfg.fixed_k = 2;
  const auto r = train(model, data.train, data.valid, cfg);
  CHECK(std::isfinite(r.log.back().valid_loss));
  CHECK(validation_loss(model, data.valid, cfg) == r.log.back().valid_loss);
}

TEST_CASE("divergence aborts with a diagnostic") {
  const auto data = small_data();
  auto model = small_model();
  auto cfg = small_config();
  cfg.learning_rate = 1e300;
  cfg.warmup_init_lr = 1e300;
  cfg.max_updates = 50;
  CHECK_THROWS_AS(train(model, data.train, data.valid, cfg), DivergenceError);
}

TEST_CASE("training rejects ids outside the model vocabulary") {
  auto data = small_data();
  data.train[0].source[0] = kVocab + 3;
  auto model = small_model();
  CHECK_THROWS_AS(train(model, data.train, data.valid, small_config()), UsageError);
}
