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

#include "simt/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "simt/errors.hpp"
#include "simt/ops.hpp"
#include "simt/policy.hpp"

namespace simt {

void TrainConfig::validate() const {
  if (warmup_updates < 1) throw UsageError("train: warm-up updates must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw UsageError("train: label smoothing must lie in [0, 1)");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("train: dropout must lie in [0, 1)");
  if (learning_rate <= 0.0 || warmup_init_lr < 0.0) throw UsageError("train: learning rates must be positive");
  if (max_updates < 0) throw UsageError("train: max updates must be >= 0");
  if (checkpoint_every < 1) throw UsageError("train: checkpoint cadence must be >= 1");
  if (max_tokens < 2) throw UsageError("train: max tokens per batch must be >= 2");
  if (fixed_k.has_value() == multipath) throw UsageError("train: choose exactly one of fixed_k and multipath");
  if (fixed_k && *fixed_k < 1) throw UsageError("train: fixed_k must be >= 1");
}

double lr_at(int update, const TrainConfig& config) {
  if (update < 1) throw UsageError("lr_at: update must be >= 1");
  const double warmup = config.warmup_updates;
  if (update <= config.warmup_updates) {
    return config.warmup_init_lr + (config.learning_rate - config.warmup_init_lr) * update / warmup;
  }
  return config.learning_rate * std::sqrt(warmup / update);
}

// ---- TrainState ------------------------------------------------------------------

std::string TrainState::metadata_json() const {
  nlohmann::json j{{"update", update},
                   {"epoch", epoch},
                   {"epoch_seed", epoch_seed},
                   {"cursor", cursor},
                   {"rng_state", rng_state}};
  // JSON has no infinity; absent means "no validation yet".
  if (std::isfinite(best_valid_loss)) j["best_valid_loss"] = best_valid_loss;
  return nlohmann::json{{"train_state", j}}.dump();
}

TrainState TrainState::from_checkpoint(const Checkpoint& checkpoint) {
  TrainState s;
  try {
    const auto j = nlohmann::json::parse(checkpoint.metadata).at("train_state");
    s.update = j.at("update").get<int>();
    s.epoch = j.at("epoch").get<int>();
    s.epoch_seed = j.at("epoch_seed").get<std::uint64_t>();
    s.cursor = j.at("cursor").get<std::size_t>();
    s.rng_state = j.at("rng_state").get<std::string>();
    if (j.contains("best_valid_loss")) s.best_valid_loss = j.at("best_valid_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint carries no trainer state: ") + e.what());
  }
  std::map<std::string, const std::vector<double>*> extras;
  for (const auto& [name, values] : checkpoint.extras) extras[name] = &values;
  for (const auto& [name, values] : checkpoint.parameters) {
    auto m = extras.find("adam.m." + name);
    auto v = extras.find("adam.v." + name);
    if (m == extras.end() || v == extras.end()) throw InputError("checkpoint lacks optimizer moments for " + name);
    s.adam_m.push_back(*m->second);
    s.adam_v.push_back(*v->second);
  }
  return s;
}

Checkpoint training_checkpoint(const SimtModel& model, const TrainOutputs& outputs, const TrainState& state) {
  Checkpoint c = snapshot(model, outputs.source_vocab, outputs.target_vocab);
  c.metadata = state.metadata_json();
  std::size_t i = 0;
  for (const auto& [name, tensor] : model.parameters().items()) {
    c.extras.emplace_back("adam.m." + name, state.adam_m.at(i));
    ++i;
  }
  i = 0;
  for (const auto& [name, tensor] : model.parameters().items()) {
    c.extras.emplace_back("adam.v." + name, state.adam_v.at(i));
    ++i;
  }
  return c;
}

std::string format_train_log(const std::vector<TrainLogRow>& rows) {
  std::ostringstream out;
  out << "update\ttrain_loss\tvalid_loss\tlr\n";
  out << std::setprecision(10);
  for (const auto& r : rows) out << r.update << '\t' << r.train_loss << '\t' << r.valid_loss << '\t' << r.lr << '\n';
  return out.str();
}

// ---- Training loop ----------------------------------------------------------------

namespace {

void check_vocabulary(const SimtModel& model, std::span<const EncodedPair> pairs) {
  for (const auto& p : pairs) {
    for (int t : p.source) {
      if (t < 0 || t >= model.config().source_vocab) throw UsageError("train: source id outside model vocabulary");
    }
    for (int t : p.target) {
      if (t < 0 || t >= model.config().target_vocab) throw UsageError("train: target id outside model vocabulary");
    }
  }
}

void audit_adapter_gradients(const SimtModel& model, int k) {
  if (!model.config().has_adapters()) return;
  const std::string routed = ".adapter." + std::to_string(model.config().adapter_lagging[model.route(k)]) + ".";
  for (const auto& [name, tensor] : model.parameters().items()) {
    if (!is_adapter_parameter(name) || name.find(routed) != std::string::npos) continue;
    for (double g : tensor.grad()) {
      if (g != 0.0) throw Error("adapter " + name + " received gradient for k = " + std::to_string(k));
    }
  }
}

void adam_step(SimtModel& model, TrainState& state, const TrainConfig& config, double lr) {
  const double t = state.update;
  const double bias1 = 1.0 - std::pow(config.adam_beta1, t);
  const double bias2 = 1.0 - std::pow(config.adam_beta2, t);
  std::size_t i = 0;
  for (auto& [name, tensor] : model.parameters().items()) {
    auto& m = state.adam_m[i];
    auto& v = state.adam_v[i];
    ++i;
    if (!tensor.requires_grad()) continue;
    auto w = tensor.mutable_values();
    auto g = tensor.grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.adam_beta1 * m[j] + (1.0 - config.adam_beta1) * g[j];
      v[j] = config.adam_beta2 * v[j] + (1.0 - config.adam_beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      w[j] -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) + config.weight_decay * w[j]);
    }
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

double validation_loss(const SimtModel& model, std::span<const EncodedPair> pairs, const TrainConfig& config) {
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard no_grad;
  const BatchPlan plan = plan_batches(pairs, config.max_tokens, 0);
  std::vector<int> ks = config.fixed_k ? std::vector<int>{*config.fixed_k} : std::vector<int>{1, 3, 5, 7, 9};
  double total = 0.0;
  double weight = 0.0;
  for (const auto& indices : plan.batches) {
    const Batch batch = collate(pairs, indices);
    const auto tokens = static_cast<double>(batch.target_tokens());
    for (int k : ks) {
      total += model.forward_train(batch, k, config.label_smoothing).item() * tokens;
      weight += tokens;
    }
  }
  return weight > 0.0 ? total / weight : std::numeric_limits<double>::quiet_NaN();
}

TrainResult train(SimtModel& model, std::span<const EncodedPair> train_pairs, std::span<const EncodedPair> valid_pairs,
                  const TrainConfig& config, const TrainOutputs& outputs, std::optional<TrainState> resume) {
  config.validate();
  if (train_pairs.empty()) throw UsageError("train: empty training corpus");
  check_vocabulary(model, train_pairs);
  check_vocabulary(model, valid_pairs);
  model.set_dropout(config.dropout);

  TrainResult result;
  TrainState& state = result.state;
  Rng rng(config.seed);
  const std::size_t n_params = model.parameters().items().size();
  if (resume) {
    state = std::move(*resume);
    if (state.adam_m.size() != n_params || state.adam_v.size() != n_params) {
      throw InputError("train: resumed optimizer state does not match the model");
    }
    rng.set_state(state.rng_state);
  } else {
    for (const auto& [name, tensor] : model.parameters().items()) {
      state.adam_m.emplace_back(tensor.size(), 0.0);
      state.adam_v.emplace_back(tensor.size(), 0.0);
    }
    state.epoch_seed = rng.next_u64();
  }

  BatchPlan plan = plan_batches(train_pairs, config.max_tokens, state.epoch_seed);
  if (plan.batches.empty()) throw UsageError("train: every pair exceeds max_tokens");
  if (plan.skipped > 0) spdlog::warn("skipping {} pairs longer than {} tokens", plan.skipped, config.max_tokens);

  // A resumed run keeps the rows already logged up to its starting update.
  std::string earlier_rows;
  if (resume && !outputs.log.empty() && std::filesystem::exists(outputs.log)) {
    std::ifstream in(outputs.log);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (!line.empty() && std::stoi(line) <= state.update) earlier_rows += line + '\n';
    }
  }

  double loss_sum = 0.0;
  int loss_count = 0;
  while (state.update < config.max_updates) {
    if (state.cursor >= plan.batches.size()) {
      ++state.epoch;
      state.cursor = 0;
      state.epoch_seed = rng.next_u64();
      plan = plan_batches(train_pairs, config.max_tokens, state.epoch_seed);
    }
    const Batch batch = collate(train_pairs, plan.batches[state.cursor]);
    ++state.cursor;
    const int k = config.fixed_k ? *config.fixed_k : sample_train_k(rng, batch.max_source_length());

    model.parameters().zero_grad();
    Tensor loss = model.forward_train(batch, k, config.label_smoothing, &rng);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw DivergenceError("loss became " + std::to_string(value) + " at update " +
                            std::to_string(state.update + 1) + " (k = " + std::to_string(k) + ")");
    }
    backward(loss);
    ++state.update;
    if (config.isolation_check_every > 0 && state.update % config.isolation_check_every == 0) {
      audit_adapter_gradients(model, k);
    }
    const double lr = lr_at(state.update, config);
    adam_step(model, state, config, lr);
    loss_sum += value;
    ++loss_count;

    if (state.update % config.checkpoint_every == 0 || state.update == config.max_updates) {
      TrainLogRow row{state.update, loss_sum / loss_count, validation_loss(model, valid_pairs, config), lr};
      loss_sum = 0.0;
      loss_count = 0;
      result.log.push_back(row);
      spdlog::info("update {} train {:.4f} valid {:.4f} lr {:.3g}", row.update, row.train_loss, row.valid_loss,
                   row.lr);
      state.rng_state = rng.state();
      if (std::isfinite(row.valid_loss) && row.valid_loss < state.best_valid_loss) {
        state.best_valid_loss = row.valid_loss;
        if (!outputs.best.empty()) save_checkpoint(outputs.best, snapshot(model, outputs.source_vocab, outputs.target_vocab));
      }
      if (!outputs.checkpoint.empty()) save_checkpoint(outputs.checkpoint, training_checkpoint(model, outputs, state));
      if (!outputs.log.empty()) {
        std::string text = format_train_log(result.log);
        text.insert(text.find('\n') + 1, earlier_rows);
        write_file(outputs.log, text);
      }
    }
  }
  state.rng_state = rng.state();
  return result;
}

TrainResult train_frozen_adapters(SimtModel& model, std::span<const EncodedPair> train_pairs,
                                  std::span<const EncodedPair> valid_pairs, const TrainConfig& config,
                                  const TrainOutputs& outputs, std::optional<TrainState> resume) {
  if (!model.config().has_adapters()) throw UsageError("frozen-backbone training needs a model with adapters");
  model.set_backbone_frozen(true);
  return train(model, train_pairs, valid_pairs, config, outputs, std::move(resume));
}

}  // namespace simt
