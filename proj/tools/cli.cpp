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

#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "simt/checkpoint.hpp"
#include "simt/errors.hpp"
#include "simt/evaluation.hpp"
#include "simt/trainer.hpp"

namespace simt::cli {

namespace fs = std::filesystem;

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw UsageError("empty entry in list '" + text + "'");
    item = item.substr(b, e - b + 1);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw UsageError("'" + item + "' in list '" + text + "' is not an integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config) return rest;
  std::ifstream in(*config);
  if (!in) throw UsageError("cannot read config file " + *config);
  std::vector<std::string> injected;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(*config + ":" + std::to_string(line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t\r");
      const auto last = s.find_last_not_of(" \t\r");
      return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(*config + ":" + std::to_string(line_no) + ": missing key");
    injected.push_back("--" + key + "=" + value);
  }
  // After the subcommand name, ahead of explicit flags.
  std::size_t at = 1;
  while (at < rest.size() && rest[at].rfind("-", 0) == 0) ++at;
  if (at < rest.size()) ++at;
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(std::min(at, rest.size())), injected.begin(),
              injected.end());
  return rest;
}

namespace {

// ---- Shared option groups ---------------------------------------------------------

struct DataOptions {
  std::string task;
  std::string task_config;
  std::string corpus;
  int vocab = 16;
  int min_len = 6;
  int max_len = 12;
  int train = 5000;
  int valid = 200;
  int test = 200;
  std::uint64_t data_seed = 1;
  std::string split = "test";

  void add(CLI::App* app, bool with_split) {
    app->add_option("--task", task, "Synthetic task: copy, shift(N) or reverse");
    app->add_option("--task-config", task_config, "key=value task description file");
    app->add_option("--corpus", corpus, "Directory with train.tsv, valid.tsv and test.tsv");
    app->add_option("--vocab", vocab, "Synthetic vocabulary size")->capture_default_str();
    app->add_option("--min-len", min_len)->capture_default_str();
    app->add_option("--max-len", max_len)->capture_default_str();
    app->add_option("--train-size", train)->capture_default_str();
    app->add_option("--valid-size", valid)->capture_default_str();
    app->add_option("--test-size", test)->capture_default_str();
    app->add_option("--data-seed", data_seed, "Seed of the synthetic generator")->capture_default_str();
    if (with_split) {
      app->add_option("--split", split, "Evaluation split")
          ->check(CLI::IsMember({"train", "valid", "test"}))
          ->capture_default_str();
    }
  }

  TaskCorpora load() const {
    if (!corpus.empty()) {
      if (!task.empty() || !task_config.empty()) throw UsageError("give either --corpus or --task, not both");
      const fs::path dir(corpus);
      return {load_tsv(dir / "train.tsv", Split::kTrain), load_tsv(dir / "valid.tsv", Split::kValid),
              load_tsv(dir / "test.tsv", Split::kTest)};
    }
    return generate(spec());
  }

  TaskSpec spec() const {
    if (task.empty() && task_config.empty()) throw UsageError("no corpus or task given (use --task or --corpus)");
    TaskSpec s;
    if (!task_config.empty()) {
      std::ifstream in(task_config);
      if (!in) throw UsageError("cannot read task config " + task_config);
      std::stringstream text;
      text << in.rdbuf();
      s = TaskSpec::parse_config(text.str());
    }
    if (!task.empty()) {
      try {
        s.kind = TaskSpec::parse_kind(task, &s.shift);
      } catch (const InputError& e) {
        throw UsageError(e.what());
      }
    }
    if (task_config.empty()) {
      s.vocab_size = vocab;
      s.min_length = min_len;
      s.max_length = max_len;
      s.train_count = train;
      s.valid_count = valid;
      s.test_count = test;
      s.seed = data_seed;
    }
    try {
      s.validate();
    } catch (const InputError& e) {
      throw UsageError(e.what());
    }
    return s;
  }

  const ParallelCorpus& pick(const TaskCorpora& c) const {
    if (split == "train") return c.train;
    if (split == "valid") return c.valid;
    return c.test;
  }
};

struct EvalData {
  Checkpoint checkpoint;
  std::vector<EncodedPair> pairs;
};

EvalData load_eval(const std::string& checkpoint_path, const DataOptions& data) {
  if (checkpoint_path.empty()) throw UsageError("--checkpoint is required");
  EvalData e;
  const TaskCorpora corpora = data.load();
  e.checkpoint = load_checkpoint(checkpoint_path);
  e.pairs = encode_corpus(data.pick(corpora), e.checkpoint.source_vocab);
  if (e.pairs.empty()) throw UsageError("evaluation split is empty");
  return e;
}

std::vector<Threshold> parse_grid(const std::string& text) {
  if (text.empty()) return default_threshold_grid();
  std::vector<Threshold> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto slash = item.find('/');
    if (slash == std::string::npos) throw UsageError("grid entry '" + item + "' is not rho_min/rho_max");
    try {
      grid.push_back({std::stod(item.substr(0, slash)), std::stod(item.substr(slash + 1))});
    } catch (const std::exception&) {
      throw UsageError("grid entry '" + item + "' is not numeric");
    }
  }
  if (grid.empty()) throw UsageError("empty threshold grid");
  return grid;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

// ---- Commands --------------------------------------------------------------------------

struct GenerateCommand {
  DataOptions data;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("generate", "Write a synthetic task as train/valid/test TSV files");
    data.add(cmd, false);
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() {
    const TaskCorpora c = generate(data.spec());
    fs::create_directories(out);
    save_tsv(c.train, fs::path(out) / "train.tsv");
    save_tsv(c.valid, fs::path(out) / "valid.tsv");
    save_tsv(c.test, fs::path(out) / "test.tsv");
  }
};

struct TrainCommand {
  DataOptions data;
  std::string profile = "desk";
  std::uint64_t seed = 1;
  std::string adapter_lagging;
  std::optional<int> bottleneck;
  std::string adapter_layers;
  bool multipath = false;
  std::optional<int> fixed_k;
  std::string frozen_backbone;
  std::string out;
  bool resume = false;
  TrainConfig cfg;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("train", "Train a model; writes model.ckpt, best.ckpt and train_log.tsv");
    data.add(cmd, false);
    cmd->add_option("--profile", profile, "Model size")
        ->check(CLI::IsMember({"desk", "paper", "tiny"}))
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Initialisation and training seed")->capture_default_str();
    cmd->add_option("--adapter-lagging", adapter_lagging, "K_A, e.g. 1,3,5,7");
    cmd->add_option("--bottleneck", bottleneck, "Adapter bottleneck width");
    cmd->add_option("--adapter-layers", adapter_layers, "Decoder layers with adapters, e.g. 0,1, or 'none'");
    cmd->add_flag("--multipath", multipath, "Sample k per batch (default)");
    cmd->add_option("--fixed-k", fixed_k, "Train a plain wait-k model");
    cmd->add_option("--frozen-backbone", frozen_backbone, "Checkpoint whose backbone is kept fixed");
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_flag("--resume", resume, "Continue from <out>/model.ckpt");
    cmd->add_option("--max-updates", cfg.max_updates)->capture_default_str();
    cmd->add_option("--warmup", cfg.warmup_updates)->capture_default_str();
    cmd->add_option("--lr", cfg.learning_rate, "Peak learning rate")->capture_default_str();
    cmd->add_option("--max-tokens", cfg.max_tokens, "Padded tokens per batch")->capture_default_str();
    cmd->add_option("--dropout", cfg.dropout)->capture_default_str();
    cmd->add_option("--label-smoothing", cfg.label_smoothing)->capture_default_str();
    cmd->add_option("--weight-decay", cfg.weight_decay)->capture_default_str();
    cmd->add_option("--checkpoint-every", cfg.checkpoint_every, "Validation and checkpoint cadence")
        ->capture_default_str();
    cmd->callback([this] { run(); });
  }

  ModelConfig model_config(int vocab) const {
    ModelConfig m = profile == "paper" ? ModelConfig::paper(vocab, vocab)
                    : profile == "tiny" ? ModelConfig::tiny(vocab, vocab)
                                        : ModelConfig::desk(vocab, vocab);
    if (!adapter_lagging.empty()) m.adapter_lagging = parse_int_list(adapter_lagging);
    if (bottleneck) m.adapter_bottleneck = *bottleneck;
    if (adapter_layers == "none") {
      m.adapter_layers.clear();
    } else if (!adapter_layers.empty()) {
      m.adapter_layers = parse_int_list(adapter_layers);
    }
    m.dropout = cfg.dropout;
    m.validate();
    return m;
  }

  void run() {
    if (multipath && fixed_k) throw UsageError("--multipath and --fixed-k are mutually exclusive");
    TrainConfig c = cfg;
    c.seed = seed;
    c.fixed_k = fixed_k;
    c.multipath = !fixed_k;
    c.validate();

    TaskCorpora corpora = data.load();
    std::optional<Checkpoint> backbone;
    Vocabulary vocab;
    if (!frozen_backbone.empty()) {
      if (!fs::exists(frozen_backbone)) throw UsageError("backbone checkpoint " + frozen_backbone + " not found");
      backbone = load_checkpoint(frozen_backbone);
      vocab = backbone->source_vocab;
    } else {
      vocab = prepare_corpora(corpora).vocab;
    }
    const auto train_pairs = encode_corpus(corpora.train, vocab);
    const auto valid_pairs = encode_corpus(corpora.valid, vocab);

    fs::create_directories(out);
    TrainOutputs outputs{vocab, vocab, fs::path(out) / "model.ckpt", fs::path(out) / "best.ckpt",
                         fs::path(out) / "train_log.tsv"};

    std::optional<TrainState> state;
    std::optional<SimtModel> model;
    if (resume) {
      if (!fs::exists(outputs.checkpoint)) throw UsageError("--resume: no checkpoint at " + outputs.checkpoint.string());
      const Checkpoint ck = load_checkpoint(outputs.checkpoint);
      model.emplace(ck.make_model());
      state = TrainState::from_checkpoint(ck);
    } else {
      Rng init(seed);
      model.emplace(model_config(static_cast<int>(vocab.size())), init);
      if (backbone) {
        for (const auto& [name, tensor] : model->parameters().items()) {
          if (!is_adapter_parameter(name) && !backbone->parameter_map().count(name)) {
            throw UsageError("backbone checkpoint lacks " + name + " (different architecture?)");
          }
        }
        std::map<std::string, std::vector<double>> values;
        for (const auto& [name, v] : backbone->parameters) {
          if (!is_adapter_parameter(name)) values[name] = v;
        }
        model->load_values(values, false);
      }
    }
    spdlog::info("{} parameters, {} training pairs", model->parameters().scalar_count(), train_pairs.size());
    if (backbone || model->config().backbone_frozen) {
      train_frozen_adapters(*model, train_pairs, valid_pairs, c, outputs, state);
    } else {
      train(*model, train_pairs, valid_pairs, c, outputs, state);
    }
  }
};

struct PolicyOptions {
  std::string policy = "fixed";
  int k = 3;
  int k_min = 1;
  int k_max = 9;
  double rho_min = 1.0;
  double rho_max = 0.0;

  void add(CLI::App* app) {
    app->add_option("--policy", policy)->check(CLI::IsMember({"fixed", "adaptive"}))->capture_default_str();
    app->add_option("--k", k, "Lagging of the fixed policy")->capture_default_str();
    app->add_option("--k-min", k_min)->capture_default_str();
    app->add_option("--k-max", k_max)->capture_default_str();
    app->add_option("--rho-min", rho_min, "Threshold at k_min")->capture_default_str();
    app->add_option("--rho-max", rho_max, "Threshold at k_max")->capture_default_str();
  }
};

struct DecodeCommand {
  DataOptions data;
  PolicyOptions policy;
  std::string checkpoint;
  std::optional<std::size_t> max_len;
  std::string hyp_out;
  std::string trace_out;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("decode", "Decode a split with one policy; writes hypotheses and traces");
    data.add(cmd, true);
    policy.add(cmd);
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--max-output", max_len, "Output length guard (default 2|x|+10)");
    cmd->add_option("--hyp-out", hyp_out, "Detokenized hypotheses, one per line");
    cmd->add_option("--trace-out", trace_out, "R/W action traces, one per line");
    cmd->add_option("--out", out, "Metric row (TSV); default stdout");
    cmd->callback([this] { run(); });
  }

  void run() {
    const EvalData e = load_eval(checkpoint, data);
    const SimtModel model = e.checkpoint.make_model();
    const Vocabulary& vocab = e.checkpoint.target_vocab;
    EvalOptions options;
    options.max_output_length = max_len;
    CorpusDecode decoded;
    EvalRecord record;
    if (policy.policy == "fixed") {
      if (policy.k < 1) throw UsageError("--k must be >= 1");
      decoded = decode_fixed(model, e.pairs, vocab, policy.k, options);
      record = score_decode(decoded, e.pairs, vocab, options);
      record.policy = "fixed";
      record.setting = "k=" + std::to_string(policy.k);
    } else {
      const PolicyConfig pc{policy.k_min, policy.k_max, policy.rho_min, policy.rho_max};
      pc.validate();
      decoded = decode_adaptive(model, e.pairs, vocab, pc, options);
      record = score_decode(decoded, e.pairs, vocab, options);
      record.policy = "adaptive";
      record.setting = threshold_label({pc.rho_min, pc.rho_max});
    }
    if (!hyp_out.empty()) {
      std::string text;
      for (const auto& h : decoded.hypotheses) text += detokenize(h) + '\n';
      emit(text, hyp_out);
    }
    if (!trace_out.empty()) {
      std::string text;
      for (const auto& t : decoded.traces) text += t.to_string() + '\n';
      emit(text, trace_out);
    }
    emit(format_eval_tsv({record}), out);
  }
};

struct SweepCommand {
  DataOptions data;
  std::string checkpoint;
  std::string policy = "adaptive";
  std::string k_list = "1,3,5,7,9";
  int k_min = 1;
  int k_max = 9;
  std::string grid;
  bool smooth = false;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("sweep", "Latency/quality table over fixed k values or the threshold grid");
    data.add(cmd, true);
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--policy", policy)->check(CLI::IsMember({"fixed", "adaptive", "both"}))->capture_default_str();
    cmd->add_option("--k-list", k_list, "Fixed-policy lagging values")->capture_default_str();
    cmd->add_option("--k-min", k_min)->capture_default_str();
    cmd->add_option("--k-max", k_max)->capture_default_str();
    cmd->add_option("--grid", grid, "rho_min/rho_max pairs, e.g. 0.2/0,1/0.4 (default: 9-point grid)");
    cmd->add_flag("--smooth-bleu", smooth, "Add-one smoothing for n >= 2");
    cmd->add_option("--out", out, "TSV path; default stdout");
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto ks = parse_int_list(k_list);
    const auto thresholds = parse_grid(grid);
    PolicyConfig{k_min, k_max, 0.0, 0.0}.validate();
    const EvalData e = load_eval(checkpoint, data);
    const SimtModel model = e.checkpoint.make_model();
    EvalOptions options;
    options.bleu.add_one_smoothing = smooth;
    std::vector<EvalRecord> rows;
    if (policy != "adaptive") rows = sweep_fixed(model, e.pairs, e.checkpoint.target_vocab, ks, options);
    if (policy != "fixed") {
      auto adaptive = sweep_adaptive(model, e.pairs, e.checkpoint.target_vocab, k_min, k_max, thresholds, options);
      rows.insert(rows.end(), adaptive.begin(), adaptive.end());
    }
    sort_records(rows);
    emit(format_eval_tsv(rows), out);
  }
};

struct NormsCommand {
  DataOptions data;
  std::string checkpoint;
  int k_min = 1;
  int k_max = 9;
  std::string grid;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("instrument-norms", "Mean adapter output norm per layer and threshold setting");
    data.add(cmd, true);
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--k-min", k_min)->capture_default_str();
    cmd->add_option("--k-max", k_max)->capture_default_str();
    cmd->add_option("--grid", grid, "rho_min/rho_max pairs (default: 9-point grid)");
    cmd->add_option("--out", out, "TSV path; default stdout");
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto thresholds = parse_grid(grid);
    const EvalData e = load_eval(checkpoint, data);
    const SimtModel model = e.checkpoint.make_model();
    emit(format_norm_tsv(instrument_norms(model, e.pairs, e.checkpoint.target_vocab, k_min, k_max, thresholds)),
         out);
  }
};

struct TimeCommand {
  DataOptions data;
  std::string checkpoint;
  std::string baseline;
  std::string k_list = "1,3,5,7,9";
  int runs = 5;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("time", "Wall-clock of fixed wait-k decoding, averaged over runs");
    data.add(cmd, true);
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--baseline", baseline, "Optional model without adapters to compare against");
    cmd->add_option("--k-list", k_list)->capture_default_str();
    cmd->add_option("--runs", runs)->capture_default_str();
    cmd->add_option("--out", out, "TSV path; default stdout");
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto ks = parse_int_list(k_list);
    if (runs < 1) throw UsageError("--runs must be >= 1");
    if (runs < 2) spdlog::warn("fewer than two runs: no standard deviation");
    const EvalData e = load_eval(checkpoint, data);
    const SimtModel model = e.checkpoint.make_model();
    auto rows = time_fixed_decoding(model, "adapters", e.pairs, e.checkpoint.target_vocab, ks, runs);
    if (!baseline.empty()) {
      const Checkpoint b = load_checkpoint(baseline);
      const auto pairs = encode_corpus(data.pick(data.load()), b.source_vocab);
      auto more = time_fixed_decoding(b.make_model(), "baseline", pairs, b.target_vocab, ks, runs);
      rows.insert(rows.end(), more.begin(), more.end());
    }
    emit(format_timing_tsv(rows), out);
  }
};

struct MetricsCommand {
  DataOptions data;
  std::string traces;
  std::string hyps;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("metrics", "Recompute latency (and quality) from saved traces");
    data.add(cmd, true);
    cmd->add_option("--traces", traces, "R/W trace file, one line per sentence")->required();
    cmd->add_option("--hyp", hyps, "Hypothesis file aligned with the split, for BLEU and accuracy");
    cmd->add_option("--out", out, "TSV path; default stdout");
    cmd->callback([this] { run(); });
  }

  static std::vector<std::string> lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::vector<std::string> all;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      all.push_back(line);
    }
    return all;
  }

  void run() {
    const TaskCorpora corpora = data.load();
    const ParallelCorpus& split = data.pick(corpora);
    std::vector<ActionTrace> parsed;
    std::size_t n = 0;
    for (const auto& line : lines(traces)) {
      ++n;
      try {
        parsed.push_back(ActionTrace::from_string(line));
      } catch (const ParseError& e) {
        throw ParseError(n, e.what());
      }
    }
    std::vector<int> lengths;
    for (const auto& p : split.pairs) lengths.push_back(static_cast<int>(p.source.size()));
    const LatencyReport l = trace_latency(parsed, lengths);
    std::ostringstream text;
    text << std::fixed << std::setprecision(6);
    text << "sentences\tAL\tCW\tAP\tDAL";
    if (!hyps.empty()) text << "\tBLEU\tacc";
    text << '\n' << parsed.size() << '\t' << l.al << '\t' << l.cw << '\t' << l.ap << '\t' << l.dal;
    if (!hyps.empty()) {
      std::vector<TokenList> h;
      std::vector<TokenList> r;
      for (const auto& line : lines(hyps)) h.push_back(tokenize(line));
      for (const auto& p : split.pairs) r.push_back(p.target);
      if (h.size() != r.size()) throw InputError("hypothesis count differs from the split");
      text << '\t' << std::setprecision(4) << corpus_bleu(h, r) << '\t' << std::setprecision(6)
           << token_accuracy(h, r);
    }
    text << '\n';
    emit(text.str(), out);
  }
};

}  // namespace

int run(const std::vector<std::string>& raw_args) {
  CLI::App app{"Simultaneous translation with wait-k adapters"};
  app.name(raw_args.empty() ? "simt" : fs::path(raw_args.front()).filename().string());
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer("Any subcommand accepts --config FILE with key = value lines (keys are long flag names).");

  GenerateCommand generate_cmd;
  TrainCommand train_cmd;
  DecodeCommand decode_cmd;
  SweepCommand sweep_cmd;
  NormsCommand norms_cmd;
  TimeCommand time_cmd;
  MetricsCommand metrics_cmd;
  generate_cmd.attach(app);
  train_cmd.attach(app);
  decode_cmd.attach(app);
  sweep_cmd.attach(app);
  norms_cmd.attach(app);
  time_cmd.attach(app);
  metrics_cmd.attach(app);

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return 0;
    }
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace simt::cli
