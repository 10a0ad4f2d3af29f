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

#include "simt/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "simt/errors.hpp"

namespace simt {

namespace {

using Clock = std::chrono::steady_clock;

std::string number(double v, int precision) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

std::string compact(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

std::vector<TokenList> references(std::span<const EncodedPair> pairs, const Vocabulary& vocab) {
  std::vector<TokenList> refs;
  refs.reserve(pairs.size());
  for (const auto& p : pairs) refs.push_back(vocab.decode(p.target));
  return refs;
}

template <typename DecodeOne>
CorpusDecode decode_all(std::span<const EncodedPair> pairs, const Vocabulary& vocab, DecodeOne&& decode_one) {
  CorpusDecode out;
  const auto start = Clock::now();
  for (const auto& p : pairs) {
    DecodeResult r = decode_one(p);
    out.hypotheses.push_back(vocab.decode(r.tokens));
    out.traces.push_back(std::move(r.trace));
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace

// ---- Data --------------------------------------------------------------------------

TaskData prepare_corpora(TaskCorpora corpora) {
  TaskData data;
  std::vector<TokenList> sentences;
  for (const auto& p : corpora.train.pairs) {
    sentences.push_back(p.source);
    sentences.push_back(p.target);
  }
  data.vocab = Vocabulary::build(sentences, 1);
  data.train = encode_corpus(corpora.train, data.vocab);
  data.valid = encode_corpus(corpora.valid, data.vocab);
  data.test = encode_corpus(corpora.test, data.vocab);
  data.corpora = std::move(corpora);
  return data;
}

TaskData prepare_task(const TaskSpec& spec) { return prepare_corpora(generate(spec)); }

std::vector<Threshold> default_threshold_grid() {
  return {{0.2, 0.0}, {0.4, 0.0}, {0.6, 0.0}, {0.8, 0.0}, {1.0, 0.0},
          {1.0, 0.2}, {1.0, 0.4}, {1.0, 0.6}, {1.0, 0.8}};
}

std::string threshold_label(const Threshold& t) { return "rho=" + compact(t.rho_min) + "/" + compact(t.rho_max); }

// ---- Scoring -----------------------------------------------------------------------

EvalRecord score_decode(const CorpusDecode& decoded, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                        const EvalOptions& options) {
  if (decoded.hypotheses.size() != pairs.size()) throw UsageError("score: hypothesis count differs from corpus");
  const auto refs = references(pairs, vocab);
  EvalRecord r;
  r.bleu = corpus_bleu(decoded.hypotheses, refs, options.bleu);
  r.accuracy = token_accuracy(decoded.hypotheses, refs);
  std::vector<LatencyReport> reports;
  double al_reference = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& trace = decoded.traces[i];
    if (trace.writes() == 0) continue;
    const DelaySchedule schedule{static_cast<int>(pairs[i].source.size()), trace.delays()};
    reports.push_back(latency_metrics_lenient(schedule));
    al_reference += average_lagging_reference(schedule, static_cast<int>(refs[i].size()));
  }
  if (reports.empty()) {
    spdlog::warn("no sentence produced output; latency reported as 0");
  } else {
    r.latency = mean_latency(reports);
    r.al_reference = al_reference / static_cast<double>(reports.size());
  }
  r.seconds = decoded.seconds;
  return r;
}

CorpusDecode decode_fixed(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab, int k,
                          const EvalOptions& options) {
  return decode_all(pairs, vocab, [&](const EncodedPair& p) {
    return fixed_waitk_decode(model, p.source, k, options.max_output_length);
  });
}

CorpusDecode decode_adaptive(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                             const PolicyConfig& config, const EvalOptions& options, AdapterNormTrace* norms) {
  return decode_all(pairs, vocab, [&](const EncodedPair& p) {
    return adaptive_decode(model, p.source, config, options.max_output_length, norms);
  });
}

EvalRecord evaluate_fixed(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab, int k,
                          const EvalOptions& options) {
  EvalRecord r = score_decode(decode_fixed(model, pairs, vocab, k, options), pairs, vocab, options);
  r.policy = "fixed";
  r.setting = "k=" + std::to_string(k);
  return r;
}

EvalRecord evaluate_adaptive(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                             const PolicyConfig& config, const EvalOptions& options) {
  EvalRecord r = score_decode(decode_adaptive(model, pairs, vocab, config, options), pairs, vocab, options);
  r.policy = "adaptive";
  r.setting = threshold_label({config.rho_min, config.rho_max});
  return r;
}

namespace {

void warn_coverage(const SimtModel& model, int k) {
  if (model.config().has_adapters() && k > model.config().adapter_lagging.back()) {
    spdlog::warn("k = {} exceeds the largest adapter lagging {}; routing clamps to it", k,
                 model.config().adapter_lagging.back());
  }
}

}  // namespace

std::vector<EvalRecord> sweep_fixed(const SimtModel& model, std::span<const EncodedPair> pairs,
                                    const Vocabulary& vocab, std::span<const int> ks, const EvalOptions& options) {
  std::vector<EvalRecord> out;
  for (int k : ks) {
    if (k < 1) throw UsageError("sweep: k must be >= 1");
    warn_coverage(model, k);
    out.push_back(evaluate_fixed(model, pairs, vocab, k, options));
  }
  sort_records(out);
  return out;
}

std::vector<EvalRecord> sweep_adaptive(const SimtModel& model, std::span<const EncodedPair> pairs,
                                       const Vocabulary& vocab, int k_min, int k_max,
                                       std::span<const Threshold> grid, const EvalOptions& options) {
  PolicyConfig base{k_min, k_max, 0.0, 0.0};
  base.validate();
  warn_coverage(model, k_max);
  std::vector<EvalRecord> out;
  for (const auto& t : grid) {
    PolicyConfig c = base;
    c.rho_min = t.rho_min;
    c.rho_max = t.rho_max;
    out.push_back(evaluate_adaptive(model, pairs, vocab, c, options));
  }
  sort_records(out);
  return out;
}

void sort_records(std::vector<EvalRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.latency.al != b.latency.al) return a.latency.al < b.latency.al;
    if (a.policy != b.policy) return a.policy < b.policy;
    return a.setting < b.setting;
  });
}

std::string format_eval_tsv(const std::vector<EvalRecord>& records, bool include_seconds) {
  std::ostringstream out;
  out << "policy\tsetting\tBLEU\tacc\tAL\tCW\tAP\tDAL";
  if (include_seconds) out << "\tseconds";
  out << '\n';
  for (const auto& r : records) {
    out << r.policy << '\t' << r.setting << '\t' << number(r.bleu, 4) << '\t' << number(r.accuracy, 6) << '\t'
        << number(r.latency.al, 6) << '\t' << number(r.latency.cw, 6) << '\t' << number(r.latency.ap, 6) << '\t'
        << number(r.latency.dal, 6);
    if (include_seconds) out << '\t' << number(r.seconds, 4);
    out << '\n';
  }
  return out.str();
}

// ---- Instrumentation -------------------------------------------------------------------

NormMatrix instrument_norms(const SimtModel& model, std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                            int k_min, int k_max, std::span<const Threshold> grid, const EvalOptions& options) {
  if (!model.config().has_adapters()) throw UsageError("instrument-norms: the model has no adapters");
  if (pairs.empty()) throw UsageError("instrument-norms: empty corpus");
  const std::size_t layers = model.config().adapter_layers.size();
  NormMatrix m;
  m.rows.assign(layers, {});
  for (const auto& t : grid) {
    AdapterNormTrace trace(layers);
    decode_adaptive(model, pairs, vocab, PolicyConfig{k_min, k_max, t.rho_min, t.rho_max}, options, &trace);
    const auto means = trace.layer_means();
    for (std::size_t l = 0; l < layers; ++l) m.rows[l].push_back(means[l]);
    m.settings.push_back(threshold_label(t));
  }
  return m;
}

std::string format_norm_tsv(const NormMatrix& matrix) {
  std::ostringstream out;
  out << "layer";
  for (const auto& s : matrix.settings) out << '\t' << s;
  out << '\n';
  for (std::size_t l = 0; l < matrix.rows.size(); ++l) {
    out << l;
    for (double v : matrix.rows[l]) out << '\t' << number(v, 6);
    out << '\n';
  }
  return out.str();
}

// ---- Timing ---------------------------------------------------------------------------

std::vector<TimingRow> time_fixed_decoding(const SimtModel& model, const std::string& label,
                                           std::span<const EncodedPair> pairs, const Vocabulary& vocab,
                                           std::span<const int> ks, int runs) {
  if (runs < 1) throw UsageError("time: runs must be >= 1");
  std::vector<TimingRow> rows;
  for (int k : ks) {
    TimingRow row;
    row.model = label;
    row.k = k;
    row.runs = runs;
    std::vector<double> seconds;
    std::optional<std::vector<TokenList>> first;
    for (int r = 0; r < runs; ++r) {
      auto decoded = decode_fixed(model, pairs, vocab, k);
      seconds.push_back(decoded.seconds);
      if (!first) {
        first = std::move(decoded.hypotheses);
      } else if (*first != decoded.hypotheses) {
        row.outputs_identical = false;
      }
    }
    double mean = 0.0;
    for (double s : seconds) mean += s;
    mean /= runs;
    row.mean_seconds = mean;
    if (runs >= 2) {
      double var = 0.0;
      for (double s : seconds) var += (s - mean) * (s - mean);
      row.stddev_seconds = std::sqrt(var / (runs - 1));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_timing_tsv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "model\tk\truns\tmean_seconds\tstddev_seconds\toutputs_identical\n";
  for (const auto& r : rows) {
    out << r.model << '\t' << r.k << '\t' << r.runs << '\t' << number(r.mean_seconds, 6) << '\t'
        << (r.stddev_seconds ? number(*r.stddev_seconds, 6) : std::string("-")) << '\t'
        << (r.outputs_identical ? "yes" : "no") << '\n';
  }
  return out.str();
}

LatencyReport trace_latency(std::span<const ActionTrace> traces, std::span<const int> source_lengths) {
  if (traces.size() != source_lengths.size()) {
    throw InputError("metrics: " + std::to_string(traces.size()) + " traces for " +
                     std::to_string(source_lengths.size()) + " source sentences");
  }
  std::vector<LatencyReport> reports;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].reads() > source_lengths[i]) {
      throw InputError("metrics: trace " + std::to_string(i + 1) + " reads past its source");
    }
    if (traces[i].writes() == 0) continue;
    reports.push_back(latency_metrics_lenient(DelaySchedule{source_lengths[i], traces[i].delays()}));
  }
  if (reports.empty()) throw InputError("metrics: no trace contains a WRITE");
  return mean_latency(reports);
}

}  // namespace simt
