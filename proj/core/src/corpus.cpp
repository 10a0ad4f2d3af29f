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

#include "simt/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <unordered_map>

#include "simt/errors.hpp"
#include "simt/rng.hpp"

namespace simt {

TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string detokenize(const TokenList& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---- Vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>", "<s>", "</s>"} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& ordered_tokens) {
  Vocabulary v;
  // Accept either the full table (as returned by tokens()) or only the
  // non-reserved entries.
  std::size_t first = 0;
  if (ordered_tokens.size() >= v.tokens_.size() &&
      std::equal(v.tokens_.begin(), v.tokens_.end(), ordered_tokens.begin())) {
    first = v.tokens_.size();
  }
  for (const auto& tok : std::span(ordered_tokens).subspan(first)) {
    if (!v.ids_.emplace(tok, static_cast<int>(v.tokens_.size())).second) {
      throw InputError("duplicate vocabulary token '" + tok + "'");
    }
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<TokenList>& sentences, int min_frequency) {
  std::unordered_map<std::string, long> counts;
  for (const auto& sentence : sentences)
    for (const auto& tok : sentence) ++counts[tok];
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_frequency) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> ordered;
  for (auto& [tok, n] : kept) ordered.push_back(tok);
  return from_tokens(ordered);
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const TokenList& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenList Vocabulary::decode(std::span<const int> ids) const {
  TokenList out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

// ---- Synthetic tasks --------------------------------------------------------

namespace {

int parse_int(std::string_view key, std::string_view text) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError("task spec: '" + std::string(key) + "' expects an integer, got '" +
                     std::string(text) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

TaskKind TaskSpec::parse_kind(std::string_view text, int* shift_out) {
  text = trim(text);
  if (text == "copy") return TaskKind::kCopy;
  if (text == "reverse") return TaskKind::kReverse;
  if (text == "shift") return TaskKind::kShift;
  if (text.starts_with("shift(") && text.ends_with(")")) {
    const int j = parse_int("task", text.substr(6, text.size() - 7));
    if (shift_out) *shift_out = j;
    return TaskKind::kShift;
  }
  throw InputError("unknown task '" + std::string(text) + "' (copy | shift(j) | reverse)");
}

std::string TaskSpec::kind_string() const {
  switch (kind) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kReverse: return "reverse";
    case TaskKind::kShift: return "shift(" + std::to_string(shift) + ")";
  }
  return "?";
}

void TaskSpec::validate() const {
  if (vocab_size < 1) throw InputError("task spec: vocab size must be positive");
  if (min_length < 1 || max_length < min_length) {
    throw InputError("task spec: need 1 <= min_len <= max_len");
  }
  if (train_count < 1 || valid_count < 0 || test_count < 0) {
    throw InputError("task spec: sample counts must be non-negative (train positive)");
  }
  if (kind == TaskKind::kShift && (shift < 1 || shift >= min_length)) {
    throw InputError("task spec: shift(" + std::to_string(shift) +
                     ") needs 1 <= j < min_len = " + std::to_string(min_length));
  }
}

TaskSpec TaskSpec::parse_config(std::string_view text) {
  TaskSpec spec;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "task") {
      spec.kind = parse_kind(value, &spec.shift);
    } else if (key == "shift") {
      spec.shift = parse_int(key, value);
    } else if (key == "vocab") {
      spec.vocab_size = parse_int(key, value);
    } else if (key == "min_len") {
      spec.min_length = parse_int(key, value);
    } else if (key == "max_len") {
      spec.max_length = parse_int(key, value);
    } else if (key == "train") {
      spec.train_count = parse_int(key, value);
    } else if (key == "valid") {
      spec.valid_count = parse_int(key, value);
    } else if (key == "test") {
      spec.test_count = parse_int(key, value);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else {
      throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string task_symbol(int index) { return "t" + std::to_string(index); }

TokenList task_target(const TaskSpec& spec, const TokenList& source) {
  switch (spec.kind) {
    case TaskKind::kCopy:
      return source;
    case TaskKind::kReverse:
      return TokenList(source.rbegin(), source.rend());
    case TaskKind::kShift: {
      const std::size_t j = static_cast<std::size_t>(spec.shift);
      TokenList target;
      target.reserve(source.size());
      for (std::size_t t = 0; t < source.size(); ++t) {
        target.push_back(t + j < source.size() ? source[t + j] : kShiftSentinel);
      }
      return target;
    }
  }
  return {};
}

TaskCorpora generate(const TaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::set<TokenList> seen;
  auto draw_split = [&](Split split, int count) {
    ParallelCorpus corpus{split, {}};
    corpus.pairs.reserve(static_cast<std::size_t>(count));
    long attempts = 0;
    const long budget = 100L * count + 1000;
    while (static_cast<int>(corpus.pairs.size()) < count) {
      if (++attempts > budget) {
        throw InputError("task spec: cannot draw " + std::to_string(count) +
                         " distinct sentences; enlarge vocab or length range");
      }
      const auto len = rng.uniform_int(spec.min_length, spec.max_length);
      TokenList source;
      for (std::int64_t i = 0; i < len; ++i) {
        source.push_back(task_symbol(static_cast<int>(rng.uniform_int(0, spec.vocab_size - 1))));
      }
      if (!seen.insert(source).second) continue;
      corpus.pairs.push_back({source, task_target(spec, source)});
    }
    return corpus;
  };
  TaskCorpora out;
  out.train = draw_split(Split::kTrain, spec.train_count);
  out.valid = draw_split(Split::kValid, spec.valid_count);
  out.test = draw_split(Split::kTest, spec.test_count);
  return out;
}

// ---- TSV --------------------------------------------------------------------

ParallelCorpus parse_tsv(std::string_view text, Split split) {
  ParallelCorpus corpus{split, {}};
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(line_no, "missing tab separator");
    if (line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(line_no, "more than one tab separator");
    }
    SentencePair pair{tokenize(line.substr(0, tab)), tokenize(line.substr(tab + 1))};
    if (pair.source.empty() || pair.target.empty()) throw ParseError(line_no, "empty side");
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

ParallelCorpus load_tsv(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_tsv(buffer.str(), split);
}

std::string format_tsv(const ParallelCorpus& corpus) {
  std::string out;
  for (const auto& pair : corpus.pairs) {
    out += detokenize(pair.source);
    out += '\t';
    out += detokenize(pair.target);
    out += '\n';
  }
  return out;
}

void save_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write corpus file " + path.string());
  out << format_tsv(corpus);
}

// ---- Batching ---------------------------------------------------------------

std::vector<EncodedPair> encode_corpus(const ParallelCorpus& corpus, const Vocabulary& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) out.push_back({vocab.encode(pair.source), vocab.encode(pair.target)});
  return out;
}

int Batch::max_source_length() const {
  return source_lengths.empty() ? 0 : *std::max_element(source_lengths.begin(), source_lengths.end());
}

std::size_t Batch::target_tokens() const {
  return static_cast<std::size_t>(std::accumulate(target_lengths.begin(), target_lengths.end(), 0));
}

Batch collate(std::span<const EncodedPair> pairs, std::span<const std::size_t> indices) {
  Batch b;
  b.size = indices.size();
  for (auto i : indices) {
    b.source_steps = std::max(b.source_steps, pairs[i].source.size() + 1);
    b.target_steps = std::max(b.target_steps, pairs[i].target.size() + 1);
  }
  b.source.assign(b.size * b.source_steps, Vocabulary::kPad);
  b.target_in.assign(b.size * b.target_steps, Vocabulary::kPad);
  b.target_out.assign(b.size * b.target_steps, Vocabulary::kPad);
  for (std::size_t r = 0; r < b.size; ++r) {
    const auto& p = pairs[indices[r]];
    int* src = b.source.data() + r * b.source_steps;
    std::copy(p.source.begin(), p.source.end(), src);
    src[p.source.size()] = Vocabulary::kEos;
    int* tin = b.target_in.data() + r * b.target_steps;
    int* tout = b.target_out.data() + r * b.target_steps;
    tin[0] = Vocabulary::kBos;
    std::copy(p.target.begin(), p.target.end(), tin + 1);
    std::copy(p.target.begin(), p.target.end(), tout);
    tout[p.target.size()] = Vocabulary::kEos;
    b.source_lengths.push_back(static_cast<int>(p.source.size() + 1));
    b.target_lengths.push_back(static_cast<int>(p.target.size() + 1));
  }
  return b;
}

namespace {

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

BatchPlan plan_batches(std::span<const EncodedPair> pairs, std::size_t max_tokens, std::uint64_t seed) {
  if (pairs.empty()) throw UsageError("plan_batches: empty corpus");
  Rng rng(seed);
  auto footprint = [&](std::size_t i) {
    return std::max(pairs[i].source.size(), pairs[i].target.size()) + 1;
  };
  BatchPlan plan;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (footprint(i) > max_tokens) {
      ++plan.skipped;
    } else {
      order.push_back(i);
    }
  }
  shuffle_in_place(order, rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return footprint(a) < footprint(b); });

  std::vector<std::size_t> current;
  std::size_t longest = 0;
  for (auto i : order) {
    const std::size_t widest = std::max(longest, footprint(i));
    if (!current.empty() && widest * (current.size() + 1) > max_tokens) {
      plan.batches.push_back(std::move(current));
      current.clear();
      longest = 0;
    }
    current.push_back(i);
    longest = std::max(longest, footprint(i));
  }
  if (!current.empty()) plan.batches.push_back(std::move(current));
  shuffle_in_place(plan.batches, rng);
  return plan;
}

}  // namespace simt
