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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace simt {

using TokenList = std::vector<std::string>;

TokenList tokenize(std::string_view text);
std::string detokenize(const TokenList& tokens);

// Token <-> id bijection with the four reserved ids at 0..3.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  /// Tokens below min_frequency are dropped (they will map to <unk>). Ordering
  /// is frequency descending, then lexicographic, so rebuilding is stable.
  static Vocabulary build(const std::vector<TokenList>& sentences, int min_frequency = 5);
  /// Either the full table from tokens() or just the entries after the reserved ones.
  static Vocabulary from_tokens(const std::vector<std::string>& ordered_tokens);

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  /// Tokens in id order, including the reserved ones.
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const TokenList& tokens) const;
  /// Stops at <eos>; skips <pad> and <bos>.
  TokenList decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

struct SentencePair {
  TokenList source;
  TokenList target;
  bool operator==(const SentencePair&) const = default;
};

enum class Split { kTrain, kValid, kTest };
std::string_view split_name(Split split);

struct ParallelCorpus {
  Split split = Split::kTrain;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool operator==(const ParallelCorpus&) const = default;
};

enum class TaskKind { kCopy, kShift, kReverse };

// Synthetic transduction task with a known minimal lagging: copy needs 1,
// shift(j) needs j + 1, reverse needs the whole source.
struct TaskSpec {
  TaskKind kind = TaskKind::kShift;
  int shift = 2;
  int vocab_size = 16;
  int min_length = 6;
  int max_length = 12;
  int train_count = 5000;
  int valid_count = 200;
  int test_count = 200;
  std::uint64_t seed = 1;

  /// Throws InputError when the spec cannot be generated.
  void validate() const;
  /// Parses "shift(2)", "shift", "copy" or "reverse".
  static TaskKind parse_kind(std::string_view text, int* shift_out);
  std::string kind_string() const;
  /// key=value lines: task, vocab, min_len, max_len, train, valid, test, seed.
  static TaskSpec parse_config(std::string_view text);
};

inline constexpr const char* kShiftSentinel = "_";

/// Symbol used for the i-th content token of a synthetic task.
std::string task_symbol(int index);

/// Target side for a given source under the task's rule.
TokenList task_target(const TaskSpec& spec, const TokenList& source);

struct TaskCorpora {
  ParallelCorpus train;
  ParallelCorpus valid;
  ParallelCorpus test;
};

/// Deterministic per seed; the three splits share no source sentence.
TaskCorpora generate(const TaskSpec& spec);

/// One pair per line, a single tab between sides, space-separated tokens.
ParallelCorpus load_tsv(const std::filesystem::path& path, Split split = Split::kTrain);
ParallelCorpus parse_tsv(std::string_view text, Split split = Split::kTrain);
void save_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path);
std::string format_tsv(const ParallelCorpus& corpus);

struct EncodedPair {
  std::vector<int> source;  // no end marker
  std::vector<int> target;  // no end marker
};

std::vector<EncodedPair> encode_corpus(const ParallelCorpus& corpus, const Vocabulary& vocab);

// Padded, teacher-forcing view of a group of pairs. The encoder sees
// source + <eos>; the decoder reads <bos> + target and predicts target + <eos>.
struct Batch {
  std::size_t size = 0;            // sentences
  std::size_t source_steps = 0;    // padded encoder length (incl. <eos>)
  std::size_t target_steps = 0;    // padded decoder length (incl. <bos>/<eos>)
  std::vector<int> source;         // [size * source_steps]
  std::vector<int> target_in;      // [size * target_steps]
  std::vector<int> target_out;     // [size * target_steps], pad where absent
  std::vector<int> source_lengths; // per sentence, incl. <eos>
  std::vector<int> target_lengths; // per sentence, incl. <eos>

  int max_source_length() const;
  std::size_t target_tokens() const;
};

Batch collate(std::span<const EncodedPair> pairs, std::span<const std::size_t> indices);

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
  std::size_t skipped = 0;  // pairs longer than max_tokens on their own
};

/// Length-bucketed batches whose padded token count (sentences x longest
/// side incl. markers) stays within max_tokens. Batch order is shuffled with
/// `seed`; every non-skipped pair appears exactly once.
BatchPlan plan_batches(std::span<const EncodedPair> pairs, std::size_t max_tokens, std::uint64_t seed);

}  // namespace simt
