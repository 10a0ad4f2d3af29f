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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/model.hpp"

namespace simt {

using NamedArray = std::pair<std::string, std::vector<double>>;

// Self-describing container: an 8-byte magic, a JSON header (config, vocabularies,
// array names/shapes, free-form metadata) and the raw little-endian doubles.
struct Checkpoint {
  ModelConfig config;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::vector<NamedArray> parameters;  // model parameters, registration order
  std::vector<NamedArray> extras;      // optimizer moments and the like
  std::string metadata = "{}";         // JSON object; trainer state lives here

  /// Builds a model with these parameters (all must be present).
  SimtModel make_model() const;
  std::map<std::string, std::vector<double>> parameter_map() const;
};

Checkpoint snapshot(const SimtModel& model, const Vocabulary& source_vocab, const Vocabulary& target_vocab);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws InputError on a missing file, bad magic or truncated payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the bit patterns of the given parameters; used to compare weights.
std::uint64_t parameter_hash(const SimtModel& model, bool adapters);

}  // namespace simt
