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

#include "simt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "simt/errors.hpp"

namespace simt {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian hosts");

void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void append_doubles(std::string& out, const std::vector<double>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

nlohmann::json arrays_header(const std::vector<NamedArray>& arrays) {
  auto list = nlohmann::json::array();
  for (const auto& [name, values] : arrays) list.push_back({{"name", name}, {"count", values.size()}});
  return list;
}

}  // namespace

std::map<std::string, std::vector<double>> Checkpoint::parameter_map() const {
  return {parameters.begin(), parameters.end()};
}

SimtModel Checkpoint::make_model() const {
  Rng rng(0);
  SimtModel model(config, rng);
  model.load_values(parameter_map(), true);
  return model;
}

Checkpoint snapshot(const SimtModel& model, const Vocabulary& source_vocab, const Vocabulary& target_vocab) {
  Checkpoint c;
  c.config = model.config();
  c.source_vocab = source_vocab;
  c.target_vocab = target_vocab;
  for (const auto& [name, tensor] : model.parameters().items()) {
    c.parameters.emplace_back(name, std::vector<double>(tensor.values().begin(), tensor.values().end()));
  }
  return c;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["format"] = 1;
  header["config"] = nlohmann::json::parse(checkpoint.config.to_json());
  header["source_vocab"] = checkpoint.source_vocab.tokens();
  header["target_vocab"] = checkpoint.target_vocab.tokens();
  header["parameters"] = arrays_header(checkpoint.parameters);
  header["extras"] = arrays_header(checkpoint.extras);
  header["metadata"] = nlohmann::json::parse(checkpoint.metadata);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  append_u64(out, text.size());
  out += text;
  for (const auto& [name, values] : checkpoint.parameters) append_doubles(out, values);
  for (const auto& [name, values] : checkpoint.extras) append_doubles(out, values);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw InputError("checkpoint: bad magic");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) throw InputError("checkpoint: truncated header");
  std::size_t offset = 16 + header_len;

  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
    c.config = ModelConfig::from_json(header.at("config").dump());
    c.source_vocab = Vocabulary::from_tokens(header.at("source_vocab").get<std::vector<std::string>>());
    c.target_vocab = Vocabulary::from_tokens(header.at("target_vocab").get<std::vector<std::string>>());
    c.metadata = header.at("metadata").dump();
    auto read_arrays = [&](const nlohmann::json& list, std::vector<NamedArray>& into) {
      for (const auto& entry : list) {
        const auto count = entry.at("count").get<std::size_t>();
        if (count > (bytes.size() - offset) / sizeof(double)) {
          throw InputError("checkpoint: truncated payload at " + entry.at("name").get<std::string>());
        }
        std::vector<double> values(count);
        std::memcpy(values.data(), bytes.data() + offset, count * sizeof(double));
        offset += count * sizeof(double);
        into.emplace_back(entry.at("name").get<std::string>(), std::move(values));
      }
    };
    read_arrays(header.at("parameters"), c.parameters);
    read_arrays(header.at("extras"), c.extras);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (offset != bytes.size()) throw InputError("checkpoint: trailing bytes after payload");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

std::uint64_t parameter_hash(const SimtModel& model, bool adapters) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [name, tensor] : model.parameters().items()) {
    if (is_adapter_parameter(name) != adapters) continue;
    for (double v : tensor.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffU;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace simt
