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

#include <benchmark/benchmark.h>

#include <vector>

#include "simt/model.hpp"
#include "simt/ops.hpp"
#include "simt/policy.hpp"

namespace {

simt::Tensor random(simt::Shape shape, simt::Rng& rng) {
  std::vector<double> v(simt::shape_size(shape));
  for (auto& x : v) x = rng.normal();
  return simt::Tensor::from(std::move(shape), std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  simt::Rng rng(1);
  const auto a = random({n, 64}, rng);
  const auto b = random({64, 64}, rng);
  simt::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(simt::ops::matmul(a, b).values().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 64));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(128)->Arg(512);

void BM_MatmulTransposed(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  simt::Rng rng(2);
  const auto a = random({4, n, 32}, rng);
  const auto b = random({4, n, 32}, rng);
  simt::NoGradGuard no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simt::ops::matmul(a, b, simt::ops::Transpose::kYes).values().data());
  }
}
BENCHMARK(BM_MatmulTransposed)->Arg(13)->Arg(64);

simt::SimtModel desk_model() {
  simt::Rng rng(3);
  return simt::SimtModel(simt::ModelConfig::desk(24, 24), rng);
}

void BM_TrainStep(benchmark::State& state) {
  auto model = desk_model();
  simt::Rng rng(4);
  std::vector<simt::EncodedPair> pairs(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pairs) {
    for (int i = 0; i < 10; ++i) {
      p.source.push_back(static_cast<int>(rng.uniform_int(4, 23)));
      p.target.push_back(static_cast<int>(rng.uniform_int(4, 23)));
    }
  }
  std::vector<std::size_t> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = simt::collate(pairs, idx);
  for (auto _ : state) {
    model.parameters().zero_grad();
    auto loss = model.forward_train(batch, 3, 0.1, &rng);
    simt::backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_WaitKDecode(benchmark::State& state) {
  const auto model = desk_model();
  const std::vector<int> source{4, 9, 12, 5, 7, 20, 11, 8, 6, 15};
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simt::fixed_waitk_decode(model, source, k).tokens.size());
}
BENCHMARK(BM_WaitKDecode)->Arg(1)->Arg(3)->Arg(9)->Unit(benchmark::kMillisecond);

void BM_EncodeAppend(benchmark::State& state) {
  const auto model = desk_model();
  for (auto _ : state) {
    auto enc = model.begin_encoding();
    for (int i = 0; i < 12; ++i) model.encode_append(enc, 4 + i);
    benchmark::DoNotOptimize(enc.memory.data());
  }
}
BENCHMARK(BM_EncodeAppend)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
