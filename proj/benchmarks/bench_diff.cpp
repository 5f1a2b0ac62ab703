// Copyright 2026 The metaug Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <array>

#include "metaug/diff.hpp"
#include "metaug/random.hpp"

namespace {

using namespace metaug;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const diff::Var a = diff::parameter(random_matrix(n, n, 1));
  const diff::Var b = diff::parameter(random_matrix(n, n, 2));
  const std::array<diff::Var, 2> params = {a, b};
  for (auto _ : state) {
    auto g = diff::backward(diff::sum(diff::tanh(diff::matmul(a, b))), params, false);
    benchmark::DoNotOptimize(g);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MatmulBackward)->RangeMultiplier(2)->Range(16, 128);

// Normalized-similarity loss, differentiated twice (Hessian-vector product).
void BM_SecondOrderSimilarity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const diff::Var x = diff::parameter(random_matrix(n, 32, 3));
  const diff::Var v = diff::constant(random_matrix(n, 32, 4));
  const std::array<diff::Var, 1> params = {x};
  for (auto _ : state) {
    const diff::Var z = diff::l2_normalize_rows(x);
    const diff::Var loss = diff::logsumexp(diff::matmul(z, diff::transpose(z)) * 8.0);
    const auto first = diff::backward(loss, params, true);
    auto second = diff::backward(diff::sum(first.gradients[0] * v), params, false);
    benchmark::DoNotOptimize(second);
  }
}
BENCHMARK(BM_SecondOrderSimilarity)->Arg(16)->Arg(64);

}  // namespace
