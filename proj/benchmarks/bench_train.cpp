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

#include "metaug/bank.hpp"
#include "metaug/trainer.hpp"

namespace {

using namespace metaug;

struct Fixture {
  data::Dataset dataset = data::gen_synthetic_multiview({});
  train::TrainConfig config;
  model::ParamGroup params = train::initial_params(config, dataset);
  MemoryBank bank{dataset.m_views(), config.bank_capacity, config.model.feature_dim};
  data::ViewBatch batch = *data::next_batch(dataset, 0, config.batch_size, config.seed);

  Fixture() {
    train::Optimizer opt(config.optimizer, config.lr);
    for (std::size_t t = 0; t < 4; ++t)
      train::regular_step(params, *data::next_batch(dataset, t, config.batch_size, config.seed), bank, config,
                          opt, t);
  }
};

void BM_RegularStep(benchmark::State& state) {
  Fixture f;
  train::Optimizer opt(f.config.optimizer, f.config.lr);
  std::uint64_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train::regular_step(f.params, f.batch, f.bank, f.config, opt, t++));
}
BENCHMARK(BM_RegularStep)->Unit(benchmark::kMillisecond);

void BM_MetaStep(benchmark::State& state) {
  Fixture f;
  train::Optimizer opt(f.config.optimizer, f.config.meta_lr);
  std::uint64_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train::meta_step(f.params, f.batch, f.bank, f.config, opt, t++));
}
BENCHMARK(BM_MetaStep)->Unit(benchmark::kMillisecond);

}  // namespace
