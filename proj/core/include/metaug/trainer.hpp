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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaug/bank.hpp"
#include "metaug/data.hpp"
#include "metaug/losses.hpp"
#include "metaug/model.hpp"

namespace metaug::train {

enum class LossKind { Oucl, InfoNce };
enum class Schedule { TwoPass, Interleaved };
enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  std::uint64_t seed = 0;
  model::ModelConfig model;

  LossKind loss = LossKind::Oucl;
  bool use_mag = true;  // augmented features and meta steps
  losses::OuclConfig oucl;
  double tau = 0.07;
  double alpha = 1.0;
  double delta = 1e-5;
  losses::MarginVariant margin = losses::MarginVariant::Large;
  bool include_aug_aug = false;

  double lr = 0.05;       // theta, vartheta (also the fast-weight step)
  double meta_lr = 0.05;  // omega
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::size_t bank_capacity = 4096;
  std::size_t bank_k = 512;
  Schedule schedule = Schedule::TwoPass;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  std::size_t checkpoint_every = 0;  // epochs; 0 writes the final checkpoint only
  double divergence_limit = 1e6;
  bool check_phase_isolation = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Thrown when a loss or parameter norm leaves the finite range or exceeds
/// the divergence limit. `diagnostics` holds pair-similarity statistics.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, nlohmann::json diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const nlohmann::json& diagnostics() const { return diagnostics_; }

 private:
  nlohmann::json diagnostics_;
};

struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::string phase;  // "regular" | "meta"
  std::uint64_t batch_hash = 0;
  std::size_t batch_size = 0;
  bool skipped = false;
  double loss = 0.0;  // L_MetAug for regular steps, L_meta for meta steps
  double l_ori = 0.0;
  std::optional<double> l_aug;
  std::optional<double> r_sigma;
  std::optional<double> sigma_plus;
  std::optional<double> sigma_minus;
  double mean_d_pos = 0.0;
  double mean_d_neg = 0.0;
  std::optional<double> mean_d_self;  // d(z_i^j, zhat_i^j)
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  nlohmann::json to_json() const;
};

/// Forward pass of one batch: features, enumerated pairs and objective terms.
struct BatchForward {
  losses::FeatureSet features;
  losses::PairSets pairs;
  losses::ObjectiveTerms terms;
};

BatchForward forward_batch(const model::ForwardContext& ctx, const data::ViewBatch& batch,
                           const BankSample* bank, const TrainConfig& config);

/// Plain SGD or Adam over a fixed list of blocks.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8);
  void apply(const std::vector<Tensor*>& blocks, std::span<const diff::Var> grads);

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Blocks in the order of ForwardContext::encoder_vars / mag_vars.
std::vector<Tensor*> encoder_blocks(model::ParamGroup& params);
std::vector<Tensor*> mag_blocks(model::ParamGroup& params);

/// Gradients of the regular-step objective with respect to theta and vartheta
/// (omega frozen), without updating anything.
struct RegularPass {
  BatchForward forward;
  std::vector<Tensor> gradients;
};
RegularPass regular_gradients(const model::ParamGroup& params, const data::ViewBatch& batch,
                              const BankSample* bank, const TrainConfig& config);

/// One regular step: update theta and vartheta from L_MetAug, then push the
/// batch's detached z into the bank.
StepMetrics regular_step(model::ParamGroup& params, const data::ViewBatch& batch,
                         MemoryBank& bank, const TrainConfig& config, Optimizer& optimizer,
                         std::uint64_t retrieval_seed);

/// Inner pass of the meta step: L_MetAug with theta, vartheta and omega as
/// leaves, plus the recorded one-step fast weights.
struct InnerPass {
  model::ForwardContext ctx;
  BatchForward forward;
  model::FastWeights fast;
};
InnerPass compute_fast_weights(const model::ParamGroup& params, const data::ViewBatch& batch,
                               const BankSample* bank, const TrainConfig& config);

struct MetaPass {
  InnerPass inner;
  BatchForward outer;
  losses::Margins margins;
  bool margins_ok = false;
  diff::Var r_sigma;
  diff::Var l_meta;
};

/// L_meta = L_MetAug(fast weights, omega) + alpha * R_sigma. Margins come from
/// the outer original pairs unless `frozen` is given.
MetaPass meta_objective(const model::ParamGroup& params, const data::ViewBatch& batch,
                        const BankSample* bank, const TrainConfig& config,
                        const std::optional<losses::Margins>& frozen = std::nullopt);

/// Gradient of L_meta with respect to every omega block (view-major).
struct MetaGradients {
  MetaPass pass;
  std::vector<Tensor> gradients;
};
MetaGradients meta_gradients(const model::ParamGroup& params, const data::ViewBatch& batch,
                             const BankSample* bank, const TrainConfig& config,
                             const std::optional<losses::Margins>& frozen = std::nullopt);

/// One meta step on omega. The bank is only read. Skipped (with a notice)
/// when margins cannot be formed.
StepMetrics meta_step(model::ParamGroup& params, const data::ViewBatch& batch,
                      const MemoryBank& bank, const TrainConfig& config, Optimizer& optimizer,
                      std::uint64_t retrieval_seed);

struct TrainOptions {
  std::optional<std::filesystem::path> run_dir;  // metrics.jsonl and checkpoints
  /// Called after every step with the parameters before and after it.
  std::function<void(const StepMetrics&, const model::ParamGroup& before,
                     const model::ParamGroup& after)>
      on_step;
};

struct TrainResult {
  model::ParamGroup params;
  std::vector<StepMetrics> metrics;
};

/// Parameters the run starts from.
model::ParamGroup initial_params(const TrainConfig& config, const data::Dataset& dataset);

/// Runs all epochs. Throws DivergenceError after saving last_good.ckpt and
/// divergence.json in the run directory.
TrainResult train(const TrainConfig& config, const data::Dataset& dataset,
                  const TrainOptions& options = {});

nlohmann::json to_json(const TrainConfig& config);
/// Inverse of to_json; keys absent from `j` keep their defaults and unknown
/// keys throw std::invalid_argument naming the key.
TrainConfig train_config_from_json(const nlohmann::json& j);

std::string to_string(LossKind k);
std::string to_string(Schedule s);
std::string to_string(OptimizerKind o);

}  // namespace metaug::train
