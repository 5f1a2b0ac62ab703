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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "metaug/checkpoint.hpp"
#include "metaug/log.hpp"
#include "metaug/trainer.hpp"
#include "toy.hpp"

namespace metaug::train {
namespace {

namespace fs = std::filesystem;

data::Dataset small_dataset() {
  data::SyntheticConfig cfg;
  cfg.n_per_class = 20;
  return data::gen_synthetic_multiview(cfg);
}

TrainConfig small_config() {
  TrainConfig c;
  c.model.encoder_hidden = {16};
  c.model.rep_dim = 8;
  c.model.feature_dim = 8;
  c.batch_size = 16;
  c.epochs = 2;
  c.bank_capacity = 64;
  c.bank_k = 16;
  return c;
}

data::ViewBatch first_batch(const data::Dataset& ds, std::size_t n = 16) {
  return *data::next_batch(ds, 0, n, 1);
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("metaug_test_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

// A MAG that is not the identity, so omega actually shapes the features.
model::ParamGroup perturbed(const model::ParamGroup& p, std::uint64_t seed) {
  Rng rng(seed);
  auto omega = p.omega;
  for (auto& set : omega)
    for (auto& b : set) b = testing::random_tensor(rng, b.rows(), b.cols(), -0.3, 0.3);
  return model::adopt_params(p.spec, p.theta, p.vartheta, omega);
}

std::vector<Tensor> projected(const model::ParamGroup& p, const data::ViewBatch& b) {
  const auto ctx = model::ForwardContext::from_params(p, false, false);
  std::vector<Tensor> z;
  for (std::size_t j = 0; j < b.views.size(); ++j)
    z.push_back(ctx.project(j, ctx.encode(j, diff::constant(b.views[j]))).value());
  return z;
}

// ---- regular step --------------------------------------------------------------------

TEST(RegularStep, ZeroLearningRateLeavesEverythingUnchanged) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.lr = 0.0;
  auto params = initial_params(cfg, ds);
  const auto before = params;
  MemoryBank bank(2, cfg.bank_capacity, cfg.model.feature_dim);
  Optimizer opt(cfg.optimizer, cfg.lr);
  const auto m = regular_step(params, first_batch(ds), bank, cfg, opt, 3);
  EXPECT_EQ(params.theta, before.theta);
  EXPECT_EQ(params.vartheta, before.vartheta);
  EXPECT_EQ(params.omega, before.omega);
  EXPECT_EQ(m.phase, "regular");
  EXPECT_EQ(bank.occupancy(), 16u);
}

TEST(RegularStep, OmegaIsFrozenAndEncodersMove) {
  const auto ds = small_dataset();
  const auto cfg = small_config();
  auto params = perturbed(initial_params(cfg, ds), 4);
  const auto before = params;
  MemoryBank bank(2, cfg.bank_capacity, cfg.model.feature_dim);
  Optimizer opt(cfg.optimizer, cfg.lr);
  regular_step(params, first_batch(ds), bank, cfg, opt, 3);
  EXPECT_EQ(params.omega, before.omega);
  EXPECT_NE(params.theta, before.theta);
  EXPECT_GT(params.version, before.version);
}

TEST(RegularStep, SmallStepDoesNotIncreaseTheObjective) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.lr = 1e-3;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    cfg.seed = seed;
    auto params = perturbed(initial_params(cfg, ds), seed);
    const auto batch = first_batch(ds);
    const double before = regular_gradients(params, batch, nullptr, cfg).forward.terms.total.item();
    MemoryBank empty(2, cfg.bank_capacity, cfg.model.feature_dim);
    Optimizer opt(cfg.optimizer, cfg.lr);
    regular_step(params, batch, empty, cfg, opt, 0);
    const double after = regular_gradients(params, batch, nullptr, cfg).forward.terms.total.item();
    EXPECT_LE(after, before);
  }
}

TEST(RegularStep, GradientsDoNotDependOnAlpha) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  const auto params = perturbed(initial_params(cfg, ds), 5);
  MemoryBank bank(2, cfg.bank_capacity, cfg.model.feature_dim);
  bank.push(projected(params, first_batch(ds, 32)), first_batch(ds, 32).ids);
  const auto batch = *data::next_batch(ds, 1, 16, 1);
  const auto sample = bank.retrieve(batch.ids, cfg.bank_k, 8);
  cfg.alpha = 0.0;
  const auto a = regular_gradients(params, batch, &sample, cfg).gradients;
  cfg.alpha = 1.0;
  const auto b = regular_gradients(params, batch, &sample, cfg).gradients;
  cfg.alpha = 1e-13;
  const auto c = regular_gradients(params, batch, &sample, cfg).gradients;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(RegularStep, InfoNceObjectiveWithoutMag) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.loss = LossKind::InfoNce;
  cfg.use_mag = false;
  const auto params = initial_params(cfg, ds);
  const auto ctx = model::ForwardContext::from_params(params, false, false);
  const auto fwd = forward_batch(ctx, first_batch(ds), nullptr, cfg);
  EXPECT_EQ(fwd.terms.total.item(), losses::infonce_objective(fwd.features, nullptr, cfg.tau, false).item());
  EXPECT_FALSE(fwd.features.has_augmented());
}

// ---- fast weights and meta step ---------------------------------------------------------

TEST(FastWeights, ZeroStepEqualsBaseAndBaseIsUntouched) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.lr = 0.0;
  const auto params = initial_params(cfg, ds);
  const auto snapshot = params;
  const auto inner = compute_fast_weights(params, first_batch(ds), nullptr, cfg);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t b = 0; b < params.theta[j].size(); ++b)
      EXPECT_EQ(inner.fast.theta_ring[j][b].value(), params.theta[j][b]);
  cfg.lr = 0.5;
  (void)compute_fast_weights(params, first_batch(ds), nullptr, cfg);
  EXPECT_EQ(params.theta, snapshot.theta);
  EXPECT_EQ(params.vartheta, snapshot.vartheta);
  EXPECT_EQ(params.omega, snapshot.omega);
}

TEST(FastWeights, ProbeOfFastWeightsMatchesFiniteDifferencesOverOmega) {
  const auto toy = testing::make_toy_meta(3);
  ASSERT_LE(toy.params.parameter_count(), 50u);
  Rng rng(4);
  std::vector<Tensor> probe_w;
  for (const auto& b : toy.params.theta[0]) probe_w.push_back(testing::random_tensor(rng, b.rows(), b.cols(), -1, 1));
  auto probe = [&](const InnerPass& inner) {
    diff::Var acc = diff::constant(0.0);
    for (std::size_t b = 0; b < probe_w.size(); ++b)
      acc = acc + diff::sum(inner.fast.theta_ring[0][b] * diff::constant(probe_w[b]));
    return acc;
  };
  const auto inner = compute_fast_weights(toy.params, toy.batch, nullptr, toy.config);
  const auto rec = diff::backward(probe(inner), inner.ctx.mag_vars(), false);

  auto p = toy.params;
  std::size_t flat = 0;
  const double h = 1e-5;
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t b = 0; b < p.omega[j].size(); ++b, ++flat) {
      Tensor fd(p.omega[j][b].rows(), p.omega[j][b].cols());
      for (std::size_t i = 0; i < fd.size(); ++i) {
        const double x0 = p.omega[j][b][i];
        p.omega[j][b][i] = x0 + h;
        const double up = probe(compute_fast_weights(p, toy.batch, nullptr, toy.config)).item();
        p.omega[j][b][i] = x0 - h;
        const double down = probe(compute_fast_weights(p, toy.batch, nullptr, toy.config)).item();
        p.omega[j][b][i] = x0;
        fd[i] = (up - down) / (2 * h);
      }
      EXPECT_LT(relative_error(rec.gradients[flat].value(), fd), 1e-3) << "block " << flat;
    }
}

TEST(MetaGradient, MatchesFiniteDifferencesOnToySetup) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto toy = testing::make_toy_meta(seed);
    const auto check = testing::check_meta_gradient(toy);
    EXPECT_LE(check.parameters, 50u);
    EXPECT_EQ(check.coordinates, 14u);
    EXPECT_LT(check.worst_coordinate_error, 1e-3) << "seed " << seed;
  }
}

TEST(MetaGradient, MarginsFrozenOnRequest) {
  const auto toy = testing::make_toy_meta(5);
  losses::Margins m{0.1, 0.9, losses::MarginVariant::Large};
  const auto pass = meta_objective(toy.params, toy.batch, nullptr, toy.config, m);
  EXPECT_EQ(pass.margins.sigma_plus, 0.1);
  EXPECT_EQ(pass.margins.sigma_minus, 0.9);
  EXPECT_TRUE(pass.margins_ok);
}

TEST(MetaStep, OnlyOmegaChangesAndTheBankIsRead) {
  const auto ds = small_dataset();
  const auto cfg = small_config();
  auto params = perturbed(initial_params(cfg, ds), 6);
  MemoryBank bank(2, cfg.bank_capacity, cfg.model.feature_dim);
  const auto warm = first_batch(ds, 32);
  bank.push(projected(params, warm), warm.ids);
  const auto bank_before = bank.features(0);
  const auto before = params;
  Optimizer opt(cfg.optimizer, cfg.meta_lr);
  const auto m = meta_step(params, *data::next_batch(ds, 1, 16, 2), bank, cfg, opt, 4);
  EXPECT_EQ(m.phase, "meta");
  EXPECT_FALSE(m.skipped);
  EXPECT_EQ(params.theta, before.theta);
  EXPECT_EQ(params.vartheta, before.vartheta);
  EXPECT_NE(params.omega, before.omega);
  EXPECT_EQ(bank.features(0), bank_before);
  EXPECT_EQ(bank.occupancy(), 32u);
  ASSERT_TRUE(m.r_sigma && m.sigma_plus && m.sigma_minus);
  EXPECT_LE(*m.sigma_plus, *m.sigma_minus);
}

TEST(MetaStep, NoRegularizerAndNoAugmentedInnerTermIsStillWellDefined) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.alpha = 0.0;
  cfg.delta = 0.0;
  auto params = perturbed(initial_params(cfg, ds), 7);
  const auto before = params;
  MemoryBank bank(2, cfg.bank_capacity, cfg.model.feature_dim);
  Optimizer opt(cfg.optimizer, cfg.meta_lr);
  StepMetrics m;
  EXPECT_NO_THROW(m = meta_step(params, first_batch(ds), bank, cfg, opt, 1));
  EXPECT_TRUE(std::isfinite(m.loss));
  EXPECT_EQ(params.theta, before.theta);

  // with delta > 0 the outer augmented term reaches omega
  cfg.delta = 1.0;
  const auto g = meta_gradients(params, first_batch(ds), nullptr, cfg).gradients;
  double norm = 0;
  for (const auto& t : g) norm += l2_norm(t.values());
  EXPECT_GT(norm, 0.0);
}

TEST(MetaStep, SkippedWithNoticeWhenMarginsCannotBeFormed) {
  const auto ds = small_dataset();
  const auto cfg = small_config();
  auto params = initial_params(cfg, ds);
  const auto before = params;
  MemoryBank bank(2, cfg.bank_capacity, cfg.model.feature_dim);
  Optimizer opt(cfg.optimizer, cfg.meta_lr);
  const std::vector<std::size_t> one = {ds.split.train[0]};
  const auto notices = notice_count();
  const auto m = meta_step(params, data::gather_batch(ds, one), bank, cfg, opt, 1);
  EXPECT_TRUE(m.skipped);
  EXPECT_GT(notice_count(), notices);
  EXPECT_EQ(params.omega, before.omega);
}

// ---- training loop ----------------------------------------------------------------------

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto dir = scratch_dir("zero");
  const auto r = train(cfg, ds, {dir, {}});
  const auto init = initial_params(cfg, ds);
  EXPECT_EQ(r.params.theta, init.theta);
  EXPECT_EQ(r.params.omega, init.omega);
  EXPECT_TRUE(r.metrics.empty());
  const auto ck = load_checkpoint(dir / "final.ckpt");
  EXPECT_EQ(ck.params.theta, round_to_f32(init).theta);
}

TEST(Train, IdenticalConfigGivesIdenticalLogs) {
  const auto ds = small_dataset();
  const auto cfg = small_config();
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  train(cfg, ds, {a, {}});
  train(cfg, ds, {b, {}});
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto la = slurp(a / "metrics.jsonl");
  EXPECT_FALSE(la.empty());
  EXPECT_EQ(la, slurp(b / "metrics.jsonl"));
}

TEST(Train, PhaseIsolationHoldsForEveryStep) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.epochs = 3;
  std::size_t regular = 0, meta = 0;
  TrainOptions opts;
  opts.on_step = [&](const StepMetrics& m, const model::ParamGroup& before, const model::ParamGroup& after) {
    if (m.phase == "regular") {
      ++regular;
      EXPECT_EQ(before.omega, after.omega);
    } else {
      ++meta;
      EXPECT_EQ(before.theta, after.theta);
      EXPECT_EQ(before.vartheta, after.vartheta);
    }
  };
  const auto r = train(cfg, ds, opts);
  const std::size_t per_epoch = data::batches_per_epoch(ds, 16);
  EXPECT_EQ(regular, 3 * per_epoch);
  EXPECT_EQ(meta, 3 * per_epoch);
  EXPECT_EQ(r.metrics.size(), regular + meta);
}

TEST(Train, MetricsLogAndPeriodicCheckpoints) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.checkpoint_every = 1;
  const auto dir = scratch_dir("log");
  const auto r = train(cfg, ds, {dir, {}});
  std::ifstream in(dir / "metrics.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step"), lines);
    EXPECT_TRUE(j.at("phase") == "regular" || j.at("phase") == "meta");
    ++lines;
  }
  EXPECT_EQ(lines, r.metrics.size());
  EXPECT_TRUE(fs::exists(dir / "ckpt_epoch_0001.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "ckpt_epoch_0002.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "final.ckpt"));
}

TEST(Train, DivergenceLeavesLastGoodCheckpoint) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.lr = 1e4;
  cfg.divergence_limit = 50.0;
  const auto dir = scratch_dir("diverge");
  try {
    train(cfg, ds, {dir, {}});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.diagnostics().is_null());
  }
  EXPECT_TRUE(fs::exists(dir / "last_good.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "divergence.json"));
  EXPECT_FALSE(fs::exists(dir / "final.ckpt"));
  EXPECT_NO_THROW(load_checkpoint(dir / "last_good.ckpt"));
}

TEST(Train, InterleavedScheduleAndAdamRun) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.schedule = Schedule::Interleaved;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.lr = cfg.meta_lr = 1e-3;
  const auto r = train(cfg, ds);
  ASSERT_FALSE(r.metrics.empty());
  EXPECT_EQ(r.metrics[0].phase, "regular");
  EXPECT_EQ(r.metrics[1].phase, "meta");
  EXPECT_EQ(r.metrics[0].batch_hash, r.metrics[1].batch_hash);
  for (const auto& m : r.metrics) EXPECT_TRUE(std::isfinite(m.loss));
  EXPECT_NE(r.params.theta, initial_params(cfg, ds).theta);
}

TEST(Train, NoMagMeansNoMetaSteps) {
  const auto ds = small_dataset();
  auto cfg = small_config();
  cfg.use_mag = false;
  cfg.delta = 0.0;
  const auto r = train(cfg, ds);
  for (const auto& m : r.metrics) {
    EXPECT_EQ(m.phase, "regular");
    EXPECT_FALSE(m.l_aug.has_value());
  }
}

// ---- configuration ------------------------------------------------------------------------

TEST(TrainConfigJson, RoundTripAndErrors) {
  auto cfg = small_config();
  cfg.oucl.weighting = losses::Weighting::Gamma;
  cfg.margin = losses::MarginVariant::Small;
  cfg.schedule = Schedule::Interleaved;
  const auto j = to_json(cfg);
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
  try {
    train_config_from_json({{"alhpa", 1}});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("alhpa"), std::string::npos);
  }
  EXPECT_THROW(train_config_from_json({{"epochs", -1}}), std::invalid_argument);
  EXPECT_THROW(train_config_from_json({{"loss", "triplet"}}), std::invalid_argument);
}

TEST(TrainConfigValidation, NamesTheField) {
  auto expect_field = [](TrainConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL() << field;
    } catch (const std::invalid_argument& e) {
      EXPECT_EQ(std::string(e.what()).rfind(field, 0), 0u) << e.what();
    }
  };
  TrainConfig c;
  c.batch_size = 0;
  expect_field(c, "batch_size");
  c = {};
  c.alpha = -1;
  expect_field(c, "alpha");
  c = {};
  c.bank_k = c.bank_capacity + 1;
  expect_field(c, "bank_k");
  c = {};
  c.oucl.beta = -2;
  expect_field(c, "oucl");
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

}  // namespace
}  // namespace metaug::train
