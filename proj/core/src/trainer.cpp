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

#include "metaug/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <type_traits>

#include "metaug/checkpoint.hpp"
#include "metaug/log.hpp"
#include "metaug/random.hpp"

namespace metaug::train {
namespace {

using diff::Var;

constexpr std::uint64_t kModelTag = 101;
constexpr std::uint64_t kEpochTag = 102;
constexpr std::uint64_t kRetrievalTag = 103;

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

nlohmann::json similarity_summary(const losses::PairSet& set) {
  const auto v = set.values();
  if (v.empty()) return {{"count", 0}};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const auto finite = std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  return {{"count", v.size()}, {"finite", finite}, {"min", *lo}, {"max", *hi}, {"mean", mean_of(v)}};
}

nlohmann::json diagnostics(const BatchForward& f) {
  return {{"pos", similarity_summary(f.pairs.pos)},
          {"neg", similarity_summary(f.pairs.neg)},
          {"aug_pos", similarity_summary(f.pairs.aug_pos)},
          {"aug_neg", similarity_summary(f.pairs.aug_neg)}};
}

void guard_loss(double loss, const BatchForward& f, const TrainConfig& config, const char* phase) {
  if (!std::isfinite(loss) || std::abs(loss) > config.divergence_limit) {
    std::ostringstream os;
    os << phase << " loss diverged (" << loss << ")";
    throw DivergenceError(os.str(), diagnostics(f));
  }
}

void guard_params(const model::ParamGroup& params, const BatchForward& f, const TrainConfig& config) {
  const double norm = params.max_block_norm();
  if (!std::isfinite(norm) || norm > config.divergence_limit) {
    std::ostringstream os;
    os << "parameter norm diverged (" << norm << ")";
    throw DivergenceError(os.str(), diagnostics(f));
  }
}

std::vector<Tensor> values_of(const std::vector<Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

BankSample retrieve(const MemoryBank& bank, const data::ViewBatch& batch, const TrainConfig& config,
                    std::uint64_t seed) {
  if (config.bank_capacity == 0 || config.bank_k == 0) return {};
  return bank.retrieve(batch.ids, config.bank_k, seed);
}

void fill_common(StepMetrics& m, const BatchForward& f, const data::ViewBatch& batch) {
  m.batch_hash = batch.hash();
  m.batch_size = batch.size();
  m.l_ori = f.terms.ori.item();
  if (f.terms.aug.defined()) m.l_aug = f.terms.aug.item();
  m.n_pos = f.pairs.pos.size();
  m.n_neg = f.pairs.neg.size();
  m.mean_d_pos = mean_of(f.pairs.pos.values());
  m.mean_d_neg = mean_of(f.pairs.neg.values());
  if (f.features.has_augmented()) {
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < f.features.m_views(); ++j) {
      const Tensor& z = f.features.z[j].value();
      const Tensor& zh = f.features.zhat[j].value();
      for (std::size_t i = 0; i < z.rows(); ++i, ++count) {
        s += 0.5 * (1.0 + dot(z.row_view(i), zh.row_view(i)));
      }
    }
    m.mean_d_self = count ? s / static_cast<double>(count) : 0.0;
  }
}

bool same_values(const std::vector<model::ParamSet>& a, const std::vector<model::ParamSet>& b) {
  return a == b;
}

std::string checkpoint_name(std::size_t epoch) {
  std::ostringstream os;
  os << "ckpt_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (!(alpha >= 0.0)) fail("alpha", "must be >= 0");
  if (!(delta >= 0.0)) fail("delta", "must be >= 0");
  if (!(lr >= 0.0)) fail("lr", "must be >= 0");
  if (!(meta_lr >= 0.0)) fail("meta_lr", "must be >= 0");
  if (!(tau > 0.0)) fail("tau", "must be positive");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (bank_k > bank_capacity) fail("bank_k", "must not exceed bank_capacity");
  if (!(divergence_limit > 0.0)) fail("divergence_limit", "must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2", "must lie in [0, 1)");
  try {
    oucl.validate();
  } catch (const std::invalid_argument& e) {
    fail("oucl", e.what());
  }
  if (model.rep_dim == 0) fail("model.rep_dim", "must be positive");
  if (model.feature_dim == 0) fail("model.feature_dim", "must be positive");
}

nlohmann::json StepMetrics::to_json() const {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"step", step},
          {"epoch", epoch},
          {"phase", phase},
          {"batch_hash", batch_hash},
          {"batch_size", batch_size},
          {"skipped", skipped},
          {"loss", loss},
          {"l_ori", l_ori},
          {"l_aug", opt(l_aug)},
          {"r_sigma", opt(r_sigma)},
          {"sigma_plus", opt(sigma_plus)},
          {"sigma_minus", opt(sigma_minus)},
          {"mean_d_pos", mean_d_pos},
          {"mean_d_neg", mean_d_neg},
          {"mean_d_self", opt(mean_d_self)},
          {"n_pos", n_pos},
          {"n_neg", n_neg}};
}

BatchForward forward_batch(const model::ForwardContext& ctx, const data::ViewBatch& batch,
                           const BankSample* bank, const TrainConfig& config) {
  if (batch.m_views() != ctx.m_views()) {
    throw ShapeError("batch has " + std::to_string(batch.m_views()) + " views, model has " +
                     std::to_string(ctx.m_views()));
  }
  BatchForward out;
  out.features.ids = batch.ids;
  for (std::size_t j = 0; j < batch.m_views(); ++j) {
    const Var z = ctx.project(j, ctx.encode(j, diff::constant(batch.views[j])));
    out.features.z.push_back(z);
    if (config.use_mag) out.features.zhat.push_back(ctx.augment(j, z));
  }
  losses::PairOptions options;
  options.include_augmented = config.use_mag;
  options.include_aug_aug = config.include_aug_aug;
  options.keep_metadata = false;
  out.pairs = losses::enumerate_pairs(out.features, bank, options);

  const double delta = config.use_mag ? config.delta : 0.0;
  if (config.loss == LossKind::Oucl) {
    out.terms = losses::metaug_objective(out.pairs, config.oucl, delta);
  } else {
    out.terms.ori = losses::infonce_objective(out.features, bank, config.tau, false);
    out.terms.total = out.terms.ori;
    if (config.use_mag) {
      out.terms.aug = losses::infonce_objective(out.features, nullptr, config.tau, true);
      if (delta > 0.0) out.terms.total = out.terms.ori + out.terms.aug * delta;
    }
  }
  return out;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double beta1, double beta2, double eps)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Optimizer::apply(const std::vector<Tensor*>& blocks, std::span<const Var> grads) {
  if (blocks.size() != grads.size()) throw ShapeError("optimizer: block/gradient count mismatch");
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      auto p = blocks[b]->values();
      const auto g = grads[b].value().values();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr_ * g[i];
    }
    return;
  }
  if (m_.empty()) {
    for (auto* b : blocks) {
      m_.emplace_back(b->rows(), b->cols());
      v_.emplace_back(b->rows(), b->cols());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto p = blocks[b]->values();
    const auto g = grads[b].value().values();
    auto m = m_[b].values();
    auto v = v_[b].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::vector<Tensor*> encoder_blocks(model::ParamGroup& params) {
  std::vector<Tensor*> out;
  for (auto* sets : {&params.theta, &params.vartheta})
    for (auto& set : *sets)
      for (auto& t : set) out.push_back(&t);
  return out;
}

std::vector<Tensor*> mag_blocks(model::ParamGroup& params) {
  std::vector<Tensor*> out;
  for (auto& set : params.omega)
    for (auto& t : set) out.push_back(&t);
  return out;
}

RegularPass regular_gradients(const model::ParamGroup& params, const data::ViewBatch& batch,
                              const BankSample* bank, const TrainConfig& config) {
  const auto ctx = model::ForwardContext::from_params(params, true, false);
  RegularPass out;
  out.forward = forward_batch(ctx, batch, bank, config);
  const auto vars = ctx.encoder_vars();
  out.gradients = values_of(diff::backward(out.forward.terms.total, vars, false).gradients);
  return out;
}

StepMetrics regular_step(model::ParamGroup& params, const data::ViewBatch& batch, MemoryBank& bank,
                         const TrainConfig& config, Optimizer& optimizer,
                         std::uint64_t retrieval_seed) {
  const BankSample sample = retrieve(bank, batch, config, retrieval_seed);
  const auto ctx = model::ForwardContext::from_params(params, true, false);
  const BatchForward f = forward_batch(ctx, batch, &sample, config);
  const double loss = f.terms.total.item();
  guard_loss(loss, f, config, "regular");

  const auto vars = ctx.encoder_vars();
  const auto rec = diff::backward(f.terms.total, vars, false);
  optimizer.apply(encoder_blocks(params), rec.gradients);
  ++params.version;
  guard_params(params, f, config);

  std::vector<Tensor> z;
  for (const auto& v : f.features.z) z.push_back(v.value());
  bank.push(z, batch.ids);

  StepMetrics m;
  m.phase = "regular";
  m.loss = loss;
  fill_common(m, f, batch);
  if (!f.pairs.pos.empty() && !f.pairs.neg.empty()) {
    const auto margins = losses::compute_margins(f.pairs.pos, f.pairs.neg, config.margin);
    m.sigma_plus = margins.sigma_plus;
    m.sigma_minus = margins.sigma_minus;
    if (f.pairs.has_augmented) {
      m.r_sigma = losses::margin_regularization(f.pairs.aug_pos, f.pairs.aug_neg, margins).item();
    }
  }
  return m;
}

InnerPass compute_fast_weights(const model::ParamGroup& params, const data::ViewBatch& batch,
                               const BankSample* bank, const TrainConfig& config) {
  InnerPass out{model::ForwardContext::from_params(params, true, true), {}, {}};
  out.forward = forward_batch(out.ctx, batch, bank, config);
  out.fast = model::make_fast_weights(out.ctx, out.forward.terms.total, config.lr);
  return out;
}

MetaPass meta_objective(const model::ParamGroup& params, const data::ViewBatch& batch,
                        const BankSample* bank, const TrainConfig& config,
                        const std::optional<losses::Margins>& frozen) {
  MetaPass out{compute_fast_weights(params, batch, bank, config), {}, {}, false, {}, {}};
  const auto outer_ctx = model::substitute_fast_weights(params, out.inner.fast);
  out.outer = forward_batch(outer_ctx, batch, bank, config);
  if (frozen) {
    out.margins = *frozen;
    out.margins_ok = true;
  } else if (!out.outer.pairs.pos.empty() && !out.outer.pairs.neg.empty()) {
    out.margins = losses::compute_margins(out.outer.pairs.pos, out.outer.pairs.neg, config.margin);
    out.margins_ok = true;
  }
  out.l_meta = out.outer.terms.total;
  if (out.margins_ok && out.outer.pairs.has_augmented) {
    out.r_sigma = losses::margin_regularization(out.outer.pairs.aug_pos, out.outer.pairs.aug_neg,
                                                out.margins);
    if (config.alpha > 0.0) out.l_meta = out.l_meta + out.r_sigma * config.alpha;
  }
  return out;
}

MetaGradients meta_gradients(const model::ParamGroup& params, const data::ViewBatch& batch,
                             const BankSample* bank, const TrainConfig& config,
                             const std::optional<losses::Margins>& frozen) {
  MetaGradients out{meta_objective(params, batch, bank, config, frozen), {}};
  const auto vars = out.pass.inner.ctx.mag_vars();
  out.gradients = values_of(diff::backward(out.pass.l_meta, vars, false).gradients);
  return out;
}

StepMetrics meta_step(model::ParamGroup& params, const data::ViewBatch& batch,
                      const MemoryBank& bank, const TrainConfig& config, Optimizer& optimizer,
                      std::uint64_t retrieval_seed) {
  const BankSample sample = retrieve(bank, batch, config, retrieval_seed);
  StepMetrics m;
  m.phase = "meta";
  MetaPass pass = meta_objective(params, batch, &sample, config);
  fill_common(m, pass.outer, batch);
  m.loss = pass.l_meta.item();
  if (!pass.margins_ok) {
    log_notice("meta step skipped: margins need both positive and negative pairs");
    m.skipped = true;
    return m;
  }
  guard_loss(m.loss, pass.outer, config, "meta");
  m.sigma_plus = pass.margins.sigma_plus;
  m.sigma_minus = pass.margins.sigma_minus;
  if (pass.r_sigma.defined()) m.r_sigma = pass.r_sigma.item();

  const auto vars = pass.inner.ctx.mag_vars();
  const auto rec = diff::backward(pass.l_meta, vars, false);
  optimizer.apply(mag_blocks(params), rec.gradients);
  ++params.version;
  guard_params(params, pass.outer, config);
  return m;
}

model::ParamGroup initial_params(const TrainConfig& config, const data::Dataset& dataset) {
  const auto spec = model::make_model_spec(config.model, dataset.view_shapes,
                                           derive_seed(config.seed, {kModelTag}));
  return model::init_param_group(spec);
}

TrainResult train(const TrainConfig& config, const data::Dataset& dataset,
                  const TrainOptions& options) {
  config.validate();
  if (dataset.m_views() < 2) throw std::invalid_argument("training needs at least two views");
  TrainResult result{initial_params(config, dataset), {}};
  auto& params = result.params;

  std::ofstream metrics_file;
  if (options.run_dir) {
    std::filesystem::create_directories(*options.run_dir);
    metrics_file.open(*options.run_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_file) throw std::runtime_error("cannot write " + (*options.run_dir / "metrics.jsonl").string());
  }
  auto meta_json = [&](std::size_t epoch) {
    return nlohmann::json{{"seed", config.seed},
                          {"epoch", epoch},
                          {"step", result.metrics.size()},
                          {"config", to_json(config)},
                          {"dataset", dataset.provenance}};
  };

  MemoryBank bank(dataset.m_views(), config.bank_capacity, config.model.feature_dim);
  Optimizer enc_opt(config.optimizer, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
  Optimizer mag_opt(config.optimizer, config.meta_lr, config.adam_beta1, config.adam_beta2,
                    config.adam_eps);
  const std::size_t n = std::min(config.batch_size, dataset.split.train.size());
  const bool meta_enabled = config.use_mag;

  auto run_step = [&](const data::ViewBatch& batch, bool meta, std::size_t epoch,
                      std::uint64_t seed) {
    const model::ParamGroup before = params;
    StepMetrics m;
    try {
      m = meta ? meta_step(params, batch, bank, config, mag_opt, seed)
               : regular_step(params, batch, bank, config, enc_opt, seed);
    } catch (const DivergenceError& e) {
      if (options.run_dir) {
        save_checkpoint(*options.run_dir / "last_good.ckpt", before, meta_json(epoch));
        std::ofstream(*options.run_dir / "divergence.json")
            << nlohmann::json{{"error", e.what()}, {"diagnostics", e.diagnostics()}}.dump(2) << '\n';
      }
      throw;
    }
    m.step = result.metrics.size();
    m.epoch = epoch;
    if (config.check_phase_isolation) {
      const bool ok = meta ? same_values(before.theta, params.theta) &&
                                 same_values(before.vartheta, params.vartheta)
                           : same_values(before.omega, params.omega);
      if (!ok) throw std::logic_error("phase isolation violated at step " + std::to_string(m.step));
    }
    if (metrics_file.is_open()) metrics_file << m.to_json().dump() << '\n' << std::flush;
    if (options.on_step) options.on_step(m, before, params);
    result.metrics.push_back(std::move(m));
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const std::uint64_t regular_seed = derive_seed(config.seed, {kEpochTag, e, 0});
    const std::uint64_t meta_seed = derive_seed(config.seed, {kEpochTag, e, 1});
    for (std::size_t t = 0;; ++t) {
      const auto batch = data::next_batch(dataset, t, n, regular_seed);
      if (!batch) break;
      const auto tt = static_cast<std::uint64_t>(t);
      run_step(*batch, false, epoch, derive_seed(config.seed, {kRetrievalTag, e, 0, tt}));
      if (meta_enabled && config.schedule == Schedule::Interleaved) {
        run_step(*batch, true, epoch, derive_seed(config.seed, {kRetrievalTag, e, 1, tt}));
      }
    }
    if (meta_enabled && config.schedule == Schedule::TwoPass) {
      for (std::size_t t = 0;; ++t) {
        const auto batch = data::next_batch(dataset, t, n, meta_seed);
        if (!batch) break;
        const auto tt = static_cast<std::uint64_t>(t);
        run_step(*batch, true, epoch, derive_seed(config.seed, {kRetrievalTag, e, 1, tt}));
      }
    }
    if (options.run_dir && config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
      save_checkpoint(*options.run_dir / checkpoint_name(epoch + 1), params, meta_json(epoch + 1));
    }
  }
  if (options.run_dir) save_checkpoint(*options.run_dir / "final.ckpt", params, meta_json(config.epochs));
  return result;
}

std::string to_string(LossKind k) { return k == LossKind::Oucl ? "oucl" : "infonce"; }
std::string to_string(Schedule s) { return s == Schedule::TwoPass ? "two_pass" : "interleaved"; }
std::string to_string(OptimizerKind o) { return o == OptimizerKind::Sgd ? "sgd" : "adam"; }

namespace {

LossKind loss_from_string(const std::string& s) {
  if (s == "oucl") return LossKind::Oucl;
  if (s == "infonce") return LossKind::InfoNce;
  throw std::invalid_argument("loss: unknown value " + s);
}
Schedule schedule_from_string(const std::string& s) {
  if (s == "two_pass") return Schedule::TwoPass;
  if (s == "interleaved") return Schedule::Interleaved;
  throw std::invalid_argument("schedule: unknown value " + s);
}
OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("optimizer: unknown value " + s);
}
losses::OuclForm form_from_string(const std::string& s) {
  if (s == "weighted") return losses::OuclForm::Weighted;
  if (s == "reduced") return losses::OuclForm::Reduced;
  throw std::invalid_argument("oucl_form: unknown value " + s);
}

nlohmann::json to_json(const model::ModelConfig& m) {
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& c : m.convs) convs.push_back({c.out_channels, c.kernel, c.stride});
  return {{"encoder_hidden", m.encoder_hidden}, {"rep_dim", m.rep_dim},
          {"head_hidden", m.head_hidden},       {"feature_dim", m.feature_dim},
          {"mag_hidden", m.mag_hidden},         {"activation", model::to_string(m.activation)},
          {"convs", convs}};
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& prefix) {
  if (!j.is_object()) throw std::invalid_argument(prefix + "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("unknown config key: " + prefix + key);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& prefix = "") {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw std::invalid_argument("config key " + prefix + key + " must be a non-negative integer");
    }
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("config key " + prefix + key + " has the wrong type");
  }
}

model::ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"encoder_hidden", "rep_dim", "head_hidden", "feature_dim", "mag_hidden",
                     "activation", "convs"},
                 "model.");
  model::ModelConfig m;
  read(j, "encoder_hidden", m.encoder_hidden, "model.");
  read(j, "rep_dim", m.rep_dim, "model.");
  read(j, "head_hidden", m.head_hidden, "model.");
  read(j, "feature_dim", m.feature_dim, "model.");
  read(j, "mag_hidden", m.mag_hidden, "model.");
  std::string act = model::to_string(m.activation);
  read(j, "activation", act, "model.");
  m.activation = model::activation_from_string(act);
  if (j.contains("convs")) {
    m.convs.clear();
    for (const auto& c : j.at("convs")) {
      const auto v = c.get<std::vector<std::size_t>>();
      if (v.size() != 3) throw std::invalid_argument("model.convs entries are [out, kernel, stride]");
      m.convs.push_back({v[0], v[1], v[2]});
    }
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"model", to_json(c.model)},
          {"loss", to_string(c.loss)},
          {"use_mag", c.use_mag},
          {"beta", c.oucl.beta},
          {"gamma", c.oucl.gamma},
          {"weighting", losses::to_string(c.oucl.weighting)},
          {"phi_dec", c.oucl.phi_dec},
          {"lambda", c.oucl.lambda},
          {"oucl_form", c.oucl.form == losses::OuclForm::Weighted ? "weighted" : "reduced"},
          {"tau", c.tau},
          {"alpha", c.alpha},
          {"delta", c.delta},
          {"margin", losses::to_string(c.margin)},
          {"include_aug_aug", c.include_aug_aug},
          {"lr", c.lr},
          {"meta_lr", c.meta_lr},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"bank_capacity", c.bank_capacity},
          {"bank_k", c.bank_k},
          {"schedule", to_string(c.schedule)},
          {"optimizer", to_string(c.optimizer)},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"checkpoint_every", c.checkpoint_every},
          {"divergence_limit", c.divergence_limit},
          {"check_phase_isolation", c.check_phase_isolation}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  std::set<std::string> known;
  const nlohmann::json defaults = to_json(TrainConfig{});
  for (const auto& item : defaults.items()) known.insert(item.key());
  reject_unknown(j, known, "");

  TrainConfig c;
  read(j, "seed", c.seed);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  std::string s = to_string(c.loss);
  read(j, "loss", s);
  c.loss = loss_from_string(s);
  read(j, "use_mag", c.use_mag);
  read(j, "beta", c.oucl.beta);
  read(j, "gamma", c.oucl.gamma);
  s = losses::to_string(c.oucl.weighting);
  read(j, "weighting", s);
  c.oucl.weighting = losses::weighting_from_string(s);
  read(j, "phi_dec", c.oucl.phi_dec);
  read(j, "lambda", c.oucl.lambda);
  s = "weighted";
  read(j, "oucl_form", s);
  c.oucl.form = form_from_string(s);
  read(j, "tau", c.tau);
  read(j, "alpha", c.alpha);
  read(j, "delta", c.delta);
  s = losses::to_string(c.margin);
  read(j, "margin", s);
  c.margin = losses::margin_variant_from_string(s);
  read(j, "include_aug_aug", c.include_aug_aug);
  read(j, "lr", c.lr);
  read(j, "meta_lr", c.meta_lr);
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "bank_capacity", c.bank_capacity);
  read(j, "bank_k", c.bank_k);
  s = to_string(c.schedule);
  read(j, "schedule", s);
  c.schedule = schedule_from_string(s);
  s = to_string(c.optimizer);
  read(j, "optimizer", s);
  c.optimizer = optimizer_from_string(s);
  read(j, "adam_beta1", c.adam_beta1);
  read(j, "adam_beta2", c.adam_beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "divergence_limit", c.divergence_limit);
  read(j, "check_phase_isolation", c.check_phase_isolation);
  return c;
}

}  // namespace metaug::train
