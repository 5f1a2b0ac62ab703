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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaug/data.hpp"
#include "metaug/diff.hpp"
#include "metaug/tensor.hpp"

namespace metaug::model {

enum class Activation { Relu, Tanh, Identity };
enum class NetworkKind { Mlp, Conv };

struct ConvLayerSpec {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 2;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// Layer layout of one network. For Mlp, `widths` lists every layer's output
/// width. For Conv, the conv stack runs first (valid padding), then `widths`
/// fully connected layers on the flattened maps. The activation sits between
/// layers, never after the last one.
struct NetworkSpec {
  NetworkKind kind = NetworkKind::Mlp;
  data::ViewShape input;
  std::vector<ConvLayerSpec> convs;
  std::vector<std::size_t> widths;
  Activation activation = Activation::Relu;
  bool bias = true;
  bool zero_init_last = false;
  std::uint64_t seed = 0;

  std::size_t input_size() const { return input.size(); }
  std::size_t output_size() const;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

using ParamSet = std::vector<Tensor>;

std::vector<Shape> param_shapes(const NetworkSpec& spec);

/// Uniform fan-in initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from
/// `spec.seed`; the last layer is zeroed when `zero_init_last` is set.
ParamSet init_params(const NetworkSpec& spec);

diff::Var forward(const NetworkSpec& spec, std::span<const diff::Var> params, const diff::Var& x);

struct ModelSpec {
  std::vector<NetworkSpec> encoders;  // f_theta, one per view
  std::vector<NetworkSpec> heads;     // g_vartheta
  std::vector<NetworkSpec> mags;      // a_omega, residual
  std::size_t m_views() const { return encoders.size(); }
  std::size_t feature_dim() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ModelConfig {
  std::vector<std::size_t> encoder_hidden = {64};
  std::size_t rep_dim = 32;
  std::vector<std::size_t> head_hidden = {};
  std::size_t feature_dim = 16;
  std::size_t mag_hidden = 0;  // 0 means feature_dim
  Activation activation = Activation::Relu;
  std::vector<ConvLayerSpec> convs = {{8, 3, 2}, {16, 3, 2}};
};

/// Per-view specs with seeds derived from `seed`. Image views get the conv
/// encoder, vector views the MLP. Heads are bias-free; MAGs are two-layer tanh
/// MLPs with a zeroed output layer.
ModelSpec make_model_spec(const ModelConfig& config, std::span<const data::ViewShape> views,
                          std::uint64_t seed);

/// theta, vartheta and omega, one ParamSet per view each.
struct ParamGroup {
  ModelSpec spec;
  std::vector<ParamSet> theta;
  std::vector<ParamSet> vartheta;
  std::vector<ParamSet> omega;
  std::uint64_t uid = 0;
  std::uint64_t version = 0;  // bumped on every in-place update

  std::size_t m_views() const { return spec.m_views(); }
  std::size_t parameter_count() const;
  /// Largest Frobenius norm over all parameter blocks.
  double max_block_norm() const;
};

ParamGroup init_param_group(const ModelSpec& spec);

/// A ParamGroup with fresh identity (new uid) holding the given values.
ParamGroup adopt_params(ModelSpec spec, std::vector<ParamSet> theta,
                        std::vector<ParamSet> vartheta, std::vector<ParamSet> omega);

using VarSet = std::vector<diff::Var>;

struct FastWeights;

/// Differentiable view of a ParamGroup for one forward pass.
class ForwardContext {
 public:
  /// Leaves for every block; `train_encoders` marks theta and vartheta as
  /// parameters, `train_mags` does the same for omega.
  static ForwardContext from_params(const ParamGroup& params, bool train_encoders,
                                    bool train_mags);

  diff::Var encode(std::size_t view, const diff::Var& x) const;
  diff::Var project(std::size_t view, const diff::Var& h) const;
  diff::Var augment(std::size_t view, const diff::Var& z) const;

  const ModelSpec& spec() const { return *spec_; }
  std::size_t m_views() const { return spec_->m_views(); }
  const std::vector<VarSet>& theta() const { return theta_; }
  const std::vector<VarSet>& vartheta() const { return vartheta_; }
  const std::vector<VarSet>& omega() const { return omega_; }
  /// theta blocks then vartheta blocks, view-major.
  VarSet encoder_vars() const;
  VarSet mag_vars() const;

  std::uint64_t source_uid() const { return uid_; }
  std::uint64_t source_version() const { return version_; }

 private:
  friend ForwardContext substitute_fast_weights(const ParamGroup& base, const FastWeights& fw);

  std::shared_ptr<const ModelSpec> spec_;
  std::vector<VarSet> theta_, vartheta_, omega_;
  std::uint64_t uid_ = 0, version_ = 0;
};

/// theta - lr * grad and vartheta - lr * grad as recorded expressions, plus the
/// omega leaves they were computed against.
struct FastWeights {
  std::vector<VarSet> theta_ring;
  std::vector<VarSet> vartheta_ring;
  std::vector<VarSet> omega;
  diff::Var source_loss;
  std::uint64_t source_uid = 0;
  std::uint64_t source_version = 0;
};

/// One recorded SGD step on theta and vartheta of `inner` from `loss`.
FastWeights make_fast_weights(const ForwardContext& inner, const diff::Var& loss, double lr);

/// A context that reads the fast weights for theta and vartheta and the
/// omega leaves of the inner pass. Throws std::invalid_argument when `fw`
/// was derived from another ParamGroup or an older version of `base`.
ForwardContext substitute_fast_weights(const ParamGroup& base, const FastWeights& fw);

/// Overwrites every block of `dst` with the values of `src` (shapes must match).
void assign(std::vector<ParamSet>& dst, const std::vector<VarSet>& src);

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

}  // namespace metaug::model
