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

#include "metaug/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "metaug/random.hpp"

namespace metaug::model {
namespace {

std::atomic<std::uint64_t> g_next_uid{1};

struct ConvGeometry {
  std::size_t in_h, in_w, in_c, out_h, out_w;
};

std::vector<ConvGeometry> conv_geometry(const NetworkSpec& spec) {
  std::vector<ConvGeometry> out;
  std::size_t h = spec.input.height, w = spec.input.width, c = spec.input.channels;
  for (const auto& conv : spec.convs) {
    if (conv.kernel == 0 || conv.stride == 0 || h < conv.kernel || w < conv.kernel) {
      throw ShapeError("conv layer (kernel " + std::to_string(conv.kernel) +
                       ") does not fit a " + std::to_string(h) + "x" + std::to_string(w) +
                       " input");
    }
    const std::size_t oh = (h - conv.kernel) / conv.stride + 1;
    const std::size_t ow = (w - conv.kernel) / conv.stride + 1;
    out.push_back({h, w, c, oh, ow});
    h = oh;
    w = ow;
    c = conv.out_channels;
  }
  return out;
}

std::size_t conv_flat_size(const NetworkSpec& spec) {
  if (spec.convs.empty()) return spec.input.size();
  const auto geo = conv_geometry(spec);
  return geo.back().out_h * geo.back().out_w * spec.convs.back().out_channels;
}

diff::Var activate(Activation a, const diff::Var& x) {
  switch (a) {
    case Activation::Relu: return diff::relu(x);
    case Activation::Tanh: return diff::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

// Rows of the im2col matrix: (sample, oy, ox); columns: (ky, kx, channel).
std::vector<std::size_t> im2col_indices(std::size_t n, const ConvGeometry& g,
                                        const ConvLayerSpec& conv) {
  const std::size_t k = conv.kernel;
  std::vector<std::size_t> idx;
  idx.reserve(n * g.out_h * g.out_w * k * k * g.in_c);
  const std::size_t sample_size = g.in_h * g.in_w * g.in_c;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t y = oy * conv.stride + ky;
            const std::size_t x = ox * conv.stride + kx;
            for (std::size_t c = 0; c < g.in_c; ++c)
              idx.push_back(i * sample_size + (y * g.in_w + x) * g.in_c + c);
          }
  return idx;
}

diff::Var dense(const diff::Var& x, std::span<const diff::Var> params, std::size_t& cursor,
                bool bias) {
  diff::Var y = diff::matmul(x, params[cursor++]);
  if (bias) y = y + params[cursor++];
  return y;
}

}  // namespace

std::size_t NetworkSpec::output_size() const {
  if (!widths.empty()) return widths.back();
  return kind == NetworkKind::Conv ? conv_flat_size(*this) : input.size();
}

std::vector<Shape> param_shapes(const NetworkSpec& spec) {
  std::vector<Shape> shapes;
  std::size_t in = spec.input.size();
  if (spec.kind == NetworkKind::Conv) {
    const auto geo = conv_geometry(spec);
    for (std::size_t l = 0; l < spec.convs.size(); ++l) {
      const auto& conv = spec.convs[l];
      shapes.push_back({conv.kernel * conv.kernel * geo[l].in_c, conv.out_channels});
      if (spec.bias) shapes.push_back({1, conv.out_channels});
    }
    in = conv_flat_size(spec);
  }
  for (auto w : spec.widths) {
    shapes.push_back({in, w});
    if (spec.bias) shapes.push_back({1, w});
    in = w;
  }
  return shapes;
}

ParamSet init_params(const NetworkSpec& spec) {
  Rng rng(spec.seed);
  const auto shapes = param_shapes(spec);
  const std::size_t per_layer = spec.bias ? 2 : 1;
  const std::size_t n_layers = shapes.size() / per_layer;
  ParamSet params;
  for (std::size_t layer = 0; layer < n_layers; ++layer) {
    const Shape w_shape = shapes[layer * per_layer];
    const double bound = 1.0 / std::sqrt(static_cast<double>(w_shape.rows));
    const bool zero = spec.zero_init_last && layer + 1 == n_layers;
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t b = 0; b < per_layer; ++b) {
      const Shape s = shapes[layer * per_layer + b];
      Tensor t(s.rows, s.cols);
      for (auto& v : t.values()) v = u(rng);
      if (zero) t = Tensor(s.rows, s.cols);
      params.push_back(std::move(t));
    }
  }
  return params;
}

diff::Var forward(const NetworkSpec& spec, std::span<const diff::Var> params, const diff::Var& x) {
  if (x.shape().cols != spec.input_size()) {
    throw ShapeError("network expects inputs of width " + std::to_string(spec.input_size()) +
                     ", got " + to_string(x.shape()));
  }
  const auto shapes = param_shapes(spec);
  if (params.size() != shapes.size()) {
    throw ShapeError("network expects " + std::to_string(shapes.size()) +
                     " parameter blocks, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape() != shapes[i]) {
      throw ShapeError("parameter block " + std::to_string(i) + " has shape " +
                       to_string(params[i].shape()) + ", expected " + to_string(shapes[i]));
    }
  }

  const std::size_t n = x.shape().rows;
  const std::size_t total_layers = spec.convs.size() + spec.widths.size();
  std::size_t layer = 0;
  std::size_t cursor = 0;
  diff::Var y = x;

  if (spec.kind == NetworkKind::Conv) {
    const auto geo = conv_geometry(spec);
    for (std::size_t l = 0; l < spec.convs.size(); ++l) {
      const auto& conv = spec.convs[l];
      const auto& g = geo[l];
      const std::size_t patch = conv.kernel * conv.kernel * g.in_c;
      diff::Var cols = diff::gather(y, im2col_indices(n, g, conv), {n * g.out_h * g.out_w, patch});
      diff::Var maps = dense(cols, params, cursor, spec.bias);
      if (++layer < total_layers) maps = activate(spec.activation, maps);
      // (n * oh * ow) x C row-major is already n x (oh * ow * C) in HWC order.
      std::vector<std::size_t> same(maps.value().size());
      std::iota(same.begin(), same.end(), 0);
      y = diff::gather(maps, std::move(same), {n, g.out_h * g.out_w * conv.out_channels});
    }
  }
  for (std::size_t l = 0; l < spec.widths.size(); ++l) {
    y = dense(y, params, cursor, spec.bias);
    if (++layer < total_layers) y = activate(spec.activation, y);
  }
  return y;
}

std::size_t ModelSpec::feature_dim() const {
  return heads.empty() ? 0 : heads.front().output_size();
}

ModelSpec make_model_spec(const ModelConfig& config, std::span<const data::ViewShape> views,
                          std::uint64_t seed) {
  if (config.rep_dim == 0 || config.feature_dim == 0) {
    throw std::invalid_argument("rep_dim and feature_dim must be positive");
  }
  ModelSpec spec;
  for (std::size_t j = 0; j < views.size(); ++j) {
    const auto view_tag = static_cast<std::uint64_t>(j);
    NetworkSpec enc;
    enc.input = views[j];
    enc.activation = config.activation;
    enc.seed = derive_seed(seed, {10, view_tag});
    if (views[j].is_image()) {
      enc.kind = NetworkKind::Conv;
      enc.convs = config.convs;
      enc.widths = {config.rep_dim};
    } else {
      enc.widths = config.encoder_hidden;
      enc.widths.push_back(config.rep_dim);
    }
    (void)param_shapes(enc);  // validates conv geometry

    NetworkSpec head;
    head.input = {1, config.rep_dim, 1};
    head.widths = config.head_hidden;
    head.widths.push_back(config.feature_dim);
    head.activation = config.activation;
    head.bias = false;
    head.seed = derive_seed(seed, {20, view_tag});

    NetworkSpec mag;
    mag.input = {1, config.feature_dim, 1};
    const std::size_t hidden = config.mag_hidden == 0 ? config.feature_dim : config.mag_hidden;
    mag.widths = {hidden, config.feature_dim};
    mag.activation = Activation::Tanh;
    mag.zero_init_last = true;
    mag.seed = derive_seed(seed, {30, view_tag});

    spec.encoders.push_back(std::move(enc));
    spec.heads.push_back(std::move(head));
    spec.mags.push_back(std::move(mag));
  }
  return spec;
}

std::size_t ParamGroup::parameter_count() const {
  std::size_t n = 0;
  for (const auto* group : {&theta, &vartheta, &omega})
    for (const auto& set : *group)
      for (const auto& t : set) n += t.size();
  return n;
}

double ParamGroup::max_block_norm() const {
  double worst = 0.0;
  for (const auto* group : {&theta, &vartheta, &omega})
    for (const auto& set : *group)
      for (const auto& t : set) worst = std::max(worst, l2_norm(t.values()));
  return worst;
}

ParamGroup init_param_group(const ModelSpec& spec) {
  std::vector<ParamSet> theta, vartheta, omega;
  for (std::size_t j = 0; j < spec.m_views(); ++j) {
    theta.push_back(init_params(spec.encoders[j]));
    vartheta.push_back(init_params(spec.heads[j]));
    omega.push_back(init_params(spec.mags[j]));
  }
  return adopt_params(spec, std::move(theta), std::move(vartheta), std::move(omega));
}

ParamGroup adopt_params(ModelSpec spec, std::vector<ParamSet> theta,
                        std::vector<ParamSet> vartheta, std::vector<ParamSet> omega) {
  const std::size_t m = spec.m_views();
  if (spec.heads.size() != m || spec.mags.size() != m || theta.size() != m ||
      vartheta.size() != m || omega.size() != m) {
    throw ShapeError("parameter group needs exactly one entry per view in every role");
  }
  auto check = [](const NetworkSpec& net, const ParamSet& set, const char* role) {
    const auto shapes = param_shapes(net);
    if (shapes.size() != set.size()) {
      throw ShapeError(std::string(role) + ": wrong number of parameter blocks");
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (shapes[i] != set[i].shape()) {
        throw ShapeError(std::string(role) + ": block " + std::to_string(i) + " is " +
                         to_string(set[i].shape()) + ", expected " + to_string(shapes[i]));
      }
    }
  };
  for (std::size_t j = 0; j < m; ++j) {
    check(spec.encoders[j], theta[j], "encoder");
    check(spec.heads[j], vartheta[j], "projection head");
    check(spec.mags[j], omega[j], "augmentation generator");
  }
  ParamGroup g;
  g.spec = std::move(spec);
  g.theta = std::move(theta);
  g.vartheta = std::move(vartheta);
  g.omega = std::move(omega);
  g.uid = g_next_uid.fetch_add(1);
  return g;
}

ForwardContext ForwardContext::from_params(const ParamGroup& params, bool train_encoders,
                                           bool train_mags) {
  auto leaves = [](const std::vector<ParamSet>& sets, bool trainable) {
    std::vector<VarSet> out;
    for (const auto& set : sets) {
      VarSet vars;
      for (const auto& t : set) vars.push_back(trainable ? diff::parameter(t) : diff::constant(t));
      out.push_back(std::move(vars));
    }
    return out;
  };
  ForwardContext ctx;
  ctx.spec_ = std::make_shared<const ModelSpec>(params.spec);
  ctx.theta_ = leaves(params.theta, train_encoders);
  ctx.vartheta_ = leaves(params.vartheta, train_encoders);
  ctx.omega_ = leaves(params.omega, train_mags);
  ctx.uid_ = params.uid;
  ctx.version_ = params.version;
  return ctx;
}

diff::Var ForwardContext::encode(std::size_t view, const diff::Var& x) const {
  return forward(spec_->encoders.at(view), theta_.at(view), x);
}

diff::Var ForwardContext::project(std::size_t view, const diff::Var& h) const {
  return diff::l2_normalize_rows(forward(spec_->heads.at(view), vartheta_.at(view), h));
}

// Written as z + (n(z + r) - n(z)) so a zero residual returns z bit for bit;
// renormalizing an already unit row is not exact. For unit z the extra n(z)
// path only adds gradient along z, which the upstream normalization removes.
diff::Var ForwardContext::augment(std::size_t view, const diff::Var& z) const {
  const diff::Var r = forward(spec_->mags.at(view), omega_.at(view), z);
  return z + (diff::l2_normalize_rows(z + r) - diff::l2_normalize_rows(z));
}

VarSet ForwardContext::encoder_vars() const {
  VarSet out;
  for (const auto& set : theta_) out.insert(out.end(), set.begin(), set.end());
  for (const auto& set : vartheta_) out.insert(out.end(), set.begin(), set.end());
  return out;
}

VarSet ForwardContext::mag_vars() const {
  VarSet out;
  for (const auto& set : omega_) out.insert(out.end(), set.begin(), set.end());
  return out;
}

FastWeights make_fast_weights(const ForwardContext& inner, const diff::Var& loss, double lr) {
  const VarSet vars = inner.encoder_vars();
  const auto rec = diff::backward(loss, vars, /*record=*/true);
  FastWeights fw;
  std::size_t k = 0;
  auto step_sets = [&](const std::vector<VarSet>& sets) {
    std::vector<VarSet> out;
    for (const auto& set : sets) {
      VarSet ring;
      for (const auto& v : set) {
        ring.push_back(diff::sgd_expression(v, rec.gradients[k], lr));
        ++k;
      }
      out.push_back(std::move(ring));
    }
    return out;
  };
  fw.theta_ring = step_sets(inner.theta());
  fw.vartheta_ring = step_sets(inner.vartheta());
  fw.omega = inner.omega();
  fw.source_loss = loss;
  fw.source_uid = inner.source_uid();
  fw.source_version = inner.source_version();
  return fw;
}

ForwardContext substitute_fast_weights(const ParamGroup& base, const FastWeights& fw) {
  if (fw.source_uid != base.uid || fw.source_version != base.version) {
    throw std::invalid_argument("fast weights were not derived from this parameter group");
  }
  if (fw.theta_ring.size() != base.m_views() || fw.vartheta_ring.size() != base.m_views() ||
      fw.omega.size() != base.m_views()) {
    throw ShapeError("fast weights do not cover every view");
  }
  ForwardContext ctx;
  ctx.spec_ = std::make_shared<const ModelSpec>(base.spec);
  ctx.theta_ = fw.theta_ring;
  ctx.vartheta_ = fw.vartheta_ring;
  ctx.omega_ = fw.omega;
  ctx.uid_ = base.uid;
  ctx.version_ = base.version;
  return ctx;
}

void assign(std::vector<ParamSet>& dst, const std::vector<VarSet>& src) {
  if (dst.size() != src.size()) throw ShapeError("assign: view count mismatch");
  for (std::size_t j = 0; j < dst.size(); ++j) {
    if (dst[j].size() != src[j].size()) throw ShapeError("assign: block count mismatch");
    for (std::size_t b = 0; b < dst[j].size(); ++b) {
      if (dst[j][b].shape() != src[j][b].shape()) throw ShapeError("assign: block shape mismatch");
      dst[j][b] = src[j][b].value();
    }
  }
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation: " + s);
}

nlohmann::json to_json(const NetworkSpec& spec) {
  nlohmann::json convs = nlohmann::json::array();
  for (const auto& c : spec.convs) convs.push_back({c.out_channels, c.kernel, c.stride});
  return {{"kind", spec.kind == NetworkKind::Conv ? "conv" : "mlp"},
          {"input", {spec.input.height, spec.input.width, spec.input.channels}},
          {"convs", convs},
          {"widths", spec.widths},
          {"activation", to_string(spec.activation)},
          {"bias", spec.bias},
          {"zero_init_last", spec.zero_init_last},
          {"seed", spec.seed}};
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.kind = j.at("kind").get<std::string>() == "conv" ? NetworkKind::Conv : NetworkKind::Mlp;
  const auto input = j.at("input").get<std::vector<std::size_t>>();
  spec.input = {input.at(0), input.at(1), input.at(2)};
  for (const auto& c : j.at("convs")) {
    spec.convs.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(),
                          c.at(2).get<std::size_t>()});
  }
  spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  spec.activation = activation_from_string(j.at("activation").get<std::string>());
  spec.bias = j.at("bias").get<bool>();
  spec.zero_init_last = j.at("zero_init_last").get<bool>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

nlohmann::json to_json(const ModelSpec& spec) {
  auto list = [](const std::vector<NetworkSpec>& nets) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& n : nets) out.push_back(to_json(n));
    return out;
  };
  return {{"encoders", list(spec.encoders)}, {"heads", list(spec.heads)}, {"mags", list(spec.mags)}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  auto list = [](const nlohmann::json& arr) {
    std::vector<NetworkSpec> out;
    for (const auto& n : arr) out.push_back(network_spec_from_json(n));
    return out;
  };
  return {list(j.at("encoders")), list(j.at("heads")), list(j.at("mags"))};
}

}  // namespace metaug::model
