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

#include "metaug/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metaug/log.hpp"

namespace metaug::losses {
namespace {

using diff::Var;

void require_unit_rows(const Tensor& t, const char* what) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double norm = l2_norm(t.row_view(r));
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(r) +
                                  " has norm " + std::to_string(norm) + ", expected 1");
    }
  }
}

Var cosine_matrix(const Var& a, const Var& b) {
  require_unit_rows(a.value(), "similarity");
  require_unit_rows(b.value(), "similarity");
  return diff::matmul(a, diff::transpose(b));
}

std::vector<std::size_t> diagonal(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i * n + i;
  return idx;
}

std::vector<std::size_t> off_diagonal(std::size_t n) {
  std::vector<std::size_t> idx;
  idx.reserve(n * (n - (n > 0 ? 1 : 0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (i != k) idx.push_back(i * n + k);
  return idx;
}

// Accumulates 1 x k pieces of a pair set plus optional metadata.
struct PairBuilder {
  std::vector<Var> parts;
  PairSet out;

  void add(const Var& matrix, std::vector<std::size_t> idx) {
    if (idx.empty()) return;
    const std::size_t k = idx.size();
    parts.push_back(diff::gather(matrix, std::move(idx), {1, k}));
  }
  PairSet finish() {
    out.d = parts.empty() ? diff::constant(Tensor(1, 0)) : diff::concat_row_vectors(parts);
    return std::move(out);
  }
};

// Pairs between rows of `left` and rows of `right` for one view combination.
void add_block(PairBuilder& pos, PairBuilder& neg, const Var& left, const Var& right,
               const FeatureSet& f, FeatureRef lref, FeatureRef rref, bool metadata) {
  const std::size_t n = f.n();
  const Var d = similarity_matrix(left, right);
  pos.add(d, diagonal(n));
  neg.add(d, off_diagonal(n));
  if (!metadata) return;
  for (std::size_t i = 0; i < n; ++i) {
    lref.sample_id = f.ids[i];
    rref.sample_id = f.ids[i];
    pos.out.pairs.push_back({lref, rref, Polarity::Positive});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (i == k) continue;
      lref.sample_id = f.ids[i];
      rref.sample_id = f.ids[k];
      neg.out.pairs.push_back({lref, rref, Polarity::Negative});
    }
}

Var sum_of_lse(const std::vector<Var>& blocks) {
  // Row-wise log-sum-exp across several A x K_b blocks.
  Var acc;
  for (const auto& b : blocks) {
    if (b.shape().cols == 0) continue;
    const Var l = diff::logsumexp_rows(b);
    acc = acc.defined() ? acc + diff::softplus(l - acc) : l;
  }
  return acc;
}

}  // namespace

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("similarity: vectors differ in length");
  for (auto v : {a, b}) {
    if (std::abs(l2_norm(v) - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument("similarity: inputs must be unit-normalized");
    }
  }
  return 0.5 * (1.0 + dot(a, b));
}

Var similarity_matrix(const Var& a, const Var& b) {
  return diff::affine(cosine_matrix(a, b), 0.5, 0.5);
}

std::span<const double> PairSet::values() const {
  if (!d.defined()) return {};
  return d.value().values();
}

PairSets enumerate_pairs(const FeatureSet& f, const BankSample* bank, const PairOptions& options) {
  const std::size_t m = f.m_views();
  if (m < 2) throw std::invalid_argument("enumerate_pairs: at least two views are required");
  for (const auto& z : f.z) {
    if (z.shape().rows != f.n()) throw ShapeError("enumerate_pairs: feature rows differ from ids");
  }
  const bool want_aug = options.include_augmented && f.has_augmented();
  if (want_aug && f.zhat.size() != m) throw ShapeError("enumerate_pairs: z-hat needs every view");
  const bool meta = options.keep_metadata;

  PairBuilder pos, neg, apos, aneg, aapos, aaneg;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j + 1; k < m; ++k)
      add_block(pos, neg, f.z[j], f.z[k], f, {0, j, Origin::Original}, {0, k, Origin::Original},
                meta);

  if (bank != nullptr && !bank->empty()) {
    for (std::size_t j = 0; j < m; ++j) {
      const Tensor& slots = bank->slots.at(j);
      if (slots.rows() == 0) continue;
      const Var d = similarity_matrix(f.z[j], diff::constant(slots));
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < f.n(); ++i) {
        for (auto s : bank->picks.at(j).at(i)) {
          idx.push_back(i * slots.rows() + s);
          if (meta) {
            neg.out.pairs.push_back({{f.ids[i], j, Origin::Original},
                                     {bank->slot_ids[j][s], bank->source_view[j], Origin::Memory},
                                     Polarity::Negative});
          }
        }
      }
      neg.add(d, std::move(idx));
    }
  }

  PairSets out;
  if (want_aug) {
    out.has_augmented = true;
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k)
        add_block(apos, aneg, f.z[j], f.zhat[k], f, {0, j, Origin::Original},
                  {0, k, Origin::Augmented}, meta);
    if (options.include_aug_aug) {
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k)
          add_block(aapos, aaneg, f.zhat[j], f.zhat[k], f, {0, j, Origin::Augmented},
                    {0, k, Origin::Augmented}, meta);
    }
  }
  out.pos = pos.finish();
  out.neg = neg.finish();
  out.aug_pos = apos.finish();
  out.aug_neg = aneg.finish();
  out.augaug_pos = aapos.finish();
  out.augaug_neg = aaneg.finish();
  return out;
}

Var contrastive_loss(const Var& pos_cos, std::span<const Var> neg_cos, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be positive");
  if (pos_cos.shape().cols != 1) throw ShapeError("contrastive_loss: positives must be A x 1");
  std::vector<Var> scaled;
  for (const auto& b : neg_cos) {
    if (b.shape().rows != pos_cos.shape().rows) {
      throw ShapeError("contrastive_loss: negative block " + to_string(b.shape()) + " for " +
                       to_string(pos_cos.shape()) + " positives");
    }
    scaled.push_back(b / tau);
  }
  const Var lneg = sum_of_lse(scaled);
  if (!lneg.defined()) throw std::invalid_argument("contrastive_loss: no negatives (K = 0)");
  // -log(e^p / (e^p + sum e^n)) = softplus(lse(n) - p)
  return diff::mean(diff::softplus(lneg - pos_cos / tau));
}

Var infonce_objective(const FeatureSet& f, const BankSample* bank, double tau, bool augmented) {
  const std::size_t m = f.m_views();
  const std::size_t n = f.n();
  if (m < 2) throw std::invalid_argument("infonce_objective: at least two views are required");
  if (augmented && f.zhat.size() != m) {
    throw std::invalid_argument("infonce_objective: augmented features are missing");
  }
  const bool use_bank = !augmented && bank != nullptr && !bank->empty();
  const std::size_t k_bank = use_bank ? bank->min_picks() : 0;

  std::vector<Var> terms;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      if (!augmented && j == k) continue;
      const Var& keys = augmented ? f.zhat[k] : f.z[k];
      const Var c = cosine_matrix(f.z[j], keys);
      std::vector<Var> negs = {diff::gather(c, off_diagonal(n), {n, n - 1})};
      if (k_bank > 0) {
        const Tensor& slots = bank->slots.at(j);
        const Var cb = cosine_matrix(f.z[j], diff::constant(slots));
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t s = 0; s < k_bank; ++s) idx.push_back(i * slots.rows() + bank->picks[j][i][s]);
        negs.push_back(diff::gather(cb, std::move(idx), {n, k_bank}));
      }
      terms.push_back(contrastive_loss(diff::gather(c, diagonal(n), {n, 1}), negs, tau));
    }
  }
  Var total = terms.front();
  for (std::size_t t = 1; t < terms.size(); ++t) total = total + terms[t];
  return total / static_cast<double>(terms.size());
}

Var oucl_sum_form(const PairSet& pos, const PairSet& neg, double lambda) {
  Var acc = diff::constant(lambda);
  if (!neg.empty()) acc = acc + diff::sum(neg.d);
  if (!pos.empty()) acc = acc - diff::sum(pos.d);
  return diff::relu(acc);
}

void OuclConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("oucl: beta must be positive");
  if (!(gamma > 0.0 && gamma <= 0.5)) throw std::invalid_argument("oucl: gamma must lie in (0, 0.5]");
  if (weighting == Weighting::GammaBar && !(phi_dec > 0.0)) {
    throw std::invalid_argument("oucl: phi_dec must be positive");
  }
}

Var oucl(const Var& d_pos, const Var& d_neg, const OuclConfig& cfg) {
  cfg.validate();
  if (d_pos.shape().cols == 0 || d_neg.shape().cols == 0) {
    log_notice("oucl: empty positive or negative set, loss is 0");
    return diff::constant(0.0);
  }
  const double beta = cfg.beta;
  const double atten = cfg.weighting == Weighting::GammaBar ? 1.0 / cfg.phi_dec : 1.0;
  Var t_neg, t_pos;
  double c = 0.0;
  if (cfg.form == OuclForm::Reduced) {
    t_neg = diff::square(d_neg) * (beta * atten);
    t_pos = diff::square(d_pos - 1.0) * (beta * atten);
    c = -2.0 * beta * atten * cfg.gamma * cfg.gamma;
  } else if (cfg.weighting == Weighting::None) {
    t_neg = d_neg * beta;
    t_pos = d_pos * -beta;
    c = beta * cfg.lambda;
  } else {
    auto weights = [&](const Tensor& d, double sign, double offset) {
      Tensor w = d;
      for (auto& v : w.values()) v = std::max(sign * (v - offset), 0.0) * atten;
      return diff::constant(std::move(w));
    };
    const Var g_neg = weights(d_neg.value(), 1.0, cfg.o_minus());  // [d- - O-]_+
    const Var g_pos = weights(d_pos.value(), -1.0, cfg.o_plus());  // [O+ - d+]_+
    t_neg = g_neg * (d_neg - cfg.gamma_minus()) * beta;
    t_pos = g_pos * (d_pos - cfg.gamma_plus()) * -beta;
  }
  const Var exponent = diff::logsumexp(t_neg) + diff::logsumexp(t_pos) + c;
  return diff::softplus(exponent) / beta;
}

Var oucl(const PairSet& pos, const PairSet& neg, const OuclConfig& config) {
  return oucl(pos.d.defined() ? pos.d : diff::constant(Tensor(1, 0)),
              neg.d.defined() ? neg.d : diff::constant(Tensor(1, 0)), config);
}

Margins compute_margins(std::span<const double> d_pos, std::span<const double> d_neg,
                        MarginVariant variant) {
  if (d_pos.empty() || d_neg.empty()) {
    throw std::invalid_argument("compute_margins: both pair sets must be non-empty");
  }
  const double m_pos = *std::min_element(d_pos.begin(), d_pos.end());
  const double m_neg = *std::max_element(d_neg.begin(), d_neg.end());
  Margins out;
  out.variant = variant;
  switch (variant) {
    case MarginVariant::Large:
      out.sigma_plus = std::min(m_pos, m_neg);
      out.sigma_minus = std::max(m_pos, m_neg);
      break;
    case MarginVariant::Medium:
      out.sigma_plus = out.sigma_minus = 0.5 * (m_pos + m_neg);
      break;
    case MarginVariant::Small:
      out.sigma_plus = std::max(m_pos, m_neg);
      out.sigma_minus = std::min(m_pos, m_neg);
      break;
  }
  return out;
}

Margins compute_margins(const PairSet& pos, const PairSet& neg, MarginVariant variant) {
  return compute_margins(pos.values(), neg.values(), variant);
}

Var margin_regularization(const PairSet& aug_pos, const PairSet& aug_neg, const Margins& margins) {
  Var r = diff::constant(0.0);
  if (!aug_pos.empty()) r = r + diff::mean(diff::relu(aug_pos.d - margins.sigma_plus));
  if (!aug_neg.empty()) r = r + diff::mean(diff::relu(margins.sigma_minus - aug_neg.d));
  return r;
}

ObjectiveTerms metaug_objective(const PairSets& pairs, const OuclConfig& config, double delta) {
  if (delta < 0.0) throw std::invalid_argument("metaug_objective: delta must be >= 0");
  if (delta > 0.0 && !pairs.has_augmented) {
    throw std::invalid_argument("metaug_objective: delta > 0 needs augmented features");
  }
  ObjectiveTerms out;
  out.ori = oucl(pairs.pos, pairs.neg, config);
  out.total = out.ori;
  if (pairs.has_augmented) {
    auto join = [](const PairSet& a, const PairSet& b) {
      if (b.empty()) return a.d;
      const Var parts[] = {a.d, b.d};
      return diff::concat_row_vectors(parts);
    };
    out.aug = oucl(join(pairs.aug_pos, pairs.augaug_pos), join(pairs.aug_neg, pairs.augaug_neg),
                   config);
    if (delta > 0.0) out.total = out.ori + out.aug * delta;
  }
  return out;
}

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::None: return "none";
    case Weighting::Gamma: return "gamma";
    case Weighting::GammaBar: return "gamma_bar";
  }
  return "none";
}

Weighting weighting_from_string(const std::string& s) {
  if (s == "none") return Weighting::None;
  if (s == "gamma") return Weighting::Gamma;
  if (s == "gamma_bar") return Weighting::GammaBar;
  throw std::invalid_argument("unknown weighting: " + s);
}

std::string to_string(MarginVariant v) {
  switch (v) {
    case MarginVariant::Large: return "large";
    case MarginVariant::Medium: return "medium";
    case MarginVariant::Small: return "small";
  }
  return "large";
}

MarginVariant margin_variant_from_string(const std::string& s) {
  if (s == "large") return MarginVariant::Large;
  if (s == "medium") return MarginVariant::Medium;
  if (s == "small") return MarginVariant::Small;
  throw std::invalid_argument("unknown margin variant: " + s);
}

}  // namespace metaug::losses
