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
#include <span>
#include <string>
#include <vector>

#include "metaug/bank.hpp"
#include "metaug/diff.hpp"

namespace metaug::losses {

/// Unit-norm tolerance applied to every feature row entering a similarity.
inline constexpr double kUnitNormTolerance = 1e-6;

/// Projected features of one batch: z (and optionally z-hat) per view, n x f.
struct FeatureSet {
  std::vector<std::int64_t> ids;
  std::vector<diff::Var> z;
  std::vector<diff::Var> zhat;  // empty when no augmented features exist

  std::size_t n() const { return ids.size(); }
  std::size_t m_views() const { return z.size(); }
  bool has_augmented() const { return !zhat.empty(); }
};

/// d = (1 + cos) / 2 for unit vectors. Throws std::invalid_argument otherwise.
double similarity(std::span<const double> a, std::span<const double> b);

/// All pairwise d between rows of `a` and rows of `b` (both unit-norm rows).
diff::Var similarity_matrix(const diff::Var& a, const diff::Var& b);

enum class Origin { Original, Augmented, Memory };
enum class Polarity { Positive, Negative };

struct FeatureRef {
  std::int64_t sample_id = 0;
  std::size_t view = 0;
  Origin origin = Origin::Original;
  friend bool operator==(const FeatureRef&, const FeatureRef&) = default;
};

struct SimilarityPair {
  FeatureRef left;
  FeatureRef right;
  Polarity polarity = Polarity::Positive;
};

/// A set of pairs with their similarities as one 1 x K row.
struct PairSet {
  std::vector<SimilarityPair> pairs;  // filled only when metadata is requested
  diff::Var d;                        // 1 x K (1 x 0 when empty)

  std::size_t size() const { return d.defined() ? d.shape().cols : 0; }
  bool empty() const { return size() == 0; }
  std::span<const double> values() const;
};

struct PairSets {
  PairSet pos;         // original cross-view, same sample
  PairSet neg;         // original cross-view, different samples (+ bank)
  PairSet aug_pos;     // original vs augmented, same sample, all view combinations
  PairSet aug_neg;     // original vs augmented, different samples
  PairSet augaug_pos;  // augmented vs augmented cross-view (optional)
  PairSet augaug_neg;
  bool has_augmented = false;
};

struct PairOptions {
  bool include_augmented = true;
  bool include_aug_aug = false;
  bool keep_metadata = true;
};

/// Throws std::invalid_argument for fewer than two views.
PairSets enumerate_pairs(const FeatureSet& features, const BankSample* bank,
                         const PairOptions& options = {});

/// Mean over anchors of -log(c+ / (c+ + sum c-)) with c = exp(cos / tau).
/// `pos_cos` is A x 1, each block of `neg_cos` is A x K_b. Throws
/// std::invalid_argument when there are no negatives.
diff::Var contrastive_loss(const diff::Var& pos_cos, std::span<const diff::Var> neg_cos, double tau);

/// InfoNCE over every ordered view pair. With `augmented`, anchors are z and
/// keys are z-hat (all view combinations, no bank); otherwise keys are the
/// other view's z plus the bank negatives.
diff::Var infonce_objective(const FeatureSet& features, const BankSample* bank, double tau,
                            bool augmented);

/// [sum d- - sum d+ + lambda]_+
diff::Var oucl_sum_form(const PairSet& pos, const PairSet& neg, double lambda);

enum class Weighting { None, Gamma, GammaBar };
/// Weighted: the Gamma-weighted pairwise exponent with Gamma held constant.
/// Reduced: the squared-distance form obtained from O+ = 1 + gamma,
/// O- = -gamma, gamma+ = 1 - gamma, gamma- = gamma (divided by phi_dec
/// under GammaBar; weighting None is treated as Gamma).
enum class OuclForm { Weighted, Reduced };

struct OuclConfig {
  double beta = 16.0;
  double gamma = 0.4;
  Weighting weighting = Weighting::GammaBar;
  double phi_dec = 6.0;
  double lambda = 0.0;
  OuclForm form = OuclForm::Weighted;

  double o_plus() const { return 1.0 + gamma; }
  double o_minus() const { return -gamma; }
  double gamma_plus() const { return 1.0 - gamma; }
  double gamma_minus() const { return gamma; }
  void validate() const;
};

/// (1/beta) log(1 + sum_{k-} sum_{k+} exp(t-_{k-} + t+_{k+} + c)), evaluated as
/// softplus(lse(t-) + lse(t+) + c) / beta. An empty side gives 0 and a notice.
diff::Var oucl(const PairSet& pos, const PairSet& neg, const OuclConfig& config);
diff::Var oucl(const diff::Var& d_pos, const diff::Var& d_neg, const OuclConfig& config);

enum class MarginVariant { Large, Medium, Small };

struct Margins {
  double sigma_plus = 0.0;
  double sigma_minus = 0.0;
  MarginVariant variant = MarginVariant::Large;
};

/// Throws std::invalid_argument when either side is empty.
Margins compute_margins(std::span<const double> d_pos, std::span<const double> d_neg,
                        MarginVariant variant);
Margins compute_margins(const PairSet& pos, const PairSet& neg, MarginVariant variant);

/// mean [d(z^+) - sigma+]_+ + mean [sigma- - d(z^-)]_+ ; empty sets add 0.
diff::Var margin_regularization(const PairSet& aug_pos, const PairSet& aug_neg,
                                const Margins& margins);

struct ObjectiveTerms {
  diff::Var total;
  diff::Var ori;
  diff::Var aug;  // undefined without augmented pairs
};

/// L_ori + delta * L_aug with OUCL on both. Augmented-augmented pairs join
/// L_aug when present. Throws std::invalid_argument if delta > 0 and `pairs`
/// carries no augmented pairs.
ObjectiveTerms metaug_objective(const PairSets& pairs, const OuclConfig& config, double delta);

std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);
std::string to_string(MarginVariant v);
MarginVariant margin_variant_from_string(const std::string& s);

}  // namespace metaug::losses
