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
#include <optional>

#include "metaug/data.hpp"
#include "metaug/losses.hpp"
#include "metaug/model.hpp"
#include "metaug/trainer.hpp"

namespace metaug::testing {

/// Two samples, two 3-dim views, 38 parameters. Omega is randomized so the
/// MAG is not the identity, and margins are frozen at their unperturbed
/// values so the finite differences see a smooth objective.
struct ToyMeta {
  model::ParamGroup params;
  data::ViewBatch batch;
  train::TrainConfig config;
  losses::Margins margins;
};

ToyMeta make_toy_meta(std::uint64_t seed);

struct MetaCheck {
  double worst_coordinate_error = 0.0;  // max over omega coordinates
  std::size_t coordinates = 0;
  std::size_t parameters = 0;
};

/// Analytic grad_omega L_meta against central differences through the whole
/// inner update (each omega coordinate perturbed, fast weights recomputed).
MetaCheck check_meta_gradient(const ToyMeta& toy, double h = 1e-5);

}  // namespace metaug::testing
