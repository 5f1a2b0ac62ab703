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

#include <filesystem>

#include <nlohmann/json.hpp>

#include "metaug/model.hpp"

namespace metaug {

/// On disk: the 8 bytes "MAGCKPT1", a little-endian u64 header length, the
/// JSON header, then every parameter block as little-endian f32 in the order
/// theta, vartheta, omega (view-major within each role).
struct Checkpoint {
  model::ParamGroup params;
  nlohmann::json meta;  // seeds, step, epoch, ... (free-form, stored in the header)
};

void save_checkpoint(const std::filesystem::path& path, const model::ParamGroup& params,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Throws std::runtime_error on I/O failure or a malformed file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Values as they come back from a save/load cycle (f32 rounding).
model::ParamGroup round_to_f32(const model::ParamGroup& params);

}  // namespace metaug
