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

#include "metaug/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace metaug {
namespace {

constexpr char kMagic[8] = {'M', 'A', 'G', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename Fn>
void for_each_block(const model::ParamGroup& g, Fn&& fn) {
  const std::pair<const char*, const std::vector<model::ParamSet>*> roles[] = {
      {"theta", &g.theta}, {"vartheta", &g.vartheta}, {"omega", &g.omega}};
  for (const auto& [role, sets] : roles)
    for (std::size_t j = 0; j < sets->size(); ++j)
      for (std::size_t b = 0; b < (*sets)[j].size(); ++b) fn(role, j, b, (*sets)[j][b]);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const model::ParamGroup& params,
                     const nlohmann::json& meta) {
  nlohmann::json blocks = nlohmann::json::array();
  for_each_block(params, [&](const char* role, std::size_t view, std::size_t index, const Tensor& t) {
    blocks.push_back({{"role", role}, {"view", view}, {"index", index}, {"shape", {t.rows(), t.cols()}}});
  });
  const nlohmann::json header = {{"format", 1},
                                 {"spec", model::to_json(params.spec)},
                                 {"blocks", blocks},
                                 {"meta", meta}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for_each_block(params, [&](const char*, std::size_t, std::size_t, const Tensor& t) {
    for (double v : t.values()) {
      const auto f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  });
  if (!out) throw std::runtime_error("failed while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t length = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || length > (1ULL << 30)) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  const auto header = nlohmann::json::parse(text);

  model::ModelSpec spec = model::model_spec_from_json(header.at("spec"));
  const std::size_t m = spec.m_views();
  std::vector<model::ParamSet> theta(m), vartheta(m), omega(m);
  for (const auto& block : header.at("blocks")) {
    const auto role = block.at("role").get<std::string>();
    const auto view = block.at("view").get<std::size_t>();
    const auto shape = block.at("shape").get<std::vector<std::size_t>>();
    auto& sets = role == "theta" ? theta : role == "vartheta" ? vartheta : omega;
    if (view >= m || shape.size() != 2) throw std::runtime_error(path.string() + ": bad block entry");
    std::vector<float> raw(shape[0] * shape[1]);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!in) throw std::runtime_error(path.string() + ": truncated parameter data");
    sets[view].emplace_back(shape[0], shape[1], std::vector<double>(raw.begin(), raw.end()));
  }
  Checkpoint ckpt{model::adopt_params(std::move(spec), std::move(theta), std::move(vartheta),
                                      std::move(omega)),
                  header.value("meta", nlohmann::json::object())};
  return ckpt;
}

model::ParamGroup round_to_f32(const model::ParamGroup& params) {
  model::ParamGroup out = params;
  for (auto* sets : {&out.theta, &out.vartheta, &out.omega})
    for (auto& set : *sets)
      for (auto& t : set)
        for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace metaug
