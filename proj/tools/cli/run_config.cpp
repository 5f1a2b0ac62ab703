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

#include "run_config.hpp"

#include <fstream>
#include <set>

namespace metaug::cli {
namespace {

std::string color_views_name(data::ColorViews c) {
  switch (c) {
    case data::ColorViews::None: return "none";
    case data::ColorViews::Lab: return "lab";
    case data::ColorViews::LabRgb: return "lab_rgb";
  }
  return "none";
}

data::ColorViews color_views_from(const std::string& s) {
  if (s == "none") return data::ColorViews::None;
  if (s == "lab") return data::ColorViews::Lab;
  if (s == "lab_rgb") return data::ColorViews::LabRgb;
  throw ConfigError("data.manifest_options.color_views: unknown value " + s);
}

nlohmann::json data_json(const DataSpec& d) {
  const auto& s = d.synthetic;
  const auto& m = d.manifest_options;
  return {{"kind", d.kind},
          {"synthetic",
           {{"seed", s.seed},
            {"n_classes", s.n_classes},
            {"n_per_class", s.n_per_class},
            {"latent_dim", s.latent_dim},
            {"m_views", s.m_views},
            {"view_dims", s.view_dims},
            {"noise_sigma", s.noise_sigma},
            {"train_fraction", s.train_fraction},
            {"val_fraction", s.val_fraction}}},
          {"manifest", d.manifest},
          {"manifest_options",
           {{"color_views", color_views_name(m.color_views)},
            {"augmentations", m.augmentations},
            {"seed", m.seed},
            {"train_fraction", m.train_fraction},
            {"val_fraction", m.val_fraction}}}};
}

nlohmann::json eval_json(const EvalSpec& e) {
  return {{"source", eval::to_string(e.source)},
          {"probe_steps", e.probe.steps},
          {"probe_lr", e.probe.lr},
          {"bins", e.histogram.bins},
          {"max_diff_pairs", e.histogram.max_diff_pairs},
          {"histogram_seed", e.histogram.seed}};
}

// Every key of `j` must exist in `schema`, recursively through objects.
void check_keys(const nlohmann::json& j, const nlohmann::json& schema, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError("config: " + (prefix.empty() ? "root" : prefix) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown config key: " + path);
    if (schema.at(key).is_object()) check_keys(value, schema.at(key), path);
  }
}

template <typename T>
T get(const nlohmann::json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key " + path + " has the wrong type");
  }
}

void merge_into(nlohmann::json& base, const nlohmann::json& patch, const std::string& prefix) {
  for (const auto& [key, value] : patch.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key: " + path);
    if (base[key].is_object() && value.is_object()) {
      merge_into(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

std::string RunConfig::resolved_run_name() const {
  return run_name.empty() ? "run_seed" + std::to_string(train.seed) : run_name;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = train::to_json(c.train);
  j["data"] = data_json(c.data);
  j["eval"] = eval_json(c.eval);
  j["output_dir"] = c.output_dir;
  j["run_name"] = c.run_name;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  const nlohmann::json schema = to_json(RunConfig{});
  check_keys(j, schema, "");
  RunConfig c;
  nlohmann::json train_part = j;
  for (const char* k : {"data", "eval", "output_dir", "run_name"}) train_part.erase(k);
  try {
    c.train = train::train_config_from_json(train_part);
    c.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  nlohmann::json d = schema.at("data");
  if (j.contains("data")) merge_into(d, j.at("data"), "data");
  c.data.kind = get<std::string>(d.at("kind"), "data.kind");
  if (c.data.kind != "synthetic" && c.data.kind != "manifest") {
    throw ConfigError("data.kind: expected synthetic or manifest, got " + c.data.kind);
  }
  const auto& s = d.at("synthetic");
  auto& sc = c.data.synthetic;
  sc.seed = get<std::uint64_t>(s.at("seed"), "data.synthetic.seed");
  sc.n_classes = get<int>(s.at("n_classes"), "data.synthetic.n_classes");
  sc.n_per_class = get<int>(s.at("n_per_class"), "data.synthetic.n_per_class");
  sc.latent_dim = get<std::size_t>(s.at("latent_dim"), "data.synthetic.latent_dim");
  sc.m_views = get<std::size_t>(s.at("m_views"), "data.synthetic.m_views");
  sc.view_dims = get<std::vector<std::size_t>>(s.at("view_dims"), "data.synthetic.view_dims");
  sc.noise_sigma = get<double>(s.at("noise_sigma"), "data.synthetic.noise_sigma");
  sc.train_fraction = get<double>(s.at("train_fraction"), "data.synthetic.train_fraction");
  sc.val_fraction = get<double>(s.at("val_fraction"), "data.synthetic.val_fraction");
  c.data.manifest = get<std::string>(d.at("manifest"), "data.manifest");
  const auto& mo = d.at("manifest_options");
  auto& mc = c.data.manifest_options;
  mc.color_views = color_views_from(get<std::string>(mo.at("color_views"), "data.manifest_options.color_views"));
  mc.augmentations = get<std::vector<std::string>>(mo.at("augmentations"), "data.manifest_options.augmentations");
  mc.seed = get<std::uint64_t>(mo.at("seed"), "data.manifest_options.seed");
  mc.train_fraction = get<double>(mo.at("train_fraction"), "data.manifest_options.train_fraction");
  mc.val_fraction = get<double>(mo.at("val_fraction"), "data.manifest_options.val_fraction");
  if (c.data.kind == "manifest" && c.data.manifest.empty()) {
    throw ConfigError("data.manifest: required when data.kind is manifest");
  }

  nlohmann::json e = schema.at("eval");
  if (j.contains("eval")) merge_into(e, j.at("eval"), "eval");
  try {
    c.eval.source = eval::feature_source_from_string(get<std::string>(e.at("source"), "eval.source"));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("eval.source: ") + ex.what());
  }
  c.eval.probe.steps = get<std::size_t>(e.at("probe_steps"), "eval.probe_steps");
  c.eval.probe.lr = get<double>(e.at("probe_lr"), "eval.probe_lr");
  c.eval.histogram.bins = get<std::size_t>(e.at("bins"), "eval.bins");
  if (c.eval.histogram.bins < 10) throw ConfigError("eval.bins: must be at least 10");
  c.eval.histogram.max_diff_pairs = get<std::size_t>(e.at("max_diff_pairs"), "eval.max_diff_pairs");
  c.eval.histogram.seed = get<std::uint64_t>(e.at("histogram_seed"), "eval.histogram_seed");

  if (j.contains("output_dir")) c.output_dir = get<std::string>(j.at("output_dir"), "output_dir");
  if (j.contains("run_name")) c.run_name = get<std::string>(j.at("run_name"), "run_name");
  return c;
}

void apply_override(nlohmann::json& config, const std::string& path, const nlohmann::json& value) {
  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty() || !node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown config key: " + path);
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: " + assignment);
  }
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply_override(config, assignment.substr(0, eq), value);
}

nlohmann::json resolve_config_json(const std::optional<std::filesystem::path>& file,
                                   std::span<const std::string> overrides) {
  nlohmann::json j = to_json(RunConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config " + file->string());
    const auto parsed = nlohmann::json::parse(in, nullptr, false);
    if (parsed.is_discarded()) throw ConfigError("config " + file->string() + " is not valid JSON");
    if (!parsed.is_object()) throw ConfigError("config " + file->string() + " must hold an object");
    merge_into(j, parsed, "");
  }
  for (const auto& o : overrides) apply_override(j, o);
  // Round trip so that every default is materialized and every value checked.
  return to_json(run_config_from_json(j));
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          std::span<const std::string> overrides) {
  return run_config_from_json(resolve_config_json(file, overrides));
}

data::Dataset build_dataset(const DataSpec& spec) {
  try {
    if (spec.kind == "manifest") return data::load_manifest(spec.manifest, spec.manifest_options);
    return data::gen_synthetic_multiview(spec.synthetic);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
}

}  // namespace metaug::cli
