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

#include "commands.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "metaug/checkpoint.hpp"

namespace metaug::cli {
namespace fs = std::filesystem;
namespace {

std::string tag_of(eval::FeatureSource s) {
  switch (s) {
    case eval::FeatureSource::Representation: return "h";
    case eval::FeatureSource::Projected: return "z";
    case eval::FeatureSource::ProjectedPlusAugmented: return "zaug";
  }
  return "h";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_cell(const nlohmann::json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string quoted = "\"";
    for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    return quoted + "\"";
  }
  return s;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw MissingArtifact("missing " + p.string());
  return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

// Last regular-phase metrics line of a run, or null.
nlohmann::json last_regular_metrics(const fs::path& run_dir) {
  std::ifstream in(run_dir / "metrics.jsonl");
  nlohmann::json last;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (j.value("phase", "") == "regular") last = std::move(j);
  }
  return last;
}

std::uint64_t sequence_hash(const std::vector<train::StepMetrics>& metrics) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& m : metrics) {
    if (m.phase != "regular") continue;
    for (int b = 0; b < 8; ++b) {
      h ^= (m.batch_hash >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

int guarded(std::ostream& err, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << '\n';
    return kExitMissing;
  } catch (const train::DivergenceError& e) {
    err << "diverged: " << e.what() << '\n' << e.diagnostics().dump(2) << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

train::TrainResult run_training(const RunConfig& config, const fs::path& run_dir) {
  const auto dataset = build_dataset(config.data);
  fs::create_directories(run_dir);
  write_json(run_dir / "resolved_config.json", to_json(config));
  train::TrainOptions options;
  options.run_dir = run_dir;
  return train::train(config.train, dataset, options);
}

std::vector<eval::EvalReport> run_eval(const fs::path& run_dir,
                                       std::optional<eval::FeatureSource> source) {
  const fs::path ckpt_path = run_dir / "final.ckpt";
  if (!fs::exists(ckpt_path)) throw MissingArtifact("no checkpoint at " + ckpt_path.string());
  const RunConfig config = run_config_from_json(read_json(run_dir / "resolved_config.json"));
  const auto dataset = build_dataset(config.data);
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto src = source.value_or(config.eval.source);

  eval::EvalReport probe{"probe_" + tag_of(src), {}, {}, {}};
  probe.probe = eval::linear_probe(ckpt.params, dataset, src, config.eval.probe);
  std::vector<std::size_t> idx = dataset.split.test;
  if (idx.size() < 2) {
    idx.resize(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  probe.collapse = eval::collapse_metrics(eval::extract_features(ckpt.params, dataset, idx, src));

  std::vector<eval::EvalReport> reports = {probe};
  for (auto pop : {eval::Population::OriginalsOnly, eval::Population::AugmentedVsOriginal}) {
    eval::EvalReport h{"hist_" + eval::to_string(pop), {}, {}, {}};
    h.histogram = eval::similarity_histograms(ckpt.params, dataset, pop, config.eval.histogram);
    reports.push_back(std::move(h));
  }
  const std::string tag = tag_of(src);
  eval::export_reports(reports, run_dir / ("eval_" + tag + ".json"), eval::ExportFormat::Json);
  eval::export_reports(reports, run_dir / ("eval_" + tag + ".csv"), eval::ExportFormat::Csv);
  eval::export_reports(reports, run_dir / ("eval_" + tag + "_histograms.csv"),
                       eval::ExportFormat::HistogramCsv);
  return reports;
}

std::size_t Grid::cells() const {
  std::size_t n = axes.empty() ? 0 : 1;
  for (const auto& [name, values] : axes) n *= values.size();
  return n;
}

Grid grid_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("grid must be an object of name -> value list");
  Grid g;
  for (const auto& [name, values] : j.items()) {
    if (!values.is_array() || values.empty()) throw ConfigError("grid axis " + name + " needs a non-empty list");
    g.axes.emplace_back(name, std::vector<nlohmann::json>(values.begin(), values.end()));
  }
  return g;
}

std::pair<std::string, std::vector<nlohmann::json>> grid_axis_from_string(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ConfigError("grid axis must look like name=v1,v2,...: " + text);
  }
  std::vector<nlohmann::json> values;
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = nlohmann::json::parse(item, nullptr, false);
    values.push_back(v.is_discarded() ? nlohmann::json(item) : v);
  }
  return {text.substr(0, eq), values};
}

std::size_t sweep_workers() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("METAUG_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("METAUG_WORKERS must be a positive integer, got ") + env);
    }
  }
  return n;
}

fs::path run_sweep(const nlohmann::json& base, const Grid& grid, const fs::path& out_dir,
                   std::size_t workers, std::ostream& log) {
  const std::size_t n_cells = grid.cells();
  if (n_cells == 0) throw ConfigError("sweep grid is empty");

  struct Cell {
    nlohmann::json params;
    RunConfig config;
    fs::path dir;
  };
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < n_cells; ++c) {
    nlohmann::json cfg = base;
    nlohmann::json params = nlohmann::json::object();
    std::size_t rest = c;
    for (auto it = grid.axes.rbegin(); it != grid.axes.rend(); ++it) {
      const auto& [name, values] = *it;
      const auto& v = values[rest % values.size()];
      rest /= values.size();
      apply_override(cfg, name, v);
      params[name] = v;
    }
    std::ostringstream dir;
    dir << "cell_" << std::setw(4) << std::setfill('0') << c;
    cfg["run_name"] = dir.str();
    cells.push_back({params, run_config_from_json(cfg), out_dir / dir.str()});
  }

  fs::create_directories(out_dir);
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      const Cell& cell = cells[c];
      std::string status = "ok";
      try {
        run_training(cell.config, cell.dir);
        run_eval(cell.dir, std::nullopt);
      } catch (const train::DivergenceError& e) {
        status = "diverged";
      } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
      }
      write_json(cell.dir / "cell.json", {{"params", cell.params}, {"status", status}});
      std::lock_guard lock(log_mutex);
      log << "[" << (c + 1) << "/" << cells.size() << "] " << cell.params.dump() << " " << status << '\n';
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, cells.size()); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Aggregate from the cell directories only.
  const fs::path table = out_dir / "sweep.csv";
  std::ofstream out(table, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + table.string());
  out << "cell";
  for (const auto& [name, values] : grid.axes) out << ',' << name;
  out << ",status,probe_accuracy,mean_pairwise_sim,effective_rank,mean_d_pos,mean_d_neg,mean_d_self\n";
  for (const auto& cell : cells) {
    const auto info = read_json(cell.dir / "cell.json");
    out << cell.dir.filename().string();
    for (const auto& [name, values] : grid.axes) out << ',' << csv_cell(info.at("params").at(name));
    const std::string status = info.at("status").get<std::string>();
    out << ',' << csv_cell(status);
    const fs::path report = cell.dir / ("eval_" + tag_of(cell.config.eval.source) + ".json");
    if (status == "ok" && fs::exists(report)) {
      const auto reports = eval::import_reports_json(report);
      const auto& probe = reports.front();
      const auto last = last_regular_metrics(cell.dir);
      auto metric = [&](const char* key) {
        return last.is_object() && last.contains(key) && !last.at(key).is_null()
                   ? fmt(last.at(key).get<double>())
                   : std::string();
      };
      out << ',' << fmt(probe.probe->accuracy) << ',' << fmt(probe.collapse->mean_pairwise_sim) << ','
          << fmt(probe.collapse->effective_rank) << ',' << metric("mean_d_pos") << ','
          << metric("mean_d_neg") << ',' << metric("mean_d_self");
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
  return table;
}

void apply_method(nlohmann::json& config, const std::string& method) {
  if (method == "metaug") {
    config["loss"] = "oucl";
    config["use_mag"] = true;
  } else if (method == "metaug_oucl_only") {
    config["loss"] = "oucl";
    config["use_mag"] = false;
  } else if (method == "metaug_mag_only") {
    config["loss"] = "infonce";
    config["use_mag"] = true;
  } else if (method == "infonce") {
    config["loss"] = "infonce";
    config["use_mag"] = false;
  } else {
    throw ConfigError("unknown method: " + method);
  }
}

std::vector<CompareRow> run_compare(const nlohmann::json& base, const std::vector<std::string>& methods,
                                    const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                                    std::ostream& log) {
  if (methods.empty()) throw ConfigError("compare needs at least one method");
  std::vector<std::pair<std::string, RunConfig>> plan;
  for (const auto& method : methods) {
    for (auto seed : seeds) {
      nlohmann::json cfg = base;
      apply_method(cfg, method);
      cfg["seed"] = seed;
      plan.emplace_back(method, run_config_from_json(cfg));
    }
  }
  std::vector<CompareRow> rows;
  for (const auto& [method, cfg] : plan) {
    CompareRow row{method, cfg.train.seed, 0.0, 0, "ok"};
    const fs::path dir = out_dir / method / ("seed_" + std::to_string(cfg.train.seed));
    try {
      const auto result = run_training(cfg, dir);
      row.batch_sequence_hash = sequence_hash(result.metrics);
      row.probe_accuracy = run_eval(dir, std::nullopt).front().probe->accuracy;
    } catch (const train::DivergenceError&) {
      row.status = "diverged";
    }
    log << method << " seed " << row.seed << ": " << row.status << " accuracy "
        << fmt(row.probe_accuracy) << '\n';
    rows.push_back(row);
  }

  fs::create_directories(out_dir);
  std::ofstream table(out_dir / "compare.csv", std::ios::trunc);
  table << "method,seed,status,probe_accuracy,batch_sequence_hash\n";
  for (const auto& r : rows) {
    table << r.method << ',' << r.seed << ',' << r.status << ',' << fmt(r.probe_accuracy) << ','
          << r.batch_sequence_hash << '\n';
  }
  std::ofstream summary(out_dir / "compare_summary.csv", std::ios::trunc);
  summary << "method,runs,mean_probe_accuracy\n";
  for (const auto& method : methods) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.method == method && r.status == "ok") {
        sum += r.probe_accuracy;
        ++n;
      }
    }
    summary << method << ',' << n << ',' << (n ? fmt(sum / static_cast<double>(n)) : std::string()) << '\n';
  }
  if (!table || !summary) throw std::runtime_error("cannot write comparison tables in " + out_dir.string());
  return rows;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"metaug: contrastive training with meta feature augmentation"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config");
    sub->add_option("--set", overrides, "key=value override (dotted path), repeatable");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* train_cmd = app.add_subcommand("train", "train one run");
  add_config_opts(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a run directory");
  std::string run_dir;
  std::optional<std::string> source;
  eval_cmd->add_option("--run", run_dir, "run directory")->required();
  eval_cmd->add_option("--source", source, "feature source: h, z or z+aug");

  auto* sweep_cmd = app.add_subcommand("sweep", "grid sweep");
  add_config_opts(sweep_cmd);
  std::optional<std::string> grid_path;
  std::vector<std::string> params;
  sweep_cmd->add_option("--grid", grid_path, "grid JSON: {name: [values]}");
  sweep_cmd->add_option("--param", params, "name=v1,v2,... grid axis, repeatable");

  auto* compare_cmd = app.add_subcommand("compare", "compare methods over seeds");
  add_config_opts(compare_cmd);
  std::vector<std::string> methods = kCompareMethods;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  compare_cmd->add_option("--methods", methods, "comma-separated methods")->delimiter(',');
  compare_cmd->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  const std::optional<fs::path> cfg_file =
      config_path ? std::optional<fs::path>(*config_path) : std::nullopt;

  return guarded(err, [&]() -> int {
    if (*train_cmd) {
      const auto config = load_run_config(cfg_file, overrides);
      const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) / config.resolved_run_name()
                                           : fs::path(out_dir);
      const auto result = run_training(config, dir);
      out << "run directory: " << dir.string() << " (" << result.metrics.size() << " steps)\n";
      return kExitOk;
    }
    if (*eval_cmd) {
      std::optional<eval::FeatureSource> src;
      if (source) {
        try {
          src = eval::feature_source_from_string(*source);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
      const auto reports = run_eval(run_dir, src);
      const auto& probe = reports.front();
      out << probe.name << " accuracy " << fmt(probe.probe->accuracy) << " effective_rank "
          << fmt(probe.collapse->effective_rank) << '\n';
      return kExitOk;
    }
    if (*sweep_cmd) {
      const auto base = resolve_config_json(cfg_file, overrides);
      Grid grid;
      if (grid_path) grid = grid_from_json(read_json(*grid_path));
      for (const auto& p : params) grid.axes.push_back(grid_axis_from_string(p));
      const fs::path dir = out_dir.empty()
                               ? fs::path(base.at("output_dir").get<std::string>()) / "sweep"
                               : fs::path(out_dir);
      const auto table = run_sweep(base, grid, dir, sweep_workers(), out);
      out << "sweep table: " << table.string() << '\n';
      return kExitOk;
    }
    const auto base = resolve_config_json(cfg_file, overrides);
    for (const auto& m : methods) {
      nlohmann::json probe = base;
      apply_method(probe, m);
    }
    const fs::path dir = out_dir.empty()
                             ? fs::path(base.at("output_dir").get<std::string>()) / "compare"
                             : fs::path(out_dir);
    run_compare(base, methods, seeds, dir, out);
    out << "comparison table: " << (dir / "compare_summary.csv").string() << '\n';
    return kExitOk;
  });
}

}  // namespace metaug::cli
