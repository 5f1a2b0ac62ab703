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

// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "gradcheck.hpp"
#include "metaug/eval.hpp"
#include "metaug/losses.hpp"
#include "metaug/trainer.hpp"
#include "run_config.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;
using namespace metaug;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

losses::PairSet pair_set(std::vector<double> d) {
  losses::PairSet p;
  const std::size_t k = d.size();
  p.d = diff::constant(Tensor(1, k, std::move(d)));
  return p;
}

std::vector<double> uniform_values(Rng& rng, std::size_t k, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(k);
  for (auto& v : d) v = u(rng);
  return d;
}

// ---- 1 -----------------------------------------------------------------------------

Outcome primitive_gradients() {
  double worst1 = 0, worst2 = 0;
  std::string worst_name;
  const auto cases = testing::primitive_cases();
  for (const auto& c : cases)
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto r = testing::check_primitive(c, seed);
      if (r.first_order > worst1 || r.second_order > worst2) worst_name = c.name;
      worst1 = std::max(worst1, r.first_order);
      worst2 = std::max(worst2, r.second_order);
    }
  return {worst1 < 1e-4 && worst2 < 1e-3, std::to_string(cases.size()) + " primitives x 100 seeds, worst first " +
                                              fmt(worst1) + ", second " + fmt(worst2) + " (" + worst_name + ")"};
}

// ---- 2 -----------------------------------------------------------------------------

Outcome meta_gradient() {
  double worst = 0;
  std::size_t params = 0, coords = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = testing::check_meta_gradient(testing::make_toy_meta(seed));
    worst = std::max(worst, r.worst_coordinate_error);
    params = r.parameters;
    coords = r.coordinates;
  }
  return {worst < 1e-3 && params <= 50, std::to_string(params) + " parameters, " + std::to_string(coords) +
                                            " omega coordinates, worst rel err " + fmt(worst)};
}

// ---- 3 -----------------------------------------------------------------------------

Outcome loss_identities() {
  using losses::OuclConfig;
  using losses::OuclForm;
  using losses::Weighting;
  Rng rng(3);
  std::uniform_int_distribution<std::size_t> size(1, 64);
  double worst_form = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto pos = pair_set(uniform_values(rng, size(rng)));
    const auto neg = pair_set(uniform_values(rng, size(rng)));
    for (auto w : {Weighting::Gamma, Weighting::GammaBar}) {
      OuclConfig c;
      c.gamma = 0.4;
      c.weighting = w;
      c.beta = 16;
      c.form = OuclForm::Weighted;
      const double a = losses::oucl(pos, neg, c).item();
      c.form = OuclForm::Reduced;
      worst_form = std::max(worst_form, std::abs(a - losses::oucl(pos, neg, c).item()));
    }
  }

  // large-beta limit, with the pairwise maximum computed directly
  double worst_gap = -INFINITY;
  std::uniform_int_distribution<std::size_t> wide(1, 64);
  for (int t = 0; t < 300; ++t) {
    const auto dp = uniform_values(rng, wide(rng)), dn = uniform_values(rng, wide(rng));
    for (auto w : {Weighting::None, Weighting::Gamma, Weighting::GammaBar}) {
      OuclConfig c;
      c.weighting = w;
      c.beta = 256;
      const double att = w == Weighting::GammaBar ? 1.0 / c.phi_dec : 1.0;
      double best = -INFINITY;
      for (double p : dp)
        for (double n : dn) {
          const double g = c.gamma;
          const double x = w == Weighting::None
                               ? n - p + c.lambda
                               : att * std::max(n + g, 0.0) * (n - g) - att * std::max(1 + g - p, 0.0) * (p - (1 - g));
          best = std::max(best, x);
        }
      const double v = losses::oucl(pair_set(dp), pair_set(dn), c).item();
      const double bound = std::log1p(static_cast<double>(dp.size() * dn.size())) / 256.0;
      worst_gap = std::max(worst_gap, std::abs(v - std::max(best, 0.0)) - bound);
    }
  }

  OuclConfig opt;
  opt.weighting = Weighting::Gamma;
  opt.beta = 2;
  opt.gamma = 0.4;
  const double at_opt = losses::oucl(pair_set({1.0}), pair_set({0.0}), opt).item();

  const bool pass = worst_form <= 1e-9 && worst_gap <= 1e-12 && std::abs(at_opt - 0.2118) <= 1e-4;
  return {pass, "forms differ by " + fmt(worst_form) + ", limit slack " + fmt(worst_gap) + ", optimum " +
                    fmt(at_opt, 10)};
}

// ---- 4 -----------------------------------------------------------------------------

Outcome margin_semantics() {
  using losses::MarginVariant;
  Rng rng(4);
  std::uniform_int_distribution<std::size_t> size(1, 30);
  bool ordered = true;
  for (int t = 0; t < 1000; ++t) {
    const auto dp = uniform_values(rng, size(rng)), dn = uniform_values(rng, size(rng));
    const auto l = losses::compute_margins(dp, dn, MarginVariant::Large);
    const auto m = losses::compute_margins(dp, dn, MarginVariant::Medium);
    const auto s = losses::compute_margins(dp, dn, MarginVariant::Small);
    ordered = ordered && l.sigma_plus <= m.sigma_plus && m.sigma_plus <= s.sigma_plus &&
              l.sigma_minus >= m.sigma_minus && m.sigma_minus >= s.sigma_minus;
  }

  bool iff = true;
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<std::size_t> small(1, 10);
  for (int t = 0; t < 1000; ++t) {
    const double a = u(rng), b = u(rng);
    losses::Margins mg{std::min(a, b), std::max(a, b), MarginVariant::Large};
    const auto dp = uniform_values(rng, small(rng), 0.0, mg.sigma_plus + 0.05);
    const auto dn = uniform_values(rng, small(rng), mg.sigma_minus - 0.05, 1.0);
    const double r = losses::margin_regularization(pair_set(dp), pair_set(dn), mg).item();
    const bool inactive = std::all_of(dp.begin(), dp.end(), [&](double d) { return d <= mg.sigma_plus; }) &&
                          std::all_of(dn.begin(), dn.end(), [&](double d) { return d >= mg.sigma_minus; });
    iff = iff && r >= 0 && (r == 0.0) == inactive;
  }

  losses::Margins mg{0.5, 0.7, MarginVariant::Large};
  const double example = losses::margin_regularization(pair_set({0.6, 0.4}), pair_set({0.8, 0.6}), mg).item();
  // 0.1 is not a binary fraction; allow the rounding of the decimal inputs (4 ulp)
  const bool example_ok = std::abs(example - 0.1) <= 4 * std::numeric_limits<double>::epsilon() * 0.1;
  return {ordered && iff && example_ok, std::string("ordering ") + (ordered ? "ok" : "violated") +
                                            ", zero-iff-inactive " + (iff ? "ok" : "violated") +
                                            ", worked example " + fmt(example, 17)};
}

// ---- 5 -----------------------------------------------------------------------------

Outcome phase_isolation() {
  const auto ds = data::gen_synthetic_multiview({});
  train::TrainConfig cfg;
  cfg.epochs = 5;
  std::size_t regular = 0, meta = 0, violations = 0;
  train::TrainOptions opts;
  opts.on_step = [&](const train::StepMetrics& m, const model::ParamGroup& before, const model::ParamGroup& after) {
    if (m.phase == "regular") {
      ++regular;
      violations += before.omega != after.omega;
    } else {
      ++meta;
      violations += before.theta != after.theta || before.vartheta != after.vartheta;
    }
  };
  const auto result = train::train(cfg, ds, opts);

  // alpha enters only the meta objective
  MemoryBank bank(ds.m_views(), cfg.bank_capacity, cfg.model.feature_dim);
  const auto warm = *data::next_batch(ds, 0, cfg.batch_size, cfg.seed);
  const auto ctx = model::ForwardContext::from_params(result.params, false, false);
  std::vector<Tensor> z;
  for (std::size_t j = 0; j < ds.m_views(); ++j)
    z.push_back(ctx.project(j, ctx.encode(j, diff::constant(warm.views[j]))).value());
  bank.push(z, warm.ids);
  const auto batch = *data::next_batch(ds, 1, cfg.batch_size, cfg.seed);
  const auto sample = bank.retrieve(batch.ids, cfg.bank_k, 11);
  bool alpha_free = true;
  std::vector<Tensor> reference;
  for (double alpha : {1.0, 0.0, 1e-3, 1e-17, 100.0}) {
    cfg.alpha = alpha;
    auto g = train::regular_gradients(result.params, batch, &sample, cfg).gradients;
    if (reference.empty()) reference = std::move(g);
    else alpha_free = alpha_free && g == reference;
  }
  return {violations == 0 && alpha_free && regular > 0 && meta > 0,
          std::to_string(regular) + " regular and " + std::to_string(meta) + " meta steps, " +
              std::to_string(violations) + " violations, gradients " + (alpha_free ? "" : "not ") +
              "alpha-invariant"};
}

// ---- 6 -----------------------------------------------------------------------------

Outcome anti_collapse() {
  const auto ds = data::gen_synthetic_multiview({});
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double d[2];
    for (int k = 0; k < 2; ++k) {
      train::TrainConfig cfg;
      cfg.seed = seed;
      if (k == 1) cfg.alpha = 0.0;
      const auto r = train::train(cfg, ds);
      d[k] = eval::similarity_histograms(r.params, ds, eval::Population::AugmentedVsOriginal).mean_same;
    }
    wins += d[0] < d[1];
    detail += (seed ? "; " : "") + fmt(d[0], 4) + " vs " + fmt(d[1], 4);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds lower with the regularizer (" + detail + ")"};
}

// ---- 7, 8 --------------------------------------------------------------------------

struct CompareSummary {
  std::map<std::string, double> mean;
  bool ok = true;
};

CompareSummary compare_methods(const fs::path& out) {
  std::ostringstream log;
  const auto base = cli::resolve_config_json(std::nullopt, {});
  const auto rows = cli::run_compare(base, cli::kCompareMethods, {0, 1, 2, 3, 4}, out / "compare", log);
  CompareSummary s;
  std::map<std::string, int> n;
  for (const auto& r : rows) {
    s.ok = s.ok && r.status == "ok";
    s.mean[r.method] += r.probe_accuracy;
    ++n[r.method];
  }
  for (auto& [m, v] : s.mean) v /= n[m];
  return s;
}

Outcome representation_quality(const CompareSummary& s) {
  const double chance = 0.25;
  const double mag = s.mean.at("metaug"), nce = s.mean.at("infonce");
  return {s.ok && mag >= nce && mag >= chance + 0.30 && nce >= chance + 0.30,
          "metaug " + fmt(mag, 4) + ", infonce " + fmt(nce, 4) + " (chance 0.25)"};
}

Outcome ablation_ordering(const CompareSummary& s) {
  const double full = s.mean.at("metaug");
  const double oucl_only = s.mean.at("metaug_oucl_only"), mag_only = s.mean.at("metaug_mag_only");
  return {s.ok && full >= oucl_only - 0.01 && full >= mag_only - 0.01,
          "metaug " + fmt(full, 4) + ", oucl_only " + fmt(oucl_only, 4) + ", mag_only " + fmt(mag_only, 4)};
}

// ---- 9 -----------------------------------------------------------------------------

bool well_formed(const fs::path& table, const std::string& axis, std::size_t cells, std::set<std::string>* values) {
  std::ifstream in(table);
  std::string header, line;
  if (!std::getline(in, header) || header.rfind("cell," + axis + ",status,probe_accuracy", 0) != 0) return false;
  const auto columns = std::count(header.begin(), header.end(), ',');
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (std::count(line.begin(), line.end(), ',') != columns) return false;
    std::stringstream fields(line);
    std::string cell, value, status, accuracy;
    std::getline(fields, cell, ',');
    std::getline(fields, value, ',');
    std::getline(fields, status, ',');
    std::getline(fields, accuracy, ',');
    if (status != "ok" || accuracy.empty()) return false;
    if (values) values->insert(value);
    ++rows;
  }
  return rows == cells;
}

Outcome sweep_reproduction(const fs::path& out) {
  auto base = cli::resolve_config_json(std::nullopt, {});
  base["epochs"] = 5;
  struct Axis {
    std::string name;
    std::vector<nlohmann::json> values;
  };
  std::vector<Axis> axes = {
      {"alpha", {1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13, 1e-15, 1e-17}},
      {"beta", {2, 4, 8, 16, 32, 64, 128, 256}},
      {"delta", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}},
      {"phi_dec", {}},
  };
  for (int p = 2; p <= 14; ++p) axes.back().values.push_back(p);

  std::string detail;
  bool pass = true;
  std::set<std::string> phi_values;
  for (const auto& axis : axes) {
    auto config = base;
    if (axis.name == "phi_dec") config["weighting"] = "gamma_bar";
    cli::Grid grid;
    grid.axes.emplace_back(axis.name, axis.values);
    std::ostringstream log;
    const auto table = cli::run_sweep(config, grid, out / ("sweep_" + axis.name), cli::sweep_workers(), log);
    const bool ok = well_formed(table, axis.name, axis.values.size(), axis.name == "phi_dec" ? &phi_values : nullptr);
    pass = pass && ok;
    detail += axis.name + " " + std::to_string(axis.values.size()) + (ok ? " ok; " : " malformed; ");
  }
  const bool has_six = phi_values.count("6") > 0;
  return {pass && has_six, detail + "phi_dec=6 " + (has_six ? "present" : "missing")};
}

// ---- 10 ----------------------------------------------------------------------------

Outcome determinism(const fs::path& out) {
  const auto config = cli::load_run_config(std::nullopt, {});
  std::string logs[2];
  for (int k = 0; k < 2; ++k) {
    const auto dir = out / ("determinism_" + std::to_string(k));
    fs::remove_all(dir);
    cli::run_training(config, dir);
    std::ifstream in(dir / "metrics.jsonl");
    logs[k] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  return {!logs[0].empty() && logs[0] == logs[1],
          std::to_string(lines) + " log lines, " + (logs[0] == logs[1] ? "byte-identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  fs::path out = fs::temp_directory_path() / "metaug_acceptance";
  std::vector<int> only;
  app.add_option("--out", out, "scratch directory for runs");
  app.add_option("--only", only, "run a subset of criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  std::optional<CompareSummary> compared;
  auto compare = [&]() -> const CompareSummary& {
    if (!compared) compared = compare_methods(out);
    return *compared;
  };

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, primitive_gradients},
      {2, meta_gradient},
      {3, loss_identities},
      {4, margin_semantics},
      {5, phase_isolation},
      {6, anti_collapse},
      {7, [&] { return representation_quality(compare()); }},
      {8, [&] { return ablation_ordering(compare()); }},
      {9, [&] { return sweep_reproduction(out); }},
      {10, [&] { return determinism(out); }},
  };

  int failed = 0;
  for (const auto& [k, run] : criteria) {
    if (!wanted(k)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << o.detail << " [" << fmt(secs, 3)
              << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
