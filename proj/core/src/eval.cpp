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

#include "metaug/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

#include "metaug/random.hpp"

namespace metaug::eval {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report to " + path.string());
  return out;
}

std::vector<int> labels_of(const data::Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.samples.at(i).label);
  return out;
}

std::size_t bin_of(double d, std::size_t bins) {
  const double c = std::clamp(d, 0.0, 1.0);
  return std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
}

double pair_d(const Tensor& a, std::size_t i, const Tensor& b, std::size_t k) {
  return 0.5 * (1.0 + dot(a.row_view(i), b.row_view(k)));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::Representation: return "h";
    case FeatureSource::Projected: return "z";
    case FeatureSource::ProjectedPlusAugmented: return "z+aug";
  }
  return "h";
}

FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "h") return FeatureSource::Representation;
  if (s == "z") return FeatureSource::Projected;
  if (s == "z+aug") return FeatureSource::ProjectedPlusAugmented;
  throw std::invalid_argument("unknown feature source: " + s + " (expected h, z or z+aug)");
}

std::string to_string(Population p) {
  return p == Population::OriginalsOnly ? "originals_only" : "augmented_vs_original";
}

Population population_from_string(const std::string& s) {
  if (s == "originals_only") return Population::OriginalsOnly;
  if (s == "augmented_vs_original") return Population::AugmentedVsOriginal;
  throw std::invalid_argument("unknown population: " + s);
}

Tensor extract_features(const model::ParamGroup& params, const data::Dataset& dataset,
                        std::span<const std::size_t> indices, FeatureSource source) {
  const auto batch = data::gather_batch(dataset, {indices.begin(), indices.end()});
  const auto ctx = model::ForwardContext::from_params(params, false, false);
  std::vector<Tensor> blocks, extra;
  for (std::size_t j = 0; j < batch.m_views(); ++j) {
    const auto h = ctx.encode(j, diff::constant(batch.views[j]));
    if (source == FeatureSource::Representation) {
      blocks.push_back(h.value());
      continue;
    }
    const auto z = ctx.project(j, h);
    blocks.push_back(z.value());
    if (source == FeatureSource::ProjectedPlusAugmented) extra.push_back(ctx.augment(j, z).value());
  }
  blocks.insert(blocks.end(), extra.begin(), extra.end());
  return hstack(blocks);
}

ProbeReport fit_linear_probe(const Tensor& train_x, std::span<const int> train_y,
                             const Tensor& test_x, std::span<const int> test_y, int n_classes,
                             const ProbeConfig& config) {
  if (n_classes < 2) throw std::invalid_argument("linear probe needs at least two classes");
  if (train_x.rows() != train_y.size() || test_x.rows() != test_y.size()) {
    throw ShapeError("linear probe: feature rows differ from label counts");
  }
  if (train_x.cols() != test_x.cols()) throw ShapeError("linear probe: train/test widths differ");
  if (train_x.rows() == 0 || test_x.rows() == 0) {
    throw std::invalid_argument("linear probe needs non-empty train and test sets");
  }
  for (auto y : {train_y, test_y})
    for (int label : y)
      if (label < 0 || label >= n_classes) throw std::invalid_argument("linear probe: label out of range");

  const std::size_t n = train_x.rows(), dim = train_x.cols();
  const auto c = static_cast<std::size_t>(n_classes);
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dim; ++k) mu[k] += train_x(i, k);
  for (auto& v : mu) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < dim; ++k) sd[k] += (train_x(i, k) - mu[k]) * (train_x(i, k) - mu[k]);
  for (auto& v : sd) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-12) v = 1.0;
  }
  auto standardize = [&](const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < dim; ++k) out(i, k) = (x(i, k) - mu[k]) / sd[k];
    return out;
  };
  const Tensor xs = standardize(train_x);
  const Tensor xt = standardize(test_x);

  Tensor w(dim, c);
  std::vector<double> b(c, 0.0);
  auto logits = [&](const Tensor& x) {
    Tensor out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t k = 0; k < c; ++k) out(i, k) += b[k];
    return out;
  };
  for (std::size_t step = 0; step < config.steps; ++step) {
    Tensor p = logits(xs);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = p.row_view(i);
      const double mx = *std::max_element(row.begin(), row.end());
      double s = 0.0;
      for (auto& v : row) s += (v = std::exp(v - mx));
      for (auto& v : row) v /= s;
      row[static_cast<std::size_t>(train_y[i])] -= 1.0;
    }
    const double scale = config.lr / static_cast<double>(n);
    const Tensor gw = matmul(xs.transposed(), p);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= scale * gw[k];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < c; ++k) b[k] -= scale * p(i, k);
  }

  ProbeReport report;
  report.config = config;
  report.n_train = n;
  report.n_test = xt.rows();
  report.per_class_accuracy.assign(c, 0.0);
  report.per_class_count.assign(c, 0);
  const Tensor scores = logits(xt);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    const auto row = scores.row_view(i);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const auto truth = static_cast<std::size_t>(test_y[i]);
    ++report.per_class_count[truth];
    if (pred == truth) {
      ++correct;
      report.per_class_accuracy[truth] += 1.0;
    }
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (report.per_class_count[k] > 0) {
      report.per_class_accuracy[k] /= static_cast<double>(report.per_class_count[k]);
    }
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(xt.rows());
  return report;
}

ProbeReport linear_probe(const model::ParamGroup& params, const data::Dataset& dataset,
                         FeatureSource source, const ProbeConfig& config) {
  if (!dataset.has_labels) throw std::invalid_argument("linear probe needs a labelled dataset");
  const auto& split = dataset.split;
  const Tensor train_x = extract_features(params, dataset, split.train, source);
  const Tensor test_x = extract_features(params, dataset, split.test, source);
  const auto train_y = labels_of(dataset, split.train);
  const auto test_y = labels_of(dataset, split.test);
  ProbeReport r = fit_linear_probe(train_x, train_y, test_x, test_y, dataset.n_classes, config);
  r.source = source;
  return r;
}

HistogramReport histogram_from_features(const std::vector<Tensor>& z,
                                        const std::vector<Tensor>& zhat, Population population,
                                        const HistogramConfig& config) {
  if (config.bins < 10) throw std::invalid_argument("histograms need at least 10 bins");
  const bool aug = population == Population::AugmentedVsOriginal;
  if (aug && zhat.size() != z.size()) throw ShapeError("histogram: z-hat must cover every view");
  const std::size_t m = z.size();
  const std::size_t n = m ? z[0].rows() : 0;

  HistogramReport r;
  r.population = population;
  r.edges.resize(config.bins + 1);
  for (std::size_t b = 0; b <= config.bins; ++b) {
    r.edges[b] = static_cast<double>(b) / static_cast<double>(config.bins);
  }
  r.count_same.assign(config.bins, 0);
  r.count_diff.assign(config.bins, 0);

  std::vector<std::pair<std::size_t, std::size_t>> combos;
  // Augmented population: each feature against the augmentation of the same
  // view. Originals: every cross-view combination.
  for (std::size_t j = 0; j < m; ++j) {
    if (aug) combos.emplace_back(j, j);
    else
      for (std::size_t k = j + 1; k < m; ++k) combos.emplace_back(j, k);
  }
  const auto& right = aug ? zhat : z;

  double sum_same = 0.0;
  for (const auto& [j, k] : combos)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pair_d(z[j], i, right[k], i);
      ++r.count_same[bin_of(d, config.bins)];
      sum_same += d;
      ++r.n_same;
    }

  // Selection sampling over the ordered list of different-sample pairs.
  const std::size_t per_combo = n * (n > 0 ? n - 1 : 0);
  const std::size_t total = per_combo * combos.size();
  std::size_t wanted = std::min(total, config.max_diff_pairs);
  Rng rng(config.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum_diff = 0.0;
  std::size_t seen = 0;
  for (const auto& [j, k] : combos)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t i2 = 0; i2 < n; ++i2) {
        if (i == i2) continue;
        const std::size_t remaining = total - seen++;
        if (wanted == 0) continue;
        if (static_cast<double>(remaining) * u(rng) >= static_cast<double>(wanted)) continue;
        --wanted;
        const double d = pair_d(z[j], i, right[k], i2);
        ++r.count_diff[bin_of(d, config.bins)];
        sum_diff += d;
        ++r.n_diff;
      }
  r.mean_same = r.n_same ? sum_same / static_cast<double>(r.n_same) : 0.0;
  r.mean_diff = r.n_diff ? sum_diff / static_cast<double>(r.n_diff) : 0.0;
  return r;
}

HistogramReport similarity_histograms(const model::ParamGroup& params,
                                      const data::Dataset& dataset, Population population,
                                      const HistogramConfig& config) {
  std::vector<std::size_t> idx = dataset.split.test;
  if (idx.empty()) {
    idx.resize(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  const auto batch = data::gather_batch(dataset, idx);
  const auto ctx = model::ForwardContext::from_params(params, false, false);
  std::vector<Tensor> z, zhat;
  for (std::size_t j = 0; j < batch.m_views(); ++j) {
    const auto zj = ctx.project(j, ctx.encode(j, diff::constant(batch.views[j])));
    z.push_back(zj.value());
    if (population == Population::AugmentedVsOriginal) zhat.push_back(ctx.augment(j, zj).value());
  }
  return histogram_from_features(z, zhat, population, config);
}

CollapseReport collapse_metrics(const Tensor& x) {
  const std::size_t n = x.rows(), dim = x.cols();
  if (n < 2) throw std::invalid_argument("collapse metrics need at least two rows");
  CollapseReport r;

  Tensor unit = x;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = unit.row_view(i);
    const double norm = l2_norm(row);
    if (norm > 0.0)
      for (auto& v : row) v /= norm;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) s += pair_d(unit, i, unit, k);
  r.mean_pairwise_sim = s / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));

  Eigen::MatrixXd centered(n, dim);
  r.per_dim_std.assign(dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += x(i, k);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x(i, k) - mu;
      centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = c;
      var += c * c;
    }
    r.per_dim_std[k] = std::sqrt(var / static_cast<double>(n));
  }
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  const double total = sv.sum();
  if (!(total > 0.0)) {
    r.effective_rank = 1.0;
    return r;
  }
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double p = sv[i] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  r.effective_rank = std::exp(entropy);
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j = {{"name", report.name}};
  if (report.probe) {
    const auto& p = *report.probe;
    j["probe"] = {{"accuracy", p.accuracy},
                  {"per_class_accuracy", p.per_class_accuracy},
                  {"per_class_count", p.per_class_count},
                  {"source", to_string(p.source)},
                  {"steps", p.config.steps},
                  {"lr", p.config.lr},
                  {"n_train", p.n_train},
                  {"n_test", p.n_test}};
  }
  if (report.collapse) {
    const auto& c = *report.collapse;
    j["collapse"] = {{"mean_pairwise_sim", c.mean_pairwise_sim},
                     {"per_dim_std", c.per_dim_std},
                     {"effective_rank", c.effective_rank}};
  }
  if (report.histogram) {
    const auto& h = *report.histogram;
    j["histogram"] = {{"population", to_string(h.population)},
                      {"edges", h.edges},
                      {"count_same", h.count_same},
                      {"count_diff", h.count_diff},
                      {"n_same", h.n_same},
                      {"n_diff", h.n_diff},
                      {"mean_same", h.mean_same},
                      {"mean_diff", h.mean_diff}};
  }
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.name = j.at("name").get<std::string>();
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    ProbeReport probe;
    probe.accuracy = p.at("accuracy").get<double>();
    probe.per_class_accuracy = p.at("per_class_accuracy").get<std::vector<double>>();
    probe.per_class_count = p.at("per_class_count").get<std::vector<std::size_t>>();
    probe.source = feature_source_from_string(p.at("source").get<std::string>());
    probe.config.steps = p.at("steps").get<std::size_t>();
    probe.config.lr = p.at("lr").get<double>();
    probe.n_train = p.at("n_train").get<std::size_t>();
    probe.n_test = p.at("n_test").get<std::size_t>();
    r.probe = probe;
  }
  if (j.contains("collapse")) {
    const auto& c = j.at("collapse");
    r.collapse = CollapseReport{c.at("mean_pairwise_sim").get<double>(),
                                c.at("per_dim_std").get<std::vector<double>>(),
                                c.at("effective_rank").get<double>()};
  }
  if (j.contains("histogram")) {
    const auto& h = j.at("histogram");
    HistogramReport hist;
    hist.population = population_from_string(h.at("population").get<std::string>());
    hist.edges = h.at("edges").get<std::vector<double>>();
    hist.count_same = h.at("count_same").get<std::vector<std::size_t>>();
    hist.count_diff = h.at("count_diff").get<std::vector<std::size_t>>();
    hist.n_same = h.at("n_same").get<std::size_t>();
    hist.n_diff = h.at("n_diff").get<std::size_t>();
    hist.mean_same = h.at("mean_same").get<double>();
    hist.mean_diff = h.at("mean_diff").get<double>();
    r.histogram = hist;
  }
  return r;
}

void export_reports(std::span<const EvalReport> reports, const std::filesystem::path& path,
                    ExportFormat format) {
  auto out = open_output(path);
  switch (format) {
    case ExportFormat::Json: {
      nlohmann::json all = nlohmann::json::array();
      for (const auto& r : reports) all.push_back(to_json(r));
      out << nlohmann::json{{"reports", all}}.dump(2) << '\n';
      break;
    }
    case ExportFormat::Csv: {
      out << "report,metric,value\n";
      for (const auto& r : reports) {
        auto row = [&](const std::string& metric, double v) {
          out << r.name << ',' << metric << ',' << format_double(v) << '\n';
        };
        if (r.probe) {
          row("probe.accuracy", r.probe->accuracy);
          for (std::size_t k = 0; k < r.probe->per_class_accuracy.size(); ++k) {
            row("probe.class_" + std::to_string(k) + "_accuracy", r.probe->per_class_accuracy[k]);
          }
        }
        if (r.collapse) {
          row("collapse.mean_pairwise_sim", r.collapse->mean_pairwise_sim);
          row("collapse.effective_rank", r.collapse->effective_rank);
          for (std::size_t k = 0; k < r.collapse->per_dim_std.size(); ++k) {
            row("collapse.std_" + std::to_string(k), r.collapse->per_dim_std[k]);
          }
        }
        if (r.histogram) {
          row("histogram.n_same", static_cast<double>(r.histogram->n_same));
          row("histogram.n_diff", static_cast<double>(r.histogram->n_diff));
          row("histogram.mean_same", r.histogram->mean_same);
          row("histogram.mean_diff", r.histogram->mean_diff);
        }
      }
      break;
    }
    case ExportFormat::HistogramCsv: {
      out << "report,bin_left,bin_right,count_same,count_diff\n";
      for (const auto& r : reports) {
        if (!r.histogram) continue;
        const auto& h = *r.histogram;
        for (std::size_t b = 0; b < h.count_same.size(); ++b) {
          out << r.name << ',' << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1])
              << ',' << h.count_same[b] << ',' << h.count_diff[b] << '\n';
        }
      }
      break;
    }
  }
  if (!out) throw std::runtime_error("failed while writing report to " + path.string());
}

std::vector<EvalReport> import_reports_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read report " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<EvalReport> out;
  for (const auto& r : j.at("reports")) out.push_back(eval_report_from_json(r));
  return out;
}

}  // namespace metaug::eval
