// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "userdp/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "userdp/errors.h"
#include "userdp/rng.h"

namespace userdp::analysis {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double Quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  double pos = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

void ApplyAxis(mechanisms::TrainConfig& cfg, const std::string& name,
               const std::string& value) {
  auto as_double = [&]() {
    if (value == "inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("sweep axis '" + name + "': bad number '" + value + "'");
    }
  };
  auto as_int = [&]() {
    double v = as_double();
    if (v != std::floor(v)) {
      throw ConfigError("sweep axis '" + name + "': '" + value +
                        "' is not an integer");
    }
    return static_cast<int>(v);
  };
  if (name == "epsilon") {
    cfg.epsilon = as_double();
  } else if (name == "clip_norm") {
    cfg.clip_norm = as_double();
  } else if (name == "eta") {
    cfg.eta = as_double();
  } else if (name == "k") {
    cfg.k = as_int();
  } else if (name == "steps") {
    cfg.steps = as_int();
  } else if (name == "tau") {
    cfg.tau = as_double();
  } else if (name == "record_batch") {
    cfg.record_batch = as_double();
  } else if (name == "user_batch") {
    cfg.user_batch = as_double();
  } else if (name == "strategy") {
    cfg.strategy = corpus::ParseStrategy(value);
  } else {
    throw ConfigError("unknown sweep axis '" + name + "'");
  }
}

}  // namespace

NoiseComparison EffectiveNoiseCurves(double epsilon, double delta,
                                     int num_steps, double num_users, int k,
                                     double clip_norm,
                                     const std::vector<double>& ratio_grid,
                                     const accounting::PldOptions& opts) {
  if (ratio_grid.empty()) throw ConfigError("ratio grid must be nonempty");
  for (double r : ratio_grid) {
    if (!(r > 0)) throw ConfigError("ratios must be positive");
  }
  if (!std::is_sorted(ratio_grid.begin(), ratio_grid.end())) {
    throw ConfigError("ratio grid must be sorted ascending");
  }
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  if (!(num_users >= 1)) throw ConfigError("num_users must be at least 1");
  if (num_users != std::floor(num_users)) {
    throw ConfigError("num_users must be integral");
  }

  NoiseComparison out;
  out.clip_norm = clip_norm;
  out.k = k;
  out.ratio = ratio_grid;
  out.sigma_standard = accounting::CalibrateNoise(epsilon, delta, num_users,
                                                  num_users, num_steps, opts);
  out.sigma_filtered = accounting::CalibrateNoise(
      epsilon / 2.0, delta / 2.0, num_users, num_users, num_steps, opts);

  std::size_t n_users = static_cast<std::size_t>(num_users);
  double standard = out.sigma_standard * clip_norm / num_users;
  out.standard_noise.assign(ratio_grid.size(), standard);
  out.filtered_noise.reserve(ratio_grid.size());
  for (double r : ratio_grid) {
    out.filtered_noise.push_back(mechanisms::FilteredNoiseStddev(
        r * clip_norm, epsilon, delta, num_steps, n_users,
        out.sigma_filtered));
  }

  out.crossover_ratio = kNan;
  for (std::size_t i = 0; i < ratio_grid.size(); ++i) {
    double gap = out.filtered_noise[i] - out.standard_noise[i];
    if (gap == 0.0) {
      out.crossover_ratio = ratio_grid[i];
      break;
    }
    if (gap > 0.0) {
      if (i == 0) break;  // already above the constant curve at the left edge
      double prev_gap = out.filtered_noise[i - 1] - out.standard_noise[i - 1];
      double t = -prev_gap / (gap - prev_gap);
      out.crossover_ratio =
          ratio_grid[i - 1] + t * (ratio_grid[i] - ratio_grid[i - 1]);
      break;
    }
  }
  return out;
}

ConcentrationReport MeasureConcentration(const models::Model& model,
                                         const corpus::UserCorpus& corpus,
                                         int k,
                                         corpus::SelectionStrategy strategy,
                                         std::size_t max_seq_len,
                                         std::size_t probe_users,
                                         std::uint64_t seed) {
  if (probe_users < 2) throw ConfigError("need at least 2 probe users");
  if (probe_users > corpus.num_units()) {
    throw ConfigError("probe size exceeds the number of units");
  }
  if (k < 1) throw ConfigError("k must be at least 1");

  std::mt19937_64 rng = SubStream(seed, "concentration");
  std::vector<std::size_t> pool(corpus.num_units());
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(probe_users);

  std::vector<std::vector<double>> grads(probe_users);
  std::vector<double> grad;
  std::vector<double> norms;
  for (std::size_t i = 0; i < probe_users; ++i) {
    std::vector<corpus::Record> records = corpus::SampleUserRecords(
        corpus, pool[i], k, strategy, max_seq_len, nullptr, rng);
    std::vector<double> sum(model.dim(), 0.0);
    std::size_t used = 0;
    for (const corpus::Record& r : records) {
      if (r.tokens.size() < model.min_record_tokens()) continue;
      model.LossAndGradient(r, &grad);
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += grad[j];
      ++used;
    }
    if (used > 1) {
      for (double& x : sum) x /= static_cast<double>(used);
    }
    norms.push_back(mechanisms::L2Norm(sum));
    grads[i] = std::move(sum);
  }

  std::sort(norms.begin(), norms.end());
  ConcentrationReport report;
  report.probe_users = probe_users;
  report.median_grad_norm = Quantile(norms, 0.5);
  if (!(report.median_grad_norm > 0)) {
    throw NumericError("median gradient norm is zero; nothing to normalize by");
  }

  for (std::size_t i = 0; i < probe_users; ++i) {
    for (std::size_t j = i + 1; j < probe_users; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < grads[i].size(); ++c) {
        double d = grads[i][c] - grads[j][c];
        s += d * d;
      }
      report.normalized_distances.push_back(std::sqrt(s) /
                                            report.median_grad_norm);
    }
  }
  std::sort(report.normalized_distances.begin(),
            report.normalized_distances.end());
  report.q10 = Quantile(report.normalized_distances, 0.10);
  report.q50 = Quantile(report.normalized_distances, 0.50);
  report.q90 = Quantile(report.normalized_distances, 0.90);
  return report;
}

std::vector<SweepRow> RunSweep(const mechanisms::TrainConfig& base,
                               const std::vector<SweepAxis>& axes,
                               const std::vector<std::uint64_t>& seeds,
                               const ModelFactory& factory,
                               const corpus::UserCorpus& train_corpus,
                               const corpus::UserCorpus* eval_corpus) {
  if (axes.empty()) throw ConfigError("sweep needs at least one axis");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  for (const SweepAxis& axis : axes) {
    if (axis.values.empty()) {
      throw ConfigError("sweep axis '" + axis.name + "' has no values");
    }
  }

  std::size_t cells = 1;
  for (const SweepAxis& axis : axes) cells *= axis.values.size();

  std::vector<SweepRow> rows;
  rows.reserve(cells * seeds.size());
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    mechanisms::TrainConfig cfg = base;
    std::vector<std::pair<std::string, std::string>> params;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string& value = axes[a].values[idx[a]];
      ApplyAxis(cfg, axes[a].name, value);
      params.emplace_back(axes[a].name, value);
    }
    for (std::uint64_t seed : seeds) {
      SweepRow row;
      row.params = params;
      row.seed = seed;
      try {
        std::unique_ptr<models::Model> model = factory(seed);
        mechanisms::TrainResult result =
            mechanisms::Train(*model, train_corpus, eval_corpus, cfg, seed);
        row.sigma = result.sigma;
        row.final_loss =
            result.history.empty() ? kNan : result.history.back().loss;
        row.final_eval_ppl = result.final_eval_ppl;
        row.halted = result.halted;
      } catch (const std::exception& e) {
        row.error = e.what();
        row.sigma = kNan;
        row.final_loss = kNan;
        row.final_eval_ppl = kNan;
      }
      rows.push_back(std::move(row));
    }
    // Odometer over the axes, last axis fastest.
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  return rows;
}

void WriteNoiseCurvesCsv(const NoiseComparison& curves,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "label,ratio,standard_noise,filtered_noise\n";
  for (std::size_t i = 0; i < curves.ratio.size(); ++i) {
    out << "grid," << FormatDouble(curves.ratio[i]) << ','
        << FormatDouble(curves.standard_noise[i]) << ','
        << FormatDouble(curves.filtered_noise[i]) << '\n';
  }
  if (std::isfinite(curves.crossover_ratio) && !curves.standard_noise.empty()) {
    // At the crossing both curves sit on the constant standard level.
    const std::string level = FormatDouble(curves.standard_noise.front());
    out << "crossover," << FormatDouble(curves.crossover_ratio) << ',' << level
        << ',' << level << '\n';
  }
  if (!out) throw ParseError("failed writing '" + path + "'");
}

void WriteConcentrationCsv(const ConcentrationReport& report,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "stat,value\n";
  out << "probe_users," << report.probe_users << '\n';
  out << "median_grad_norm," << FormatDouble(report.median_grad_norm) << '\n';
  out << "q10," << FormatDouble(report.q10) << '\n';
  out << "q50," << FormatDouble(report.q50) << '\n';
  out << "q90," << FormatDouble(report.q90) << '\n';
  if (!out) throw ParseError("failed writing '" + path + "'");
}

void WriteSweepCsv(const std::vector<SweepAxis>& axes,
                   const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (const SweepAxis& axis : axes) out << axis.name << ',';
  out << "seed,sigma,final_loss,final_eval_ppl,halted,error\n";
  for (const SweepRow& row : rows) {
    for (const auto& [name, value] : row.params) out << value << ',';
    out << row.seed << ',' << FormatDouble(row.sigma) << ','
        << FormatDouble(row.final_loss) << ','
        << FormatDouble(row.final_eval_ppl) << ',' << (row.halted ? 1 : 0)
        << ',';
    // Errors may contain commas; quote the field.
    if (!row.error.empty()) {
      std::string quoted = row.error;
      std::string::size_type pos = 0;
      while ((pos = quoted.find('"', pos)) != std::string::npos) {
        quoted.insert(pos, 1, '"');
        pos += 2;
      }
      out << '"' << quoted << '"';
    }
    out << '\n';
  }
  if (!out) throw ParseError("failed writing '" + path + "'");
}

}  // namespace userdp::analysis
