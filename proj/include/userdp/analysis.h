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

#ifndef USERDP_ANALYSIS_H_
#define USERDP_ANALYSIS_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "userdp/accounting.h"
#include "userdp/corpus.h"
#include "userdp/mechanisms.h"
#include "userdp/models.h"

namespace userdp::analysis {

// Per-coordinate noise std of the full-batch update, as a function of the
// ratio tau / clip_norm. "Effective noise" means the std of the additive
// noise on the averaged gradient: sigma_std * C / N for the plain mechanism,
// and the filtered step's injected std for the filtered one. The plain
// mechanism keeps the full (epsilon, delta) budget; the filtered one splits
// it in half between its own accounting and the halting test, so each curve
// uses the sigma its own training loop would calibrate.
struct NoiseComparison {
  double sigma_standard = 0.0;
  double sigma_filtered = 0.0;
  double clip_norm = 1.0;
  int k = 1;
  std::vector<double> ratio;
  std::vector<double> standard_noise;
  std::vector<double> filtered_noise;
  // First grid crossing, linearly interpolated; NaN when the curves do not
  // cross inside the grid.
  double crossover_ratio = 0.0;
};

NoiseComparison EffectiveNoiseCurves(double epsilon, double delta,
                                     int num_steps, double num_users, int k,
                                     double clip_norm,
                                     const std::vector<double>& ratio_grid,
                                     const accounting::PldOptions& opts = {});

// Quantiles of pairwise distances between per-user averaged gradients,
// normalized by the median gradient norm (the stand-in for a clipping norm
// chosen without looking at privacy budgets).
struct ConcentrationReport {
  std::size_t probe_users = 0;
  double median_grad_norm = 0.0;
  double q10 = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  std::vector<double> normalized_distances;  // sorted ascending
};

ConcentrationReport MeasureConcentration(const models::Model& model,
                                         const corpus::UserCorpus& corpus,
                                         int k,
                                         corpus::SelectionStrategy strategy,
                                         std::size_t max_seq_len,
                                         std::size_t probe_users,
                                         std::uint64_t seed);

// One sweep axis: a training-config field and the values to try. Numeric
// fields take decimal strings; "strategy" takes strategy names; "epsilon"
// accepts "inf". Known fields: epsilon, clip_norm, eta, k, steps, tau,
// record_batch, user_batch, strategy.
struct SweepAxis {
  std::string name;
  std::vector<std::string> values;
};

struct SweepRow {
  std::vector<std::pair<std::string, std::string>> params;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  double final_loss = 0.0;
  double final_eval_ppl = 0.0;
  bool halted = false;
  std::string error;  // nonempty when this cell failed; other fields unset
};

using ModelFactory =
    std::function<std::unique_ptr<models::Model>(std::uint64_t seed)>;

// Cross product of the axes times the seeds, one training run per row, in
// axis-major order. A failing cell records its error and the sweep moves on.
std::vector<SweepRow> RunSweep(const mechanisms::TrainConfig& base,
                               const std::vector<SweepAxis>& axes,
                               const std::vector<std::uint64_t>& seeds,
                               const ModelFactory& factory,
                               const corpus::UserCorpus& train_corpus,
                               const corpus::UserCorpus* eval_corpus);

void WriteNoiseCurvesCsv(const NoiseComparison& curves, const std::string& path);
void WriteConcentrationCsv(const ConcentrationReport& report,
                           const std::string& path);
void WriteSweepCsv(const std::vector<SweepAxis>& axes,
                   const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace userdp::analysis

#endif  // USERDP_ANALYSIS_H_
