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

#ifndef USERDP_MECHANISMS_H_
#define USERDP_MECHANISMS_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "userdp/accounting.h"
#include "userdp/corpus.h"
#include "userdp/models.h"

namespace userdp::mechanisms {

double L2Norm(std::span<const double> v);

// Scales v down to norm clip_norm when it exceeds it; vectors already within
// the ball pass through untouched (no rescaling error). Returns whether
// clipping happened. clip_norm must be positive.
bool ClipInPlace(std::vector<double>& v, double clip_norm);

// Per-gradient DP-SGD aggregation: clip each contribution to clip_norm, sum,
// add N(0, sigma^2 clip_norm^2 I), divide by expected_batch. With
// non_private set, contributions are averaged raw over the realized batch
// (no clipping, no noise) and rng is untouched.
struct AggregateParams {
  double clip_norm = 1.0;
  double sigma = 0.0;
  double expected_batch = 1.0;
  bool non_private = false;
};

struct StepOutcome {
  std::vector<double> update;  // average (noised) gradient fed to the model
  double mean_loss = 0.0;      // over contributing records
  double clipped_fraction = 0.0;
  std::size_t realized_batch = 0;   // contributions before division
  std::size_t included_users = 0;   // distinct units contributing
  bool halted = false;              // filtered mechanism only
};

// One record-level step: the batch is a set of already-selected records.
// Records below the model's minimum length are skipped and do not count
// toward the realized batch.
StepOutcome GroupPrivacyStep(const models::Model& model,
                             const std::vector<const corpus::Record*>& batch,
                             const std::vector<std::size_t>& batch_units,
                             const AggregateParams& params,
                             std::mt19937_64& noise_rng);

// One user-level step: every sampled user contributes the average gradient
// of k records drawn per the strategy, clipped as a whole.
StepOutcome UserWiseStep(const models::Model& model,
                         const corpus::UserCorpus& corpus,
                         const std::vector<std::size_t>& user_batch, int k,
                         corpus::SelectionStrategy strategy,
                         std::size_t max_seq_len,
                         const corpus::RecordScorer* scorer,
                         const AggregateParams& params,
                         std::mt19937_64& records_rng,
                         std::mt19937_64& noise_rng);

// Pairwise concentration: (1/N) * |{(i, j) : ||g_i - g_j|| <= tau}| over all
// ordered pairs including i == j, so the score lies in [1, N].
double ConcentrationScore(const std::vector<std::vector<double>>& grads,
                          double tau);

// One noisy-threshold comparison: score + Lap(4 sensitivity / epsilon)
// against threshold + Lap(2 sensitivity / epsilon), both drawn fresh.
bool AboveThresholdOnce(double score, double epsilon, double threshold,
                        double sensitivity, std::mt19937_64& rng);

// Stateful variant for a training run: the threshold noise is drawn once at
// construction and shared by every query; only the query noise is fresh.
class AboveThresholdRunner {
 public:
  AboveThresholdRunner(double epsilon, double threshold, double sensitivity,
                       std::mt19937_64& rng);
  bool Query(double score, std::mt19937_64& rng) const;
  double threshold() const { return threshold_; }
  double noisy_threshold() const { return noisy_threshold_; }

 private:
  double threshold_;
  double noisy_threshold_;
  double query_scale_;
};

// Soft outlier removal: with f_i = |{j : ||g_i - g_j|| <= 2 tau}| (self
// included), user i survives with probability 0 below N/2 neighbors, 1 from
// 2N/3 up, and (f_i - N/2) / (N/6) in between.
struct FilterResult {
  std::vector<double> keep_probability;
  std::vector<std::size_t> kept;
};
FilterResult FilterOutliers(const std::vector<std::vector<double>>& grads,
                            double tau, std::mt19937_64& rng);

// Per-coordinate noise scale of the filtered mechanism:
// sqrt(8 ln(e^epsilon num_steps / delta)) * tau * sigma / num_users.
double FilteredNoiseStddev(double tau, double epsilon, double delta,
                           int num_steps, std::size_t num_users, double sigma);

struct FilteredStepParams {
  double clip_norm = 1.0;
  double tau = 1.0;
  double epsilon = 1.0;  // full budget; halves go to the threshold and noise
  double delta = 1e-5;
  int num_steps = 1;
  double sigma = 0.0;    // calibrated at (epsilon/2, delta/2), q = 1
  int k = 1;
  corpus::SelectionStrategy strategy = corpus::SelectionStrategy::kRandom;
  std::size_t max_seq_len = 0;
  bool non_private = false;
};

// One step of the concentration-filtered mechanism over the full user set:
// score the gradients' concentration, stop the run when the noisy threshold
// check fails, otherwise average the filter's survivors and add noise scaled
// by FilteredNoiseStddev.
StepOutcome FilteredStep(const models::Model& model,
                         const corpus::UserCorpus& corpus,
                         const FilteredStepParams& params,
                         const corpus::RecordScorer* scorer,
                         const AboveThresholdRunner* svt,
                         std::mt19937_64& records_rng,
                         std::mt19937_64& noise_rng,
                         std::mt19937_64& svt_rng,
                         std::mt19937_64& filter_rng);

enum class Mechanism { kGroupPrivacy, kUserWise, kFiltered };
Mechanism ParseMechanism(std::string_view name);
std::string_view MechanismName(Mechanism m);

enum class GroupAccounting { kMixture, kNaive };

struct TrainConfig {
  Mechanism mechanism = Mechanism::kUserWise;
  double epsilon = 1.0;  // +infinity trains without clipping or noise
  double delta = 1e-5;
  double clip_norm = 1.0;
  double eta = 0.1;
  int steps = 100;
  double record_batch = 0.0;  // expected records per step (group privacy)
  double user_batch = 0.0;    // expected users per step (user-wise)
  int k = 1;
  corpus::SelectionStrategy strategy = corpus::SelectionStrategy::kRandom;
  std::size_t max_seq_len = 64;
  double tau = 1.0;
  double svt_sensitivity = 2.0;
  int eval_every = 0;  // 0: evaluate only after the last step
  std::optional<double> sigma_override;
  GroupAccounting group_accounting = GroupAccounting::kMixture;
  accounting::NaiveGroupForm naive_form = accounting::NaiveGroupForm::kStandard;
  accounting::PldOptions accounting;
};

struct HistoryRow {
  int step = 0;  // 1-based
  double loss = 0.0;
  double eval_ppl = std::numeric_limits<double>::quiet_NaN();
  double clipped_fraction = 0.0;
  std::size_t realized_batch = 0;
  bool halted = false;
  std::size_t included_users = 0;
  double sigma = 0.0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  double sigma = 0.0;
  double sampling_q = 0.0;
  bool halted = false;
  int halted_step = -1;  // 1-based step at which the run stopped
  double final_eval_ppl = std::numeric_limits<double>::quiet_NaN();
};

// Runs the configured mechanism for cfg.steps steps. All randomness comes
// from per-purpose streams of the seed, so reruns are bit-identical and
// mechanisms that share a purpose see the same draws. Throws NumericError
// when the loss or parameters stop being finite.
TrainResult Train(models::Model& model, const corpus::UserCorpus& train_corpus,
                  const corpus::UserCorpus* eval_corpus,
                  const TrainConfig& cfg, std::uint64_t seed);

// CSV with the exact column set of HistoryRow; eval_ppl is empty on steps
// without an evaluation. Identical runs produce identical bytes.
void WriteHistoryCsv(const std::vector<HistoryRow>& history,
                     const std::string& path);

}  // namespace userdp::mechanisms

#endif  // USERDP_MECHANISMS_H_
