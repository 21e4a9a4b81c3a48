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

#include "userdp/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <Eigen/Dense>

#include "userdp/errors.h"
#include "userdp/rng.h"

namespace userdp::mechanisms {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void AddGaussianNoise(std::vector<double>& v, double stddev,
                      std::mt19937_64& rng) {
  if (stddev == 0.0) return;
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& x : v) x += normal(rng);
}

// Squared pairwise distances via the Gram matrix; clamped at zero against
// cancellation.
Eigen::MatrixXd PairwiseDistSq(const std::vector<std::vector<double>>& grads) {
  const std::size_t n = grads.size();
  if (n == 0) throw ConfigError("need at least one gradient");
  const std::size_t d = grads.front().size();
  Eigen::MatrixXd g(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (grads[i].size() != d) {
      throw ConfigError("gradients must share one dimension");
    }
    g.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(grads[i].data(), static_cast<Eigen::Index>(d));
  }
  Eigen::MatrixXd gram = g * g.transpose();
  Eigen::VectorXd sq = gram.diagonal();
  Eigen::MatrixXd dist =
      (sq.rowwise().replicate(static_cast<Eigen::Index>(n)) +
       sq.transpose().colwise().replicate(static_cast<Eigen::Index>(n)) -
       2.0 * gram)
          .cwiseMax(0.0);
  return dist;
}

double ConcentrationScoreFromDistSq(const Eigen::MatrixXd& dist_sq, double tau) {
  const Eigen::Index n = dist_sq.rows();
  const double tau_sq = tau * tau;
  std::int64_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (dist_sq(i, j) <= tau_sq) ++count;
    }
  }
  return static_cast<double>(count) / static_cast<double>(n);
}

FilterResult FilterFromDistSq(const Eigen::MatrixXd& dist_sq, double tau,
                              std::mt19937_64& rng) {
  const Eigen::Index n = dist_sq.rows();
  const double radius_sq = 4.0 * tau * tau;  // ||g_i - g_j|| <= 2 tau
  const double nd = static_cast<double>(n);

  FilterResult out;
  out.keep_probability.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int neighbors = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (dist_sq(i, j) <= radius_sq) ++neighbors;
    }
    double f = static_cast<double>(neighbors);
    double p;
    if (f < nd / 2.0) {
      p = 0.0;
    } else if (f >= 2.0 * nd / 3.0) {
      p = 1.0;
    } else {
      p = (f - nd / 2.0) / (nd / 6.0);
    }
    out.keep_probability[static_cast<std::size_t>(i)] = p;
    std::bernoulli_distribution keep(p);
    if (keep(rng)) out.kept.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

void ValidateAggregate(const AggregateParams& p) {
  if (!p.non_private) {
    if (!(p.clip_norm > 0)) throw ConfigError("clip_norm must be positive");
    if (p.sigma < 0) throw ConfigError("sigma must be nonnegative");
    if (!(p.expected_batch > 0)) {
      throw ConfigError("expected_batch must be positive");
    }
  }
}

// Average gradient of k records sampled from one unit; records the model
// cannot score are dropped from the average.
std::vector<double> UserGradient(const models::Model& model,
                                 const corpus::UserCorpus& corpus,
                                 std::size_t unit, int k,
                                 corpus::SelectionStrategy strategy,
                                 std::size_t max_seq_len,
                                 const corpus::RecordScorer* scorer,
                                 std::mt19937_64& records_rng,
                                 double* loss_sum, std::size_t* loss_count) {
  std::vector<corpus::Record> records = corpus::SampleUserRecords(
      corpus, unit, k, strategy, max_seq_len, scorer, records_rng);
  std::vector<double> sum(model.dim(), 0.0);
  std::vector<double> grad;
  std::size_t used = 0;
  for (const corpus::Record& r : records) {
    if (r.tokens.size() < model.min_record_tokens()) continue;
    double loss = model.LossAndGradient(r, &grad);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += grad[j];
    *loss_sum += loss;
    ++*loss_count;
    ++used;
  }
  if (used > 1) {
    for (double& x : sum) x /= static_cast<double>(used);
  }
  return sum;
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool ClipInPlace(std::vector<double>& v, double clip_norm) {
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  double norm = L2Norm(v);
  if (norm <= clip_norm) return false;
  double scale = clip_norm / norm;
  for (double& x : v) x *= scale;
  return true;
}

StepOutcome GroupPrivacyStep(const models::Model& model,
                             const std::vector<const corpus::Record*>& batch,
                             const std::vector<std::size_t>& batch_units,
                             const AggregateParams& params,
                             std::mt19937_64& noise_rng) {
  if (batch.size() != batch_units.size()) {
    throw ConfigError("batch and batch_units must be the same length");
  }
  ValidateAggregate(params);

  StepOutcome out;
  out.update.assign(model.dim(), 0.0);
  std::vector<double> grad;
  double loss_sum = 0.0;
  std::size_t clipped = 0;
  std::unordered_set<std::size_t> units;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const corpus::Record& r = *batch[i];
    if (r.tokens.size() < model.min_record_tokens()) continue;
    loss_sum += model.LossAndGradient(r, &grad);
    if (!params.non_private && ClipInPlace(grad, params.clip_norm)) ++clipped;
    for (std::size_t j = 0; j < out.update.size(); ++j) out.update[j] += grad[j];
    ++out.realized_batch;
    units.insert(batch_units[i]);
  }
  out.included_users = units.size();
  out.mean_loss = out.realized_batch > 0
                      ? loss_sum / static_cast<double>(out.realized_batch)
                      : kNan;
  out.clipped_fraction =
      out.realized_batch > 0
          ? static_cast<double>(clipped) / static_cast<double>(out.realized_batch)
          : 0.0;

  if (params.non_private) {
    if (out.realized_batch > 0) {
      for (double& x : out.update) x /= static_cast<double>(out.realized_batch);
    }
  } else {
    AddGaussianNoise(out.update, params.sigma * params.clip_norm, noise_rng);
    for (double& x : out.update) x /= params.expected_batch;
  }
  return out;
}

StepOutcome UserWiseStep(const models::Model& model,
                         const corpus::UserCorpus& corpus,
                         const std::vector<std::size_t>& user_batch, int k,
                         corpus::SelectionStrategy strategy,
                         std::size_t max_seq_len,
                         const corpus::RecordScorer* scorer,
                         const AggregateParams& params,
                         std::mt19937_64& records_rng,
                         std::mt19937_64& noise_rng) {
  ValidateAggregate(params);

  StepOutcome out;
  out.update.assign(model.dim(), 0.0);
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::size_t clipped = 0;
  for (std::size_t unit : user_batch) {
    std::vector<double> g =
        UserGradient(model, corpus, unit, k, strategy, max_seq_len, scorer,
                     records_rng, &loss_sum, &loss_count);
    if (!params.non_private && ClipInPlace(g, params.clip_norm)) ++clipped;
    for (std::size_t j = 0; j < out.update.size(); ++j) out.update[j] += g[j];
    ++out.realized_batch;
  }
  out.included_users = out.realized_batch;
  out.mean_loss =
      loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : kNan;
  out.clipped_fraction =
      out.realized_batch > 0
          ? static_cast<double>(clipped) / static_cast<double>(out.realized_batch)
          : 0.0;

  if (params.non_private) {
    if (out.realized_batch > 0) {
      for (double& x : out.update) x /= static_cast<double>(out.realized_batch);
    }
  } else {
    AddGaussianNoise(out.update, params.sigma * params.clip_norm, noise_rng);
    for (double& x : out.update) x /= params.expected_batch;
  }
  return out;
}

double ConcentrationScore(const std::vector<std::vector<double>>& grads,
                          double tau) {
  if (tau < 0) throw ConfigError("tau must be nonnegative");
  return ConcentrationScoreFromDistSq(PairwiseDistSq(grads), tau);
}

bool AboveThresholdOnce(double score, double epsilon, double threshold,
                        double sensitivity, std::mt19937_64& rng) {
  AboveThresholdRunner runner(epsilon, threshold, sensitivity, rng);
  return runner.Query(score, rng);
}

AboveThresholdRunner::AboveThresholdRunner(double epsilon, double threshold,
                                           double sensitivity,
                                           std::mt19937_64& rng)
    : threshold_(threshold) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw ConfigError("above-threshold epsilon must be positive and finite");
  }
  if (!(sensitivity > 0)) {
    throw ConfigError("above-threshold sensitivity must be positive");
  }
  noisy_threshold_ = threshold + SampleLaplace(2.0 * sensitivity / epsilon, rng);
  query_scale_ = 4.0 * sensitivity / epsilon;
}

bool AboveThresholdRunner::Query(double score, std::mt19937_64& rng) const {
  return score + SampleLaplace(query_scale_, rng) >= noisy_threshold_;
}

FilterResult FilterOutliers(const std::vector<std::vector<double>>& grads,
                            double tau, std::mt19937_64& rng) {
  if (tau < 0) throw ConfigError("tau must be nonnegative");
  return FilterFromDistSq(PairwiseDistSq(grads), tau, rng);
}

double FilteredNoiseStddev(double tau, double epsilon, double delta,
                           int num_steps, std::size_t num_users, double sigma) {
  if (tau < 0) throw ConfigError("tau must be nonnegative");
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw ConfigError("epsilon must be positive and finite");
  }
  if (!(delta > 0) || delta >= 1.0) throw ConfigError("delta must lie in (0, 1)");
  if (num_steps < 1) throw ConfigError("num_steps must be at least 1");
  if (num_users < 1) throw ConfigError("num_users must be at least 1");
  if (sigma < 0) throw ConfigError("sigma must be nonnegative");
  double log_term =
      epsilon + std::log(static_cast<double>(num_steps)) - std::log(delta);
  return std::sqrt(8.0 * log_term) * tau * sigma /
         static_cast<double>(num_users);
}

StepOutcome FilteredStep(const models::Model& model,
                         const corpus::UserCorpus& corpus,
                         const FilteredStepParams& params,
                         const corpus::RecordScorer* scorer,
                         const AboveThresholdRunner* svt,
                         std::mt19937_64& records_rng,
                         std::mt19937_64& noise_rng,
                         std::mt19937_64& svt_rng,
                         std::mt19937_64& filter_rng) {
  const std::size_t n = corpus.num_units();
  if (n == 0) throw ConfigError("corpus has no units");
  if (!params.non_private && svt == nullptr) {
    throw ConfigError("private filtered step needs a threshold runner");
  }

  StepOutcome out;
  out.update.assign(model.dim(), 0.0);
  out.realized_batch = n;

  std::vector<std::vector<double>> grads(n);
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    grads[i] = UserGradient(model, corpus, i, params.k, params.strategy,
                            params.max_seq_len, scorer, records_rng,
                            &loss_sum, &loss_count);
  }
  out.mean_loss =
      loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : kNan;

  if (params.non_private) {
    for (const auto& g : grads) {
      for (std::size_t j = 0; j < g.size(); ++j) out.update[j] += g[j];
    }
    for (double& x : out.update) x /= static_cast<double>(n);
    out.included_users = n;
    return out;
  }

  std::size_t clipped = 0;
  for (auto& g : grads) {
    if (ClipInPlace(g, params.clip_norm)) ++clipped;
  }
  out.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(n);

  Eigen::MatrixXd dist_sq = PairwiseDistSq(grads);
  double score = ConcentrationScoreFromDistSq(dist_sq, params.tau);
  if (!svt->Query(score, svt_rng)) {
    out.halted = true;
    std::fill(out.update.begin(), out.update.end(), 0.0);
    return out;
  }

  FilterResult filter = FilterFromDistSq(dist_sq, params.tau, filter_rng);
  out.included_users = filter.kept.size();
  if (!filter.kept.empty()) {
    for (std::size_t i : filter.kept) {
      for (std::size_t j = 0; j < out.update.size(); ++j) {
        out.update[j] += grads[i][j];
      }
    }
    for (double& x : out.update) x /= static_cast<double>(filter.kept.size());
  }
  AddGaussianNoise(out.update,
                   FilteredNoiseStddev(params.tau, params.epsilon, params.delta,
                                       params.num_steps, n, params.sigma),
                   noise_rng);
  return out;
}

Mechanism ParseMechanism(std::string_view name) {
  if (name == "group") return Mechanism::kGroupPrivacy;
  if (name == "userwise") return Mechanism::kUserWise;
  if (name == "filtered") return Mechanism::kFiltered;
  throw ConfigError("unknown mechanism '" + std::string(name) + "'");
}

std::string_view MechanismName(Mechanism m) {
  switch (m) {
    case Mechanism::kGroupPrivacy: return "group";
    case Mechanism::kUserWise: return "userwise";
    case Mechanism::kFiltered: return "filtered";
  }
  throw ConfigError("invalid mechanism value");
}

TrainResult Train(models::Model& model, const corpus::UserCorpus& train_corpus,
                  const corpus::UserCorpus* eval_corpus,
                  const TrainConfig& cfg, std::uint64_t seed) {
  const std::size_t n_units = train_corpus.num_units();
  if (n_units == 0) throw ConfigError("training corpus has no units");
  if (cfg.steps < 0) throw ConfigError("steps must be nonnegative");
  if (!(cfg.eta > 0) || !std::isfinite(cfg.eta)) {
    throw ConfigError("eta must be positive and finite");
  }
  if (cfg.k < 1) throw ConfigError("k must be at least 1");
  if (!(cfg.epsilon > 0)) throw ConfigError("epsilon must be positive");

  const bool non_private = std::isinf(cfg.epsilon);
  if (!non_private) {
    if (!(cfg.delta > 0) || cfg.delta >= 1.0) {
      throw ConfigError("delta must lie in (0, 1)");
    }
    if (!(cfg.clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  }

  if (cfg.steps == 0) {
    // Zero steps spend no privacy: the model is returned untouched.
    TrainResult result;
    if (eval_corpus != nullptr) {
      result.final_eval_ppl = models::Perplexity(model, *eval_corpus);
    }
    return result;
  }

  // The ppl strategies rank records by how surprising they are to the model
  // before any training, so scores are frozen now.
  const bool needs_scorer =
      cfg.strategy == corpus::SelectionStrategy::kHighestPpl ||
      cfg.strategy == corpus::SelectionStrategy::kLowestPpl;
  std::vector<std::vector<double>> score_table;
  corpus::RecordScorer scorer_fn;
  const corpus::RecordScorer* scorer = nullptr;
  if (needs_scorer) {
    score_table.resize(n_units);
    for (std::size_t u = 0; u < n_units; ++u) {
      const auto& records = train_corpus.unit(u).records;
      score_table[u].resize(records.size(), 0.0);
      for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].tokens.size() < model.min_record_tokens()) continue;
        score_table[u][r] = std::exp(model.Loss(records[r]));
      }
    }
    scorer_fn = [&score_table](std::size_t unit, const corpus::Record& rec) {
      return score_table.at(unit).at(rec.source_index);
    };
    scorer = &scorer_fn;
  }

  TrainResult result;

  // Group privacy trains on a fixed k-per-user subset selected up front.
  corpus::UserCorpus selected;
  std::vector<const corpus::Record*> flat_records;
  std::vector<std::size_t> flat_units;
  double q = 0.0;
  switch (cfg.mechanism) {
    case Mechanism::kGroupPrivacy: {
      if (!(cfg.record_batch >= 1)) {
        throw ConfigError("group privacy needs record_batch >= 1");
      }
      std::mt19937_64 select_rng = SubStream(seed, "select");
      selected = corpus::SelectRecords(train_corpus, cfg.strategy, cfg.k,
                                       cfg.max_seq_len, scorer, select_rng);
      for (std::size_t u = 0; u < selected.num_units(); ++u) {
        for (const corpus::Record& r : selected.unit(u).records) {
          flat_records.push_back(&r);
          flat_units.push_back(u);
        }
      }
      double m = static_cast<double>(flat_records.size());
      if (cfg.record_batch > m) {
        throw ConfigError("record_batch exceeds the selected corpus size");
      }
      q = cfg.record_batch / m;
      if (!non_private) {
        if (cfg.sigma_override) {
          result.sigma = *cfg.sigma_override;
        } else if (cfg.group_accounting == GroupAccounting::kMixture) {
          result.sigma = accounting::CalibrateNoiseGroup(
              cfg.k, cfg.epsilon, cfg.delta, m, cfg.record_batch, cfg.steps,
              cfg.accounting);
        } else {
          result.sigma = accounting::CalibrateNoiseGroupNaive(
              cfg.k, cfg.epsilon, cfg.delta, m, cfg.record_batch, cfg.steps,
              cfg.naive_form, cfg.accounting);
        }
      }
      break;
    }
    case Mechanism::kUserWise: {
      double n = static_cast<double>(n_units);
      if (!(cfg.user_batch >= 1) || cfg.user_batch > n) {
        throw ConfigError("userwise needs user_batch in [1, num_units]");
      }
      q = cfg.user_batch / n;
      if (!non_private) {
        result.sigma = cfg.sigma_override
                           ? *cfg.sigma_override
                           : accounting::CalibrateNoise(
                                 cfg.epsilon, cfg.delta, n, cfg.user_batch,
                                 cfg.steps, cfg.accounting);
      }
      break;
    }
    case Mechanism::kFiltered: {
      q = 1.0;
      if (!non_private) {
        double n = static_cast<double>(n_units);
        result.sigma = cfg.sigma_override
                           ? *cfg.sigma_override
                           : accounting::CalibrateNoise(
                                 cfg.epsilon / 2.0, cfg.delta / 2.0, n, n,
                                 cfg.steps, cfg.accounting);
      }
      break;
    }
  }
  result.sampling_q = q;

  std::optional<AboveThresholdRunner> svt;
  if (cfg.mechanism == Mechanism::kFiltered && !non_private) {
    std::mt19937_64 svt_init = SubStream(seed, "svt.threshold");
    svt.emplace(cfg.epsilon / 2.0,
                4.0 * static_cast<double>(n_units) / 5.0,
                cfg.svt_sensitivity, svt_init);
  }

  for (int t = 0; t < cfg.steps; ++t) {
    StepOutcome outcome;
    std::mt19937_64 noise_rng = SubStream(seed, "noise", static_cast<std::uint64_t>(t));
    switch (cfg.mechanism) {
      case Mechanism::kGroupPrivacy: {
        std::mt19937_64 batch_rng = SubStream(seed, "batch", static_cast<std::uint64_t>(t));
        std::bernoulli_distribution coin(q);
        std::vector<const corpus::Record*> batch;
        std::vector<std::size_t> batch_units;
        for (std::size_t i = 0; i < flat_records.size(); ++i) {
          if (coin(batch_rng)) {
            batch.push_back(flat_records[i]);
            batch_units.push_back(flat_units[i]);
          }
        }
        AggregateParams agg{cfg.clip_norm, result.sigma, cfg.record_batch,
                            non_private};
        outcome = GroupPrivacyStep(model, batch, batch_units, agg, noise_rng);
        break;
      }
      case Mechanism::kUserWise: {
        std::mt19937_64 batch_rng = SubStream(seed, "batch", static_cast<std::uint64_t>(t));
        std::vector<std::size_t> users =
            corpus::SampleUserBatch(train_corpus, q, batch_rng);
        std::mt19937_64 records_rng =
            SubStream(seed, "records", static_cast<std::uint64_t>(t));
        AggregateParams agg{cfg.clip_norm, result.sigma, cfg.user_batch,
                            non_private};
        outcome = UserWiseStep(model, train_corpus, users, cfg.k, cfg.strategy,
                               cfg.max_seq_len, scorer, agg, records_rng,
                               noise_rng);
        break;
      }
      case Mechanism::kFiltered: {
        std::mt19937_64 records_rng =
            SubStream(seed, "records", static_cast<std::uint64_t>(t));
        std::mt19937_64 svt_rng = SubStream(seed, "svt", static_cast<std::uint64_t>(t));
        std::mt19937_64 filter_rng =
            SubStream(seed, "filter", static_cast<std::uint64_t>(t));
        FilteredStepParams fp{cfg.clip_norm, cfg.tau,        cfg.epsilon,
                              cfg.delta,     cfg.steps,      result.sigma,
                              cfg.k,         cfg.strategy,   cfg.max_seq_len,
                              non_private};
        outcome = FilteredStep(model, train_corpus, fp, scorer,
                               svt ? &*svt : nullptr, records_rng, noise_rng,
                               svt_rng, filter_rng);
        break;
      }
    }

    HistoryRow row;
    row.step = t + 1;
    row.loss = outcome.mean_loss;
    row.clipped_fraction = outcome.clipped_fraction;
    row.realized_batch = outcome.realized_batch;
    row.halted = outcome.halted;
    row.included_users = outcome.included_users;
    row.sigma = result.sigma;

    if (outcome.halted) {
      result.history.push_back(row);
      result.halted = true;
      result.halted_step = row.step;
      break;
    }

    if (outcome.realized_batch > 0 && !std::isfinite(outcome.mean_loss)) {
      throw NumericError("non-finite loss at step " + std::to_string(row.step));
    }
    model.ApplyUpdate(outcome.update, cfg.eta);
    for (double p : model.parameters()) {
      if (!std::isfinite(p)) {
        throw NumericError("non-finite parameter after step " +
                           std::to_string(row.step));
      }
    }

    bool do_eval = eval_corpus != nullptr &&
                   ((cfg.eval_every > 0 && row.step % cfg.eval_every == 0) ||
                    row.step == cfg.steps);
    if (do_eval) {
      row.eval_ppl = models::Perplexity(model, *eval_corpus);
    }
    result.history.push_back(row);
  }

  if (eval_corpus != nullptr) {
    result.final_eval_ppl = models::Perplexity(model, *eval_corpus);
  }
  return result;
}

void WriteHistoryCsv(const std::vector<HistoryRow>& history,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "step,loss,eval_ppl,clipped_fraction,realized_batch,halted,"
         "included_users,sigma\n";
  for (const HistoryRow& r : history) {
    out << r.step << ',' << FormatDouble(r.loss) << ','
        << (std::isnan(r.eval_ppl) ? std::string() : FormatDouble(r.eval_ppl))
        << ',' << FormatDouble(r.clipped_fraction) << ',' << r.realized_batch
        << ',' << (r.halted ? 1 : 0) << ',' << r.included_users << ','
        << FormatDouble(r.sigma) << '\n';
  }
  if (!out) throw ParseError("failed writing '" + path + "'");
}

}  // namespace userdp::mechanisms
