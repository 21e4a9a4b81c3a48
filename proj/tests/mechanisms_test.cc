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

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include "test_util.h"
#include "userdp/errors.h"
#include "userdp/models.h"
#include "userdp/rng.h"

namespace userdp::mechanisms {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using corpus::Record;
using models::MeanEstimation;
using test::MakeCorpus;
using test::TempDir;

// Units 0..n-1 each hold the single record encoding point i.
corpus::UserCorpus PointCorpus(std::size_t n) {
  corpus::UserCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t u = c.AddUnit("u" + std::to_string(i));
    c.AddRecord(u, MeanEstimation::EncodePoint(i));
  }
  return c;
}

TEST(ClipTest, ScalesOntoTheBallBoundary) {
  std::vector<double> v{3.0, 4.0};
  EXPECT_FALSE(ClipInPlace(v, 10.0));
  EXPECT_DOUBLE_EQ(v[0], 3.0);
  EXPECT_DOUBLE_EQ(v[1], 4.0);
  EXPECT_TRUE(ClipInPlace(v, 2.5));
  EXPECT_DOUBLE_EQ(v[0], 1.5);
  EXPECT_DOUBLE_EQ(v[1], 2.0);
  EXPECT_NEAR(L2Norm(v), 2.5, 1e-15);
  EXPECT_THROW(ClipInPlace(v, 0.0), ConfigError);
  EXPECT_THROW(ClipInPlace(v, -1.0), ConfigError);
}

TEST(GroupPrivacyStepTest, NoiselessArithmeticIsExact) {
  MeanEstimation model({{10.0, 0.0}, {0.0, 10.0}});
  model.set_parameters(std::vector<double>{0.0, 0.0});
  Record r0 = MeanEstimation::EncodePoint(0);
  Record r1 = MeanEstimation::EncodePoint(1);
  std::vector<const Record*> batch{&r0, &r1};
  AggregateParams params;
  params.clip_norm = 1.0;
  params.sigma = 0.0;
  params.expected_batch = 4.0;
  std::mt19937_64 rng(1);
  StepOutcome out = GroupPrivacyStep(model, batch, {0, 1}, params, rng);
  // Raw gradients (-20, 0) and (0, -20) clip to unit vectors; their sum is
  // divided by the expected batch, not the realized one.
  EXPECT_DOUBLE_EQ(out.update[0], -0.25);
  EXPECT_DOUBLE_EQ(out.update[1], -0.25);
  EXPECT_DOUBLE_EQ(out.mean_loss, 100.0);
  EXPECT_DOUBLE_EQ(out.clipped_fraction, 1.0);
  EXPECT_EQ(out.realized_batch, 2u);
  EXPECT_EQ(out.included_users, 2u);
  EXPECT_FALSE(out.halted);
}

TEST(GroupPrivacyStepTest, CountsDistinctUnits) {
  MeanEstimation model({{10.0, 0.0}});
  model.set_parameters(std::vector<double>{0.0, 0.0});
  Record r = MeanEstimation::EncodePoint(0);
  std::vector<const Record*> batch{&r, &r, &r};
  AggregateParams params;
  params.expected_batch = 3.0;
  std::mt19937_64 rng(1);
  StepOutcome out = GroupPrivacyStep(model, batch, {7, 7, 9}, params, rng);
  EXPECT_EQ(out.realized_batch, 3u);
  EXPECT_EQ(out.included_users, 2u);
}

TEST(GroupPrivacyStepTest, SkipsRecordsTooShortToScore) {
  models::CharLmConfig cfg;
  cfg.d_emb = 2;
  cfg.context = 2;
  cfg.d_h = 4;
  models::CharLm model(cfg, 1);
  Record ok, tiny;
  ok.tokens = {'a', 'b', 'c'};
  tiny.tokens = {'a'};
  std::vector<const Record*> batch{&tiny, &ok};
  AggregateParams params;
  params.non_private = true;
  std::mt19937_64 rng(1);
  StepOutcome out = GroupPrivacyStep(model, batch, {0, 1}, params, rng);
  EXPECT_EQ(out.realized_batch, 1u);
  EXPECT_EQ(out.included_users, 1u);
}

TEST(GroupPrivacyStepTest, EmptyBatchIsPureNoise) {
  MeanEstimation model({{10.0, 0.0}});
  model.set_parameters(std::vector<double>{0.0, 0.0});
  AggregateParams params;
  params.clip_norm = 2.0;
  params.sigma = 1.0;
  params.expected_batch = 5.0;
  std::mt19937_64 rng(3), rng2(3);
  StepOutcome out = GroupPrivacyStep(model, {}, {}, params, rng);
  EXPECT_EQ(out.realized_batch, 0u);
  EXPECT_TRUE(std::isnan(out.mean_loss));
  EXPECT_TRUE(out.update[0] != 0.0 || out.update[1] != 0.0);
  StepOutcome again = GroupPrivacyStep(model, {}, {}, params, rng2);
  EXPECT_EQ(out.update, again.update);
}

TEST(GroupPrivacyStepTest, NonPrivateAveragesRawOverRealized) {
  MeanEstimation model({{10.0, 0.0}, {0.0, 10.0}});
  model.set_parameters(std::vector<double>{0.0, 0.0});
  Record r0 = MeanEstimation::EncodePoint(0);
  Record r1 = MeanEstimation::EncodePoint(1);
  std::vector<const Record*> batch{&r0, &r1};
  AggregateParams params;
  params.non_private = true;
  params.expected_batch = 99.0;  // ignored when non-private
  std::mt19937_64 rng(1);
  StepOutcome out = GroupPrivacyStep(model, batch, {0, 1}, params, rng);
  EXPECT_DOUBLE_EQ(out.update[0], -10.0);
  EXPECT_DOUBLE_EQ(out.update[1], -10.0);
  EXPECT_DOUBLE_EQ(out.clipped_fraction, 0.0);
}

TEST(UserWiseStepTest, ClipsThePerUserAverage) {
  MeanEstimation model({{10.0, 0.0}, {0.0, 10.0}});
  model.set_parameters(std::vector<double>{0.0, 0.0});
  corpus::UserCorpus c = PointCorpus(2);
  AggregateParams params;
  params.clip_norm = 100.0;  // roomy: nothing clips
  params.sigma = 0.0;
  params.expected_batch = 2.0;
  std::mt19937_64 records(1), noise(2);
  StepOutcome out =
      UserWiseStep(model, c, {0, 1}, 1, corpus::SelectionStrategy::kRandom, 0,
                   nullptr, params, records, noise);
  EXPECT_DOUBLE_EQ(out.update[0], -10.0);
  EXPECT_DOUBLE_EQ(out.update[1], -10.0);
  EXPECT_DOUBLE_EQ(out.clipped_fraction, 0.0);
  EXPECT_EQ(out.included_users, 2u);

  params.clip_norm = 1.0;
  std::mt19937_64 records2(1), noise2(2);
  StepOutcome clipped =
      UserWiseStep(model, c, {0, 1}, 1, corpus::SelectionStrategy::kRandom, 0,
                   nullptr, params, records2, noise2);
  EXPECT_DOUBLE_EQ(clipped.update[0], -0.5);
  EXPECT_DOUBLE_EQ(clipped.update[1], -0.5);
  EXPECT_DOUBLE_EQ(clipped.clipped_fraction, 1.0);
}

TEST(UserWiseStepTest, ResamplingShortUnitsLeavesTheAverageAlone) {
  MeanEstimation model({{10.0, 0.0}});
  model.set_parameters(std::vector<double>{0.0, 0.0});
  corpus::UserCorpus c = PointCorpus(1);
  AggregateParams params;
  params.non_private = true;
  for (int k : {1, 3, 7}) {
    std::mt19937_64 records(1), noise(2);
    StepOutcome out =
        UserWiseStep(model, c, {0}, k, corpus::SelectionStrategy::kRandom, 0,
                     nullptr, params, records, noise);
    // The unit has one record, so k resamples of it average to itself.
    EXPECT_DOUBLE_EQ(out.update[0], -20.0) << "k=" << k;
    EXPECT_DOUBLE_EQ(out.update[1], 0.0) << "k=" << k;
  }
}

TEST(ConcentrationScoreTest, CountsPairsWithinTau) {
  std::vector<std::vector<double>> tight{{0.0}, {0.0}, {0.0}};
  EXPECT_DOUBLE_EQ(ConcentrationScore(tight, 0.1), 3.0);
  std::vector<std::vector<double>> spread{{0.0}, {100.0}, {200.0}};
  EXPECT_DOUBLE_EQ(ConcentrationScore(spread, 0.1), 1.0);
  std::vector<std::vector<double>> mixed{{0.0}, {0.5}, {100.0}};
  EXPECT_DOUBLE_EQ(ConcentrationScore(mixed, 1.0), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(ConcentrationScore(spread, 1000.0), 3.0);
  EXPECT_THROW(ConcentrationScore(tight, -1.0), ConfigError);
}

TEST(ConcentrationScoreTest, StaysBetweenOneAndN) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> grads(10, std::vector<double>(3));
  for (auto& v : grads)
    for (double& x : v) x = g(rng);
  for (double tau : {0.0, 0.5, 1.0, 5.0}) {
    double s = ConcentrationScore(grads, tau);
    EXPECT_GE(s, 1.0);
    EXPECT_LE(s, 10.0);
  }
  EXPECT_LE(ConcentrationScore(grads, 0.5), ConcentrationScore(grads, 1.0));
}

TEST(AboveThresholdTest, HighBudgetIsEffectivelyExact) {
  std::mt19937_64 rng(4);
  EXPECT_TRUE(AboveThresholdOnce(5.0, 1e12, 3.0, 2.0, rng));
  EXPECT_FALSE(AboveThresholdOnce(2.0, 1e12, 3.0, 2.0, rng));
  AboveThresholdRunner runner(1e12, 3.0, 2.0, rng);
  EXPECT_NEAR(runner.noisy_threshold(), 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(runner.threshold(), 3.0);
  EXPECT_TRUE(runner.Query(3.5, rng));
  EXPECT_FALSE(runner.Query(2.5, rng));
}

TEST(AboveThresholdTest, RejectsBadBudgets) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(AboveThresholdRunner(0.0, 1.0, 1.0, rng), ConfigError);
  EXPECT_THROW(AboveThresholdRunner(kInf, 1.0, 1.0, rng), ConfigError);
  EXPECT_THROW(AboveThresholdRunner(1.0, 1.0, 0.0, rng), ConfigError);
}

TEST(AboveThresholdTest, ThresholdNoiseIsSharedQueryNoiseIsFresh) {
  // At epsilon 1 the threshold perturbation is material; the runner must
  // freeze it while queries still vary.
  std::mt19937_64 rng(11);
  AboveThresholdRunner runner(1.0, 10.0, 2.0, rng);
  double frozen = runner.noisy_threshold();
  int flips = 0;
  for (int i = 0; i < 200; ++i) {
    EXPECT_DOUBLE_EQ(runner.noisy_threshold(), frozen);
    if (runner.Query(10.0, rng)) ++flips;
  }
  EXPECT_GT(flips, 0);
  EXPECT_LT(flips, 200);
}

TEST(FilterOutliersTest, ProbabilitiesFollowTheNeighborCount) {
  // 36 coincident gradients and 24 isolated ones, 60 total: cluster members
  // have 36 neighbors, between N/2 = 30 and 2N/3 = 40, so they survive with
  // probability (36 - 30) / 10 = 0.6; the isolated ones always drop.
  std::vector<std::vector<double>> grads;
  for (int i = 0; i < 36; ++i) grads.push_back({0.0});
  for (int i = 0; i < 24; ++i) grads.push_back({1000.0 + 10.0 * i});
  std::mt19937_64 rng(5);
  FilterResult res = FilterOutliers(grads, 1.0, rng);
  ASSERT_EQ(res.keep_probability.size(), 60u);
  for (int i = 0; i < 36; ++i) EXPECT_DOUBLE_EQ(res.keep_probability[i], 0.6);
  for (int i = 36; i < 60; ++i) EXPECT_DOUBLE_EQ(res.keep_probability[i], 0.0);
  for (std::size_t kept : res.kept) EXPECT_LT(kept, 36u);
  EXPECT_GT(res.kept.size(), 0u);
  EXPECT_LT(res.kept.size(), 36u);
}

TEST(FilterOutliersTest, FullAgreementKeepsEveryone) {
  std::vector<std::vector<double>> grads(6, std::vector<double>{1.0, 2.0});
  std::mt19937_64 rng(5);
  FilterResult res = FilterOutliers(grads, 0.01, rng);
  EXPECT_EQ(res.kept.size(), 6u);
  for (double p : res.keep_probability) EXPECT_DOUBLE_EQ(p, 1.0);
}

TEST(FilterOutliersTest, NeighborhoodUsesTwiceTau) {
  // Distance 1.5 with tau = 1: within 2 tau, so the pair count each other.
  std::vector<std::vector<double>> grads{{0.0}, {1.5}, {100.0}, {200.0},
                                         {300.0}, {400.0}};
  std::mt19937_64 rng(5);
  FilterResult res = FilterOutliers(grads, 1.0, rng);
  // f = 2 of 6 is below N/2 = 3, so even the pair drops.
  EXPECT_DOUBLE_EQ(res.keep_probability[0], 0.0);
  EXPECT_DOUBLE_EQ(res.keep_probability[1], 0.0);
  EXPECT_TRUE(res.kept.empty());
}

TEST(FilteredNoiseStddevTest, MatchesItsClosedForm) {
  double tau = 0.5, eps = 3.0, delta = 1e-5, sigma = 2.0;
  int steps = 100;
  std::size_t users = 1000;
  double want = std::sqrt(8.0 * (eps + std::log(100.0) - std::log(delta))) *
                tau * sigma / 1000.0;
  EXPECT_NEAR(FilteredNoiseStddev(tau, eps, delta, steps, users, sigma), want,
              1e-15);
  EXPECT_THROW(FilteredNoiseStddev(-1, eps, delta, steps, users, sigma),
               ConfigError);
  EXPECT_THROW(FilteredNoiseStddev(tau, kInf, delta, steps, users, sigma),
               ConfigError);
  EXPECT_THROW(FilteredNoiseStddev(tau, eps, 0.0, steps, users, sigma),
               ConfigError);
  EXPECT_THROW(FilteredNoiseStddev(tau, eps, delta, 0, users, sigma),
               ConfigError);
}

// Five points on a wide circle give clipped gradients in five directions, so
// no pair lands within a small tau and the score bottoms out at 1.
std::vector<std::vector<double>> CirclePoints(int n, double radius) {
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < n; ++i) {
    double a = 2.0 * M_PI * i / n;
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return pts;
}

TEST(FilteredStepTest, HaltsWhenGradientsDisagree) {
  MeanEstimation model(CirclePoints(5, 1000.0));
  model.set_parameters(std::vector<double>{0.0, 0.0});
  corpus::UserCorpus c = PointCorpus(5);
  FilteredStepParams params;
  params.clip_norm = 1.0;
  params.tau = 0.1;
  params.epsilon = 1e9;  // the threshold check is effectively noiseless
  params.delta = 1e-5;
  params.num_steps = 1;
  params.sigma = 0.0;
  std::mt19937_64 svt_init(7);
  AboveThresholdRunner svt(params.epsilon / 2, 4.0, 2.0, svt_init);
  std::mt19937_64 records(1), noise(2), svt_rng(3), filter(4);
  StepOutcome out = FilteredStep(model, c, params, nullptr, &svt, records,
                                 noise, svt_rng, filter);
  EXPECT_TRUE(out.halted);
  for (double x : out.update) EXPECT_DOUBLE_EQ(x, 0.0);
}

TEST(FilteredStepTest, AgreementPassesAndAveragesSurvivors) {
  // Every unit encodes the same point, so all gradients coincide.
  std::vector<std::vector<double>> pts(5, std::vector<double>{10.0, 0.0});
  MeanEstimation model(pts);
  model.set_parameters(std::vector<double>{0.0, 0.0});
  corpus::UserCorpus c = PointCorpus(5);
  FilteredStepParams params;
  params.clip_norm = 1.0;
  params.tau = 0.1;
  params.epsilon = 1e9;
  params.delta = 1e-5;
  params.num_steps = 1;
  params.sigma = 0.0;  // no noise: the survivor average comes out exactly
  std::mt19937_64 svt_init(7);
  AboveThresholdRunner svt(params.epsilon / 2, 4.0, 2.0, svt_init);
  std::mt19937_64 records(1), noise(2), svt_rng(3), filter(4);
  StepOutcome out = FilteredStep(model, c, params, nullptr, &svt, records,
                                 noise, svt_rng, filter);
  EXPECT_FALSE(out.halted);
  EXPECT_EQ(out.included_users, 5u);
  EXPECT_EQ(out.realized_batch, 5u);
  EXPECT_DOUBLE_EQ(out.update[0], -1.0);  // clipped (-20, 0)
  EXPECT_DOUBLE_EQ(out.update[1], 0.0);
  EXPECT_DOUBLE_EQ(out.mean_loss, 100.0);
}

TEST(FilteredStepTest, PrivateModeNeedsARunner) {
  MeanEstimation model({{1.0, 0.0}});
  corpus::UserCorpus c = PointCorpus(1);
  FilteredStepParams params;
  std::mt19937_64 records(1), noise(2), svt_rng(3), filter(4);
  EXPECT_THROW(FilteredStep(model, c, params, nullptr, nullptr, records, noise,
                            svt_rng, filter),
               ConfigError);
  params.non_private = true;
  StepOutcome out = FilteredStep(model, c, params, nullptr, nullptr, records,
                                 noise, svt_rng, filter);
  EXPECT_FALSE(out.halted);
}

corpus::UserCorpus TinySynth(int units, std::uint64_t seed) {
  corpus::SynthSpec spec;
  spec.num_units = units;
  spec.records_constant = 2;
  spec.len_constant = 12;
  return corpus::SynthCorpus(spec, seed);
}

TEST(TrainTest, RerunsAreBitIdentical) {
  corpus::UserCorpus c = TinySynth(8, 21);
  models::CharLmConfig mcfg;
  mcfg.d_emb = 2;
  mcfg.context = 2;
  mcfg.d_h = 4;
  TrainConfig cfg;
  cfg.mechanism = Mechanism::kUserWise;
  cfg.epsilon = 2.0;
  cfg.sigma_override = 0.7;
  cfg.user_batch = 4;
  cfg.k = 2;
  cfg.steps = 3;
  cfg.max_seq_len = 12;

  models::CharLm m1(mcfg, 5), m2(mcfg, 5), m3(mcfg, 5);
  TrainResult r1 = Train(m1, c, nullptr, cfg, 33);
  TrainResult r2 = Train(m2, c, nullptr, cfg, 33);
  TrainResult r3 = Train(m3, c, nullptr, cfg, 34);
  ASSERT_EQ(r1.history.size(), 3u);
  for (std::size_t i = 0; i < m1.dim(); ++i) {
    EXPECT_EQ(m1.parameters()[i], m2.parameters()[i]);
  }
  for (std::size_t t = 0; t < r1.history.size(); ++t) {
    EXPECT_EQ(r1.history[t].loss, r2.history[t].loss);
    EXPECT_EQ(r1.history[t].realized_batch, r2.history[t].realized_batch);
  }
  bool differs = false;
  for (std::size_t i = 0; i < m1.dim(); ++i) {
    if (m1.parameters()[i] != m3.parameters()[i]) differs = true;
  }
  EXPECT_TRUE(differs);
  EXPECT_DOUBLE_EQ(r1.sigma, 0.7);
  EXPECT_DOUBLE_EQ(r1.sampling_q, 0.5);
}

TEST(TrainTest, InfiniteBudgetTrainsWithoutNoise) {
  corpus::UserCorpus c = TinySynth(6, 22);
  models::CharLmConfig mcfg;
  mcfg.d_emb = 2;
  mcfg.context = 2;
  mcfg.d_h = 4;
  TrainConfig cfg;
  cfg.mechanism = Mechanism::kUserWise;
  cfg.epsilon = kInf;
  cfg.user_batch = 6;
  cfg.steps = 2;
  cfg.max_seq_len = 12;
  models::CharLm m(mcfg, 5);
  TrainResult r = Train(m, c, &c, cfg, 1);
  EXPECT_DOUBLE_EQ(r.sigma, 0.0);
  for (const HistoryRow& row : r.history) {
    EXPECT_DOUBLE_EQ(row.sigma, 0.0);
    EXPECT_DOUBLE_EQ(row.clipped_fraction, 0.0);
  }
  EXPECT_TRUE(std::isfinite(r.final_eval_ppl));
  EXPECT_FALSE(std::isnan(r.history.back().eval_ppl));
  EXPECT_TRUE(std::isnan(r.history.front().eval_ppl));
}

TEST(TrainTest, ZeroStepsLeaveTheModelUntouched) {
  corpus::UserCorpus c = TinySynth(4, 23);
  models::CharLmConfig mcfg;
  mcfg.d_emb = 2;
  mcfg.context = 2;
  mcfg.d_h = 4;
  models::CharLm m(mcfg, 5);
  std::vector<double> before(m.parameters().begin(), m.parameters().end());
  TrainConfig cfg;
  cfg.mechanism = Mechanism::kUserWise;
  cfg.epsilon = 1.0;
  cfg.user_batch = 2;
  cfg.steps = 0;
  TrainResult r = Train(m, c, nullptr, cfg, 1);
  EXPECT_TRUE(r.history.empty());
  EXPECT_DOUBLE_EQ(r.sigma, 0.0);
  for (std::size_t i = 0; i < m.dim(); ++i) {
    EXPECT_EQ(m.parameters()[i], before[i]);
  }
}

TEST(TrainTest, FilteredHaltStopsTheRunEarly) {
  MeanEstimation model(CirclePoints(5, 1000.0));
  model.set_parameters(std::vector<double>{0.0, 0.0});
  corpus::UserCorpus c = PointCorpus(5);
  TrainConfig cfg;
  cfg.mechanism = Mechanism::kFiltered;
  cfg.epsilon = 1000.0;
  cfg.sigma_override = 0.0;
  cfg.tau = 0.05;
  cfg.steps = 3;
  cfg.max_seq_len = 0;
  TrainResult r = Train(model, c, nullptr, cfg, 77);
  EXPECT_TRUE(r.halted);
  EXPECT_EQ(r.halted_step, 1);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(r.history[0].halted);
  EXPECT_DOUBLE_EQ(model.parameters()[0], 0.0);
  EXPECT_DOUBLE_EQ(model.parameters()[1], 0.0);
}

TEST(TrainTest, FilteredAgreementMovesTowardTheMean) {
  std::vector<std::vector<double>> pts(5, std::vector<double>{10.0, 0.0});
  MeanEstimation model(pts);
  model.set_parameters(std::vector<double>{0.0, 0.0});
  corpus::UserCorpus c = PointCorpus(5);
  TrainConfig cfg;
  cfg.mechanism = Mechanism::kFiltered;
  cfg.epsilon = 1000.0;
  cfg.sigma_override = 0.0;
  cfg.tau = 0.1;
  cfg.eta = 0.5;
  cfg.steps = 2;
  cfg.max_seq_len = 0;
  TrainResult r = Train(model, c, nullptr, cfg, 77);
  EXPECT_FALSE(r.halted);
  ASSERT_EQ(r.history.size(), 2u);
  // Each step applies eta times the clipped direction (-1, 0).
  EXPECT_DOUBLE_EQ(model.parameters()[0], 1.0);
  EXPECT_DOUBLE_EQ(model.parameters()[1], 0.0);
}

TEST(TrainTest, ValidatesBatchSettings) {
  corpus::UserCorpus c = TinySynth(4, 24);
  models::CharLmConfig mcfg;
  mcfg.d_emb = 2;
  mcfg.context = 2;
  mcfg.d_h = 4;
  models::CharLm m(mcfg, 5);
  TrainConfig cfg;
  cfg.mechanism = Mechanism::kUserWise;
  cfg.epsilon = 1.0;
  cfg.user_batch = 0;
  EXPECT_THROW(Train(m, c, nullptr, cfg, 1), ConfigError);
  cfg.user_batch = 5;  // above the unit count
  EXPECT_THROW(Train(m, c, nullptr, cfg, 1), ConfigError);
  cfg.mechanism = Mechanism::kGroupPrivacy;
  cfg.record_batch = 0;
  EXPECT_THROW(Train(m, c, nullptr, cfg, 1), ConfigError);
  cfg.record_batch = 1e9;  // above the selected corpus size
  EXPECT_THROW(Train(m, c, nullptr, cfg, 1), ConfigError);
  cfg.mechanism = Mechanism::kUserWise;
  cfg.user_batch = 2;
  cfg.epsilon = -1.0;
  EXPECT_THROW(Train(m, c, nullptr, cfg, 1), ConfigError);
  cfg.epsilon = 1.0;
  cfg.delta = 1.0;
  EXPECT_THROW(Train(m, c, nullptr, cfg, 1), ConfigError);
}

TEST(MechanismNameTest, RoundTrips) {
  for (auto m : {Mechanism::kGroupPrivacy, Mechanism::kUserWise,
                 Mechanism::kFiltered}) {
    EXPECT_EQ(ParseMechanism(MechanismName(m)), m);
  }
  EXPECT_THROW(ParseMechanism("sgd"), ConfigError);
}

TEST(HistoryCsvTest, WritesTheExactColumnSet) {
  std::vector<HistoryRow> rows(2);
  rows[0].step = 1;
  rows[0].loss = 1.5;
  rows[0].clipped_fraction = 0.25;
  rows[0].realized_batch = 7;
  rows[0].included_users = 3;
  rows[0].sigma = 0.5;
  rows[1].step = 2;
  rows[1].loss = 1.25;
  rows[1].eval_ppl = 4.0;
  rows[1].halted = true;
  rows[1].sigma = 0.5;
  TempDir dir;
  WriteHistoryCsv(rows, dir.Path("h.csv"));
  std::string got = test::ReadFile(dir.Path("h.csv"));
  EXPECT_EQ(got,
            "step,loss,eval_ppl,clipped_fraction,realized_batch,halted,"
            "included_users,sigma\n"
            "1,1.5,,0.25,7,0,3,0.5\n"
            "2,1.25,4,0,0,1,0,0.5\n");
}

TEST(RngTest, PurposeStreamsAreIndependentAndStable) {
  std::mt19937_64 a = SubStream(1, "batch");
  std::mt19937_64 b = SubStream(1, "batch");
  std::mt19937_64 c = SubStream(1, "noise");
  std::mt19937_64 d = SubStream(2, "batch");
  EXPECT_EQ(a(), b());
  std::mt19937_64 a2 = SubStream(1, "batch");
  EXPECT_NE(a2(), c());
  EXPECT_NE(a2(), d());
  std::mt19937_64 s0 = SubStream(1, "noise", 0);
  std::mt19937_64 s1 = SubStream(1, "noise", 1);
  EXPECT_NE(s0(), s1());
}

TEST(RngTest, LaplaceScaleZeroIsExactlyZero) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(SampleLaplace(0.0, rng), 0.0);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += SampleLaplace(2.0, rng);
  mean /= n;
  // Laplace(2) has sd sqrt(8); the mean of 20000 draws sits within ~0.06
  // at three sigmas.
  EXPECT_NEAR(mean, 0.0, 0.07);
}

}  // namespace
}  // namespace userdp::mechanisms
