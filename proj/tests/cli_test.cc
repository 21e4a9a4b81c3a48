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

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>
#include "test_util.h"
#include "userdp/corpus.h"
#include "userdp/errors.h"
#include "userdp/run_config.h"

namespace userdp::cli {
namespace {

using nlohmann::json;
using test::TempDir;

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult RunCli(const std::string& args) {
  std::string cmd = std::string(USERDP_CLI_BINARY) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return {};
  CliResult res;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
  int rc = pclose(pipe);
  res.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return res;
}

// The summary starts at the first brace; trailing non-JSON lines (like the
// halt notice) are left unread by stream extraction.
json LastJson(const std::string& output) {
  std::size_t pos = output.find('{');
  if (pos == std::string::npos) return json();
  std::istringstream in(output.substr(pos));
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return json();
  }
  return j;
}

TEST(RunConfigTest, SerializeParseRoundTripIsStable) {
  RunConfig cfg;
  std::string once = Serialize(cfg);
  RunConfig back = ParseRunConfig(once);
  EXPECT_EQ(Serialize(back), once);

  std::string text =
      "[run]\n"
      "mechanism = group\n"
      "epsilon = inf\n"
      "clip_norm = 2.5\n"
      "steps = 7\n"
      "record_batch = 32\n"
      "k = 4\n"
      "strategy = longest\n"
      "sigma = 0.25\n"
      "group_accounting = naive\n"
      "naive_form = literal\n"
      "rounding = optimistic\n"
      "seed = 99\n"
      "out_dir = results\n"
      "[corpus]\n"
      "synth_units = 44\n"
      "synth_count_law = powerlaw\n"
      "synth_len_law = uniform\n"
      "[analyze]\n"
      "mode = sweep\n"
      "axis = epsilon\n"
      "values = 1, 2, inf\n"
      "seeds = 5,6\n";
  RunConfig parsed = ParseRunConfig(text);
  EXPECT_TRUE(std::isinf(parsed.train.epsilon));
  EXPECT_EQ(parsed.train.k, 4);
  EXPECT_EQ(parsed.train.steps, 7);
  ASSERT_TRUE(parsed.sigma_override.has_value());
  EXPECT_DOUBLE_EQ(*parsed.sigma_override, 0.25);
  EXPECT_EQ(parsed.seed, 99u);
  EXPECT_EQ(parsed.out_dir, "results");
  EXPECT_EQ(parsed.corpus.synth_units, 44);
  EXPECT_EQ(parsed.corpus.synth.num_units, 44);
  EXPECT_EQ(parsed.analyze.values,
            (std::vector<std::string>{"1", "2", "inf"}));
  EXPECT_EQ(parsed.analyze.seeds, (std::vector<std::uint64_t>{5, 6}));
  std::string ser = Serialize(parsed);
  EXPECT_EQ(Serialize(ParseRunConfig(ser)), ser);
}

TEST(RunConfigTest, RejectsUnknownAndDuplicateKeys) {
  EXPECT_THROW(ParseRunConfig("[run]\nmomentum = 0.9\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("[run]\nk = 1\nk = 2\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("[training]\nk = 1\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("k = 1\n"), ParseError);
  EXPECT_THROW(ParseRunConfig("[run]\nk\n"), ParseError);
  EXPECT_THROW(ParseRunConfig("[run\nk = 1\n"), ParseError);
  EXPECT_THROW(ParseRunConfig("[run]\nepsilon = soon\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("[run]\ndelta = inf\n"), ConfigError);
  EXPECT_THROW(ParseRunConfig("[run]\n= 3\n"), ParseError);
  EXPECT_THROW(ParseRunConfigFile("/nonexistent/config.ini"), ConfigError);
}

TEST(RunConfigTest, CommentsAndBlankLinesAreIgnored) {
  RunConfig cfg = ParseRunConfig(
      "# a comment\n"
      "\n"
      "[run]\n"
      "; another comment\n"
      "eta = 0.5\n");
  EXPECT_DOUBLE_EQ(cfg.train.eta, 0.5);
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_EQ(cfg.out_dir, "out");
}

std::string SynthTrainConfig(const TempDir& dir, const std::string& run_extra,
                             int units = 8) {
  std::string text =
      "[run]\n"
      "mechanism = userwise\n"
      "user_batch = 4\n"
      "k = 2\n"
      "steps = 2\n"
      "max_seq_len = 16\n" +
      run_extra +
      "[corpus]\n"
      "synth_units = " + std::to_string(units) + "\n"
      "synth_records_constant = 2\n"
      "synth_len_constant = 12\n"
      "[model]\n"
      "d_emb = 2\n"
      "context = 2\n"
      "d_h = 4\n";
  std::string path = dir.Path("config.ini");
  test::WriteFile(path, text);
  return path;
}

TEST(CliTest, TrainWritesArtifactsAndRerunsAreByteIdentical) {
  TempDir dir;
  std::string config = SynthTrainConfig(dir, "epsilon = inf\n");
  CliResult r1 = RunCli("train --config " + config + " --out " + dir.Path("o1"));
  ASSERT_EQ(r1.code, 0) << r1.output;
  CliResult r2 = RunCli("train --config " + config + " --out " + dir.Path("o2"));
  ASSERT_EQ(r2.code, 0) << r2.output;
  std::string h1 = test::ReadFile(dir.Path("o1") + "/history.csv");
  std::string h2 = test::ReadFile(dir.Path("o2") + "/history.csv");
  EXPECT_EQ(h1, h2);
  EXPECT_EQ(test::ReadFile(dir.Path("o1") + "/model.ckpt"),
            test::ReadFile(dir.Path("o2") + "/model.ckpt"));

  // Another seed must change the run.
  CliResult r3 = RunCli("train --config " + config + " --seed 7 --out " +
                        dir.Path("o3"));
  ASSERT_EQ(r3.code, 0) << r3.output;
  EXPECT_NE(test::ReadFile(dir.Path("o3") + "/history.csv"), h1);

  json summary = LastJson(r1.output);
  ASSERT_TRUE(summary.is_object()) << r1.output;
  EXPECT_EQ(summary["mechanism"], "userwise");
  EXPECT_EQ(summary["halted"], false);
  EXPECT_DOUBLE_EQ(summary["sigma"].get<double>(), 0.0);

  // The non-private run records sigma 0 on every history row.
  std::istringstream hist(h1);
  std::string line;
  std::getline(hist, line);
  EXPECT_EQ(line,
            "step,loss,eval_ppl,clipped_fraction,realized_batch,halted,"
            "included_users,sigma");
  int rows = 0;
  while (std::getline(hist, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0");
  }
  EXPECT_EQ(rows, 2);

  // The archived config reproduces the effective run settings.
  RunConfig archived =
      ParseRunConfigFile(dir.Path("o1") + "/config.ini");
  EXPECT_EQ(archived.train.steps, 2);
  EXPECT_EQ(Serialize(archived),
            test::ReadFile(dir.Path("o1") + "/config.ini"));
}

TEST(CliTest, FiniteEpsilonWithoutDeltaFailsWithConfigExit) {
  TempDir dir;
  std::string config = SynthTrainConfig(dir, "epsilon = 2\nsigma = 0.5\n");
  // sigma is only a noise override; accounting still needs delta.
  std::string no_sigma = SynthTrainConfig(dir, "epsilon = 2\n");
  CliResult r = RunCli("train --config " + no_sigma + " --out " + dir.Path("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("delta"), std::string::npos) << r.output;
}

TEST(CliTest, TrainWithEvalReportsFinalPerplexity) {
  TempDir dir;
  std::string text =
      "[run]\n"
      "mechanism = userwise\n"
      "epsilon = inf\n"
      "user_batch = 4\n"
      "steps = 2\n"
      "max_seq_len = 16\n"
      "[corpus]\n"
      "synth_units = 8\n"
      "synth_len_constant = 12\n"
      "[eval]\n"
      "synth_units = 4\n"
      "synth_len_constant = 12\n"
      "[model]\n"
      "d_emb = 2\n"
      "context = 2\n"
      "d_h = 4\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("train --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  json summary = LastJson(r.output);
  ASSERT_TRUE(summary.contains("final_eval_ppl")) << r.output;
  EXPECT_GT(summary["final_eval_ppl"].get<double>(), 1.0);
}

TEST(CliTest, DivergenceExitsWithNumericCode) {
  TempDir dir;
  std::string config = SynthTrainConfig(dir, "epsilon = inf\neta = 1e300\n");
  CliResult r = RunCli("train --config " + config + " --out " + dir.Path("o"));
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.output.find("numeric error"), std::string::npos) << r.output;
}

TEST(CliTest, FilteredHaltExitsWithHaltCode) {
  TempDir dir;
  std::string text =
      "[run]\n"
      "mechanism = filtered\n"
      "epsilon = 1000\n"
      "delta = 1e-5\n"
      "sigma = 0\n"
      "tau = 1e-9\n"
      "steps = 3\n"
      "max_seq_len = 16\n"
      "[corpus]\n"
      "synth_units = 10\n"
      "synth_len_constant = 12\n"
      "[model]\n"
      "d_emb = 2\n"
      "context = 2\n"
      "d_h = 4\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("train --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  EXPECT_EQ(r.code, 4) << r.output;
  EXPECT_NE(r.output.find("halted at step 1"), std::string::npos) << r.output;
  json summary = LastJson(r.output);
  EXPECT_EQ(summary["halted"], true);
  EXPECT_EQ(summary["halted_step"], 1);
}

TEST(CliTest, CalibrateWritesAccountingJson) {
  TempDir dir;
  std::string text =
      "[run]\n"
      "mechanism = userwise\n"
      "epsilon = 2\n"
      "delta = 1e-5\n"
      "user_batch = 10\n"
      "steps = 2\n"
      "grid_spacing = 0.002\n"
      "[corpus]\n"
      "synth_units = 100\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("calibrate --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  json j = json::parse(test::ReadFile(dir.Path("o") + "/accounting.json"));
  EXPECT_EQ(j["mechanism"], "userwise");
  EXPECT_GT(j["sigma"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["q"].get<double>(), 0.1);
  EXPECT_EQ(j["T"], 2);
  json printed = LastJson(r.output);
  EXPECT_DOUBLE_EQ(printed["sigma"].get<double>(), j["sigma"].get<double>());
}

TEST(CliTest, UnreachableTargetExitsWithCalibrationCode) {
  TempDir dir;
  // A near-vacuous target is met by arbitrarily small noise; calibration
  // refuses to pick one.
  std::string text =
      "[run]\n"
      "mechanism = userwise\n"
      "epsilon = 5\n"
      "delta = 0.9\n"
      "user_batch = 1\n"
      "steps = 1\n"
      "grid_spacing = 0.002\n"
      "[corpus]\n"
      "synth_units = 100\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("calibrate --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("calibration error"), std::string::npos) << r.output;
}

TEST(CliTest, SynthAndStatsAgree) {
  TempDir dir;
  std::string text =
      "[corpus]\n"
      "synth_units = 5\n"
      "synth_records_constant = 3\n"
      "synth_len_constant = 10\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("synth --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  json j = LastJson(r.output);
  EXPECT_EQ(j["num_units"], 5);
  EXPECT_EQ(j["total_records"], 15);

  std::string stats_cfg =
      "[corpus]\n"
      "path = " + dir.Path("o") + "/corpus.jsonl\n";
  test::WriteFile(dir.Path("s.ini"), stats_cfg);
  CliResult s = RunCli("stats --config " + dir.Path("s.ini") + " --out " +
                       dir.Path("so"));
  ASSERT_EQ(s.code, 0) << s.output;
  json sj = LastJson(s.output);
  EXPECT_EQ(sj["num_units"], 5);
  EXPECT_EQ(sj["total_records"], 15);
  EXPECT_DOUBLE_EQ(sj["avg_records"].get<double>(), 3.0);
}

TEST(CliTest, SelectKeepsTheLongestRecords) {
  TempDir dir;
  test::WriteFile(dir.Path("corpus.jsonl"),
                  "{\"user_id\": \"u0\", \"text\": \"abcdefgh\"}\n"
                  "{\"user_id\": \"u0\", \"text\": \"ab\"}\n"
                  "{\"user_id\": \"u1\", \"text\": \"xyz\"}\n");
  std::string text =
      "[run]\n"
      "k = 1\n"
      "strategy = longest\n"
      "max_seq_len = 64\n"
      "[corpus]\n"
      "path = " + dir.Path("corpus.jsonl") + "\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("select --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  corpus::UserCorpus sel =
      corpus::LoadCorpus(dir.Path("o") + "/selected.jsonl", 64);
  ASSERT_EQ(sel.num_units(), 2u);
  ASSERT_EQ(sel.unit(0).records.size(), 1u);
  EXPECT_EQ(sel.unit(0).records[0].tokens.size(), 8u);
  EXPECT_EQ(sel.unit(1).records[0].tokens.size(), 3u);
  json j = LastJson(r.output);
  EXPECT_EQ(j["total_records"], 2);
}

TEST(CliTest, AnalyzeNoiseFindsTheCrossover) {
  TempDir dir;
  std::string text =
      "[run]\n"
      "epsilon = 2\n"
      "delta = 1e-5\n"
      "steps = 5\n"
      "grid_spacing = 0.002\n"
      "[analyze]\n"
      "mode = noise\n"
      "noise_users = 50\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("analyze --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  json j = LastJson(r.output);
  EXPECT_GT(j["sigma_filtered"].get<double>(), j["sigma_standard"].get<double>());
  EXPECT_TRUE(std::isfinite(j["crossover_ratio"].get<double>()));
  std::string csv = test::ReadFile(dir.Path("o") + "/noise_curves.csv");
  EXPECT_NE(csv.find("crossover,"), std::string::npos);
}

TEST(CliTest, AnalyzeConcentrationWritesQuantiles) {
  TempDir dir;
  std::string text =
      "[run]\n"
      "k = 2\n"
      "max_seq_len = 16\n"
      "[corpus]\n"
      "synth_units = 12\n"
      "synth_len_constant = 12\n"
      "[model]\n"
      "d_emb = 2\n"
      "context = 2\n"
      "d_h = 4\n"
      "[analyze]\n"
      "mode = concentration\n"
      "probe_users = 6\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("analyze --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  json j = LastJson(r.output);
  EXPECT_EQ(j["probe_users"], 6);
  EXPECT_GE(j["q90"].get<double>(), j["q10"].get<double>());
  std::string csv = test::ReadFile(dir.Path("o") + "/concentration.csv");
  EXPECT_NE(csv.find("q50,"), std::string::npos);
}

TEST(CliTest, AnalyzeSweepCrossesAxesAndSeeds) {
  TempDir dir;
  std::string text =
      "[run]\n"
      "mechanism = userwise\n"
      "epsilon = inf\n"
      "user_batch = 4\n"
      "steps = 2\n"
      "max_seq_len = 16\n"
      "[corpus]\n"
      "synth_units = 8\n"
      "synth_len_constant = 12\n"
      "[model]\n"
      "d_emb = 2\n"
      "context = 2\n"
      "d_h = 4\n"
      "[analyze]\n"
      "mode = sweep\n"
      "axis = eta\n"
      "values = 0.1, 0.2\n"
      "axis2 = k\n"
      "values2 = 1, 2\n"
      "seeds = 1, 2\n";
  test::WriteFile(dir.Path("c.ini"), text);
  CliResult r = RunCli("analyze --config " + dir.Path("c.ini") + " --out " +
                       dir.Path("o"));
  ASSERT_EQ(r.code, 0) << r.output;
  json j = LastJson(r.output);
  EXPECT_EQ(j["rows"], 8);
  EXPECT_EQ(j["failed"], 0);
  std::string csv = test::ReadFile(dir.Path("o") + "/sweep.csv");
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 9u);  // header + 8 rows
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "eta,k,seed,sigma,final_loss,final_eval_ppl,halted,error");
}

TEST(CliTest, UsageErrorsExitWithConfigCode) {
  TempDir dir;
  CliResult r = RunCli("train");
  EXPECT_EQ(r.code, 2) << r.output;
  CliResult bad = RunCli("transmogrify --config x.ini");
  EXPECT_EQ(bad.code, 2) << bad.output;
  CliResult missing = RunCli("train --config " + dir.Path("absent.ini"));
  EXPECT_EQ(missing.code, 2) << missing.output;

  std::string config = SynthTrainConfig(dir, "epsilon = inf\n");
  CliResult wrong_model =
      RunCli("train --config " + config + " --out " + dir.Path("o"));
  ASSERT_EQ(wrong_model.code, 0);
  std::string text = test::ReadFile(config);
  test::WriteFile(dir.Path("me.ini"),
                  text + "kind = mean_estimation\n");
  // mean_estimation lives behind the library API, not the cli.
  CliResult me = RunCli("train --config " + dir.Path("me.ini") + " --out " +
                        dir.Path("o2"));
  EXPECT_EQ(me.code, 2) << me.output;
  EXPECT_NE(me.output.find("library-only"), std::string::npos) << me.output;
}

}  // namespace
}  // namespace userdp::cli
