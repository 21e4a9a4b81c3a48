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

#include "userdp/commands.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "userdp/accounting.h"
#include "userdp/analysis.h"
#include "userdp/corpus.h"
#include "userdp/errors.h"
#include "userdp/mechanisms.h"
#include "userdp/models.h"
#include "userdp/rng.h"

namespace userdp::cli {
namespace {

using nlohmann::ordered_json;

void EnsureOutDir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + cfg.out_dir +
                      "': " + ec.message());
  }
}

std::string OutPath(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

double RequireDelta(const RunConfig& cfg) {
  if (!cfg.delta) throw ConfigError("missing required field 'delta' in [run]");
  return *cfg.delta;
}

// Eval corpora synthesized from the same seed would duplicate the training
// units, so synthesis shifts the seed by one; files load as-is.
corpus::UserCorpus LoadSource(const CorpusSource& src, const char* section,
                              std::uint64_t seed, std::size_t max_seq_len,
                              bool is_eval) {
  if (src.FromPath() && src.FromSynth()) {
    throw ConfigError(std::string("[") + section +
                      "] sets both path and synth_units; pick one");
  }
  if (src.FromPath()) return corpus::LoadCorpus(src.path, max_seq_len);
  if (src.FromSynth()) {
    return corpus::SynthCorpus(src.synth, is_eval ? seed + 1 : seed);
  }
  throw ConfigError(std::string("[") + section +
                    "] needs a path or synth_units > 0");
}

bool HasEval(const RunConfig& cfg) {
  return cfg.eval.FromPath() || cfg.eval.FromSynth();
}

mechanisms::TrainConfig BuildTrainConfig(const RunConfig& cfg) {
  mechanisms::TrainConfig t = cfg.train;
  t.sigma_override = cfg.sigma_override;
  if (std::isfinite(t.epsilon)) {
    t.delta = RequireDelta(cfg);
  }
  return t;
}

std::unique_ptr<models::Model> BuildModel(const RunConfig& cfg,
                                          std::uint64_t seed) {
  if (cfg.model_kind != "char_lm") {
    throw ConfigError("model kind '" + cfg.model_kind +
                      "' is library-only; the cli trains char_lm");
  }
  return std::make_unique<models::CharLm>(cfg.char_lm, seed);
}

ordered_json StatsJson(const corpus::UnitStats& stats) {
  return ordered_json{{"num_units", stats.num_units},
                      {"total_records", stats.total_records},
                      {"avg_records", stats.avg_records},
                      {"min_records", stats.min_records},
                      {"max_records", stats.max_records},
                      {"median_records", stats.median_records}};
}

void PrintJson(const ordered_json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int CmdCalibrate(const RunConfig& cfg) {
  const mechanisms::TrainConfig& t = cfg.train;
  if (!std::isfinite(t.epsilon)) {
    throw ConfigError("calibrate needs a finite epsilon");
  }
  double delta = RequireDelta(cfg);
  if (t.steps < 1) throw ConfigError("calibrate needs steps >= 1");
  corpus::UserCorpus train_corpus =
      LoadSource(cfg.corpus, "corpus", cfg.seed, t.max_seq_len, false);
  double n_units = static_cast<double>(train_corpus.num_units());
  if (n_units < 1) throw ConfigError("corpus has no units");

  accounting::AccountingResult res;
  res.mechanism = std::string(mechanisms::MechanismName(t.mechanism));
  res.epsilon = t.epsilon;
  res.delta = delta;
  res.num_steps = t.steps;
  res.k = t.k;
  res.grid_spacing = t.accounting.grid_spacing;
  res.rounding = t.accounting.rounding;

  switch (t.mechanism) {
    case mechanisms::Mechanism::kGroupPrivacy: {
      double m = n_units * t.k;
      if (!(t.record_batch >= 1) || t.record_batch > m) {
        throw ConfigError("group privacy needs record_batch in [1, N*k]");
      }
      res.q = t.record_batch / m;
      res.sigma =
          t.group_accounting == mechanisms::GroupAccounting::kMixture
              ? accounting::CalibrateNoiseGroup(t.k, t.epsilon, delta, m,
                                                t.record_batch, t.steps,
                                                t.accounting)
              : accounting::CalibrateNoiseGroupNaive(t.k, t.epsilon, delta, m,
                                                     t.record_batch, t.steps,
                                                     t.naive_form,
                                                     t.accounting);
      break;
    }
    case mechanisms::Mechanism::kUserWise: {
      if (!(t.user_batch >= 1) || t.user_batch > n_units) {
        throw ConfigError("userwise needs user_batch in [1, num_units]");
      }
      res.q = t.user_batch / n_units;
      res.sigma = accounting::CalibrateNoise(t.epsilon, delta, n_units,
                                             t.user_batch, t.steps,
                                             t.accounting);
      break;
    }
    case mechanisms::Mechanism::kFiltered: {
      res.q = 1.0;
      res.sigma = accounting::CalibrateNoise(t.epsilon / 2.0, delta / 2.0,
                                             n_units, n_units, t.steps,
                                             t.accounting);
      break;
    }
  }

  std::string json = accounting::ToJson(res);
  EnsureOutDir(cfg);
  WriteTextFile(OutPath(cfg, "accounting.json"), json + "\n");
  std::cout << json << std::endl;
  return 0;
}

int CmdTrain(const RunConfig& cfg) {
  mechanisms::TrainConfig t = BuildTrainConfig(cfg);
  corpus::UserCorpus train_corpus =
      LoadSource(cfg.corpus, "corpus", cfg.seed, t.max_seq_len, false);
  std::optional<corpus::UserCorpus> eval_corpus;
  if (HasEval(cfg)) {
    eval_corpus =
        LoadSource(cfg.eval, "eval", cfg.seed, t.max_seq_len, true);
  }
  std::unique_ptr<models::Model> model = BuildModel(cfg, cfg.seed);

  mechanisms::TrainResult result = mechanisms::Train(
      *model, train_corpus, eval_corpus ? &*eval_corpus : nullptr, t,
      cfg.seed);

  EnsureOutDir(cfg);
  mechanisms::WriteHistoryCsv(result.history, OutPath(cfg, "history.csv"));
  models::SaveCheckpoint(*model, OutPath(cfg, "model.ckpt"));
  WriteTextFile(OutPath(cfg, "config.ini"), Serialize(cfg));

  ordered_json summary{{"mechanism", mechanisms::MechanismName(t.mechanism)},
                       {"sigma", result.sigma},
                       {"sampling_q", result.sampling_q},
                       {"steps_run", result.history.size()},
                       {"halted", result.halted}};
  if (result.halted) summary["halted_step"] = result.halted_step;
  if (eval_corpus) summary["final_eval_ppl"] = result.final_eval_ppl;
  PrintJson(summary);
  if (result.halted) {
    std::cout << "halted at step " << result.halted_step << std::endl;
    return 4;
  }
  return 0;
}

int CmdSelect(const RunConfig& cfg) {
  const mechanisms::TrainConfig& t = cfg.train;
  corpus::UserCorpus train_corpus =
      LoadSource(cfg.corpus, "corpus", cfg.seed, t.max_seq_len, false);

  // ppl strategies rank with a freshly initialized model, the same frozen
  // scores training itself would use.
  corpus::RecordScorer scorer_fn;
  const corpus::RecordScorer* scorer = nullptr;
  std::unique_ptr<models::Model> model;
  if (t.strategy == corpus::SelectionStrategy::kHighestPpl ||
      t.strategy == corpus::SelectionStrategy::kLowestPpl) {
    model = BuildModel(cfg, cfg.seed);
    scorer_fn = models::MakePplScorer(*model);
    scorer = &scorer_fn;
  }

  std::mt19937_64 rng = SubStream(cfg.seed, "select");
  corpus::UserCorpus selected = corpus::SelectRecords(
      train_corpus, t.strategy, t.k, t.max_seq_len, scorer, rng);

  EnsureOutDir(cfg);
  corpus::WriteJsonl(selected, OutPath(cfg, "selected.jsonl"));
  ordered_json j = StatsJson(corpus::ComputeStats(selected));
  WriteTextFile(OutPath(cfg, "selected_stats.json"), j.dump(2) + "\n");
  PrintJson(j);
  return 0;
}

int CmdStats(const RunConfig& cfg) {
  corpus::UserCorpus train_corpus = LoadSource(
      cfg.corpus, "corpus", cfg.seed, cfg.train.max_seq_len, false);
  ordered_json j = StatsJson(corpus::ComputeStats(train_corpus));
  EnsureOutDir(cfg);
  WriteTextFile(OutPath(cfg, "stats.json"), j.dump(2) + "\n");
  PrintJson(j);
  return 0;
}

int CmdAnalyze(const RunConfig& cfg) {
  const AnalyzeConfig& a = cfg.analyze;
  const mechanisms::TrainConfig& t = cfg.train;
  if (a.mode.empty()) {
    throw ConfigError("missing required field 'mode' in [analyze]");
  }
  EnsureOutDir(cfg);

  if (a.mode == "noise") {
    if (!std::isfinite(t.epsilon)) {
      throw ConfigError("noise analysis needs a finite epsilon");
    }
    double delta = RequireDelta(cfg);
    double n_users = a.noise_users;
    if (n_users <= 0) {
      n_users = static_cast<double>(
          LoadSource(cfg.corpus, "corpus", cfg.seed, t.max_seq_len, false)
              .num_units());
    }
    analysis::NoiseComparison curves = analysis::EffectiveNoiseCurves(
        t.epsilon, delta, t.steps, n_users, t.k, t.clip_norm, a.ratios,
        t.accounting);
    analysis::WriteNoiseCurvesCsv(curves, OutPath(cfg, "noise_curves.csv"));
    PrintJson(ordered_json{{"sigma_standard", curves.sigma_standard},
                           {"sigma_filtered", curves.sigma_filtered},
                           {"crossover_ratio", curves.crossover_ratio}});
    return 0;
  }

  if (a.mode == "concentration") {
    corpus::UserCorpus train_corpus =
        LoadSource(cfg.corpus, "corpus", cfg.seed, t.max_seq_len, false);
    std::unique_ptr<models::Model> model = BuildModel(cfg, cfg.seed);
    if (a.probe_users < 2) throw ConfigError("probe_users must be at least 2");
    analysis::ConcentrationReport report = analysis::MeasureConcentration(
        *model, train_corpus, t.k, t.strategy, t.max_seq_len,
        static_cast<std::size_t>(a.probe_users), cfg.seed);
    analysis::WriteConcentrationCsv(report, OutPath(cfg, "concentration.csv"));
    PrintJson(ordered_json{{"probe_users", report.probe_users},
                           {"median_grad_norm", report.median_grad_norm},
                           {"q10", report.q10},
                           {"q50", report.q50},
                           {"q90", report.q90}});
    return 0;
  }

  if (a.mode == "sweep") {
    if (a.axis.empty() || a.values.empty()) {
      throw ConfigError("sweep needs 'axis' and 'values' in [analyze]");
    }
    std::vector<analysis::SweepAxis> axes;
    axes.push_back({a.axis, a.values});
    if (!a.axis2.empty()) {
      if (a.values2.empty()) {
        throw ConfigError("'axis2' set without 'values2' in [analyze]");
      }
      axes.push_back({a.axis2, a.values2});
    }
    std::vector<std::uint64_t> seeds =
        a.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : a.seeds;

    mechanisms::TrainConfig base = BuildTrainConfig(cfg);
    corpus::UserCorpus train_corpus =
        LoadSource(cfg.corpus, "corpus", cfg.seed, t.max_seq_len, false);
    std::optional<corpus::UserCorpus> eval_corpus;
    if (HasEval(cfg)) {
      eval_corpus = LoadSource(cfg.eval, "eval", cfg.seed, t.max_seq_len, true);
    }
    analysis::ModelFactory factory = [&cfg](std::uint64_t seed) {
      return BuildModel(cfg, seed);
    };
    std::vector<analysis::SweepRow> rows = analysis::RunSweep(
        base, axes, seeds, factory, train_corpus,
        eval_corpus ? &*eval_corpus : nullptr);
    analysis::WriteSweepCsv(axes, rows, OutPath(cfg, "sweep.csv"));
    std::size_t failed = 0;
    for (const analysis::SweepRow& r : rows) {
      if (!r.error.empty()) ++failed;
    }
    PrintJson(ordered_json{{"rows", rows.size()}, {"failed", failed}});
    return 0;
  }

  throw ConfigError("unknown analyze mode '" + a.mode + "'");
}

int CmdSynth(const RunConfig& cfg) {
  if (!cfg.corpus.FromSynth()) {
    throw ConfigError("synth needs synth_units > 0 in [corpus]");
  }
  corpus::UserCorpus c = corpus::SynthCorpus(cfg.corpus.synth, cfg.seed);
  EnsureOutDir(cfg);
  corpus::WriteJsonl(c, OutPath(cfg, "corpus.jsonl"));
  PrintJson(StatsJson(corpus::ComputeStats(c)));
  return 0;
}

int RunMain(int argc, char** argv) {
  CLI::App app{"user-level differentially private training toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_flag = 0;
  std::string out_flag;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Entry entries[] = {
      {"calibrate", "compute the noise multiplier for the configured run",
       &CmdCalibrate},
      {"train", "run private training and write history + checkpoint",
       &CmdTrain},
      {"select", "materialize the k-records-per-user training subset",
       &CmdSelect},
      {"stats", "print corpus summary statistics", &CmdStats},
      {"analyze", "noise curves, concentration, or sweeps per [analyze] mode",
       &CmdAnalyze},
      {"synth", "generate the synthetic corpus described in [corpus]",
       &CmdSynth},
  };
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config_path, "run configuration file")
        ->required();
    CLI::Option* s = sub->add_option("--seed", seed_flag,
                                     "override the config seed");
    CLI::Option* o = sub->add_option("--out", out_flag,
                                     "override the output directory");
    sub->callback([&, e, s, o]() {
      seed_opt = s;
      out_opt = o;
    });
    sub->parse_complete_callback([]() {});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = ParseRunConfigFile(config_path);
    if (seed_opt != nullptr && seed_opt->count() > 0) cfg.seed = seed_flag;
    if (out_opt != nullptr && out_opt->count() > 0) cfg.out_dir = out_flag;
    for (const Entry& e : entries) {
      if (app.got_subcommand(e.name)) return e.fn(cfg);
    }
    throw ConfigError("no subcommand given");
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << std::endl;
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << std::endl;
    return 5;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << std::endl;
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

}  // namespace userdp::cli
