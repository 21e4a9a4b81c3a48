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

#ifndef USERDP_RUN_CONFIG_H_
#define USERDP_RUN_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "userdp/corpus.h"
#include "userdp/mechanisms.h"
#include "userdp/models.h"

namespace userdp::cli {

// Where a corpus comes from: a JSONL path or a synthesizer spec. Exactly one
// of path / synth_units may be set when the corpus is used.
struct CorpusSource {
  std::string path;
  int synth_units = 0;  // > 0 enables synthesis
  corpus::SynthSpec synth;

  bool FromPath() const { return !path.empty(); }
  bool FromSynth() const { return synth_units > 0; }
};

struct AnalyzeConfig {
  std::string mode;  // "noise", "concentration", or "sweep"
  std::vector<double> ratios = {0.001, 0.0025, 0.005, 0.01,  0.025,
                                0.05,  0.1,    0.25,  0.5,   1.0};
  double noise_users = 0.0;  // 0: take N from the corpus
  int probe_users = 16;
  std::string axis;
  std::vector<std::string> values;
  std::string axis2;
  std::vector<std::string> values2;
  std::vector<std::uint64_t> seeds;  // empty: the run seed
};

// Everything a subcommand needs, parsed from one INI-style file with
// sections [run], [corpus], [eval], [model], [analyze]. Unknown sections or
// keys are rejected by name; so are duplicate keys.
struct RunConfig {
  mechanisms::TrainConfig train;
  std::optional<double> delta;          // required whenever epsilon is finite
  std::optional<double> sigma_override;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  CorpusSource corpus;
  CorpusSource eval;

  std::string model_kind = "char_lm";
  models::CharLmConfig char_lm;

  AnalyzeConfig analyze;
};

RunConfig ParseRunConfig(const std::string& text);
RunConfig ParseRunConfigFile(const std::string& path);

// Canonical rendering: every key in a fixed order, so that
// Serialize(ParseRunConfig(Serialize(c))) == Serialize(c) byte for byte.
std::string Serialize(const RunConfig& config);

}  // namespace userdp::cli

#endif  // USERDP_RUN_CONFIG_H_
