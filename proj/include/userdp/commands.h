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

#ifndef USERDP_COMMANDS_H_
#define USERDP_COMMANDS_H_

#include "userdp/run_config.h"

namespace userdp::cli {

// Subcommand bodies. Each writes its artifacts under config.out_dir, prints
// a JSON summary to stdout, and returns the process exit code (0 unless the
// run halted, which maps to 4). Errors are thrown and mapped by RunMain:
// config and parse problems exit 2, calibration failures 3, numeric
// breakdowns 5.
int CmdCalibrate(const RunConfig& config);
int CmdTrain(const RunConfig& config);
int CmdSelect(const RunConfig& config);
int CmdStats(const RunConfig& config);
int CmdAnalyze(const RunConfig& config);
int CmdSynth(const RunConfig& config);

// Full argv entry point: subcommand dispatch, --config/--seed/--out flags,
// exception-to-exit-code mapping.
int RunMain(int argc, char** argv);

}  // namespace userdp::cli

#endif  // USERDP_COMMANDS_H_
