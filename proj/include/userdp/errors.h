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

#ifndef USERDP_ERRORS_H_
#define USERDP_ERRORS_H_

#include <stdexcept>
#include <string>

namespace userdp {

// Invalid or inconsistent configuration (bad parameter values, unknown keys,
// missing required fields). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data (corpus files, checkpoints). Messages carry enough
// context to locate the offending line or field. CLI maps this to exit 2.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Noise calibration could not bracket or meet the privacy target, or a
// privacy query is unsatisfiable at the requested delta. CLI exit 3.
class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what)
      : std::runtime_error(what) {}
};

// Numerical failure during training or accounting (non-finite loss,
// overflowed support). CLI exit 5.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace userdp

#endif  // USERDP_ERRORS_H_
