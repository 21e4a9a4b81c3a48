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

#ifndef USERDP_ACCOUNTING_H_
#define USERDP_ACCOUNTING_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace userdp::accounting {

// Pessimistic rounds each privacy loss up to the next grid point, so every
// delta/epsilon read off the grid upper-bounds the true value. Optimistic
// rounds down and lower-bounds it; the gap between the two brackets the
// discretization error.
enum class Rounding { kPessimistic, kOptimistic };

// Discretized distribution of the privacy loss ln(P(o)/Q(o)) for one
// adjacency direction. Cell i carries the probability of losses rounded to
// (min_index + i) * grid_spacing; infinity_mass is the probability of
// unbounded loss (events impossible under Q, plus truncated upper tail under
// pessimistic rounding).
struct PrivacyLossPmf {
  double grid_spacing = 1e-4;
  std::int64_t min_index = 0;
  std::vector<double> masses;
  double infinity_mass = 0.0;
  Rounding rounding = Rounding::kPessimistic;

  std::int64_t MaxIndex() const {
    return min_index + static_cast<std::int64_t>(masses.size()) - 1;
  }
  double TotalMass() const;
};

// Both adjacency directions of one mechanism. Queries take the worse of the
// two; add_adjacency is absent when the mechanism is symmetric (no
// subsampling), where both directions coincide.
struct PrivacyLossDistribution {
  PrivacyLossPmf remove_adjacency;
  std::optional<PrivacyLossPmf> add_adjacency;
};

struct PldOptions {
  double grid_spacing = 1e-4;
  Rounding rounding = Rounding::kPessimistic;
  // Probability mass allowed outside the discretized support per truncation
  // event (half per tail). Pessimistic rounding folds the upper tail into
  // infinity_mass and the lower tail into the bottom cell.
  double tail_mass = 1e-15;
  // Hard cap on grid cells per direction. Under pessimistic rounding an
  // overflowing upper range is folded into infinity_mass; under optimistic
  // rounding overflow raises NumericError since folding down would cheat.
  std::int64_t max_support = std::int64_t{1} << 22;
};

// Poisson-subsampled Gaussian mechanism: sensitivity-1 Gaussian with scale
// sigma where the differing record is included with probability q. q == 1
// gives the plain Gaussian mechanism (symmetric, one direction stored).
PrivacyLossDistribution GaussianPld(double sigma, double q,
                                    const PldOptions& opts = {});

// One user owning k records, each included independently with probability q:
// against the neighbor without that user, the shift is Binomial(k, q), so
// the upper measure is a binomial mixture of Gaussians N(s, sigma^2). k == 1
// reduces to GaussianPld.
PrivacyLossDistribution MixtureOfGaussiansPld(double sigma, double q, int k,
                                              const PldOptions& opts = {});

// Distribution of the summed loss over num_steps independent runs, by FFT
// convolution with binary squaring; tails are re-truncated after each
// convolution per the pmf's rounding. Infinity mass composes as
// 1 - (1 - m)^num_steps. opts supplies tail_mass and max_support;
// grid_spacing and rounding always come from the input distribution.
PrivacyLossDistribution Compose(const PrivacyLossDistribution& pld,
                                int num_steps, const PldOptions& opts = {});

// Hockey-stick divergence read off the grid:
//   delta(eps) = infinity_mass + sum_{loss > eps} mass * (1 - e^(eps - loss)),
// maximized over the stored directions.
double DeltaForEpsilon(const PrivacyLossDistribution& pld, double epsilon);

// Smallest on-grid epsilon >= 0 with delta(epsilon) <= delta. Throws
// CalibrationError when delta <= infinity_mass (no finite epsilon works).
double EpsilonForDelta(const PrivacyLossDistribution& pld, double delta);

// Smallest sigma (to 1e-3 relative) such that num_steps compositions of the
// Poisson-subsampled Gaussian with q = batch/num_records stay within
// (epsilon, delta). Bisection starts from [1e-2, 1e2] and doubles outward;
// failure to bracket after 200 doublings raises CalibrationError.
double CalibrateNoise(double epsilon, double delta, double num_records,
                      double batch, int num_steps,
                      const PldOptions& opts = {});

// Same, with the user-level mixture-of-Gaussians accountant: each user owns
// k of the num_records records.
double CalibrateNoiseGroup(int k, double epsilon, double delta,
                           double num_records, double batch, int num_steps,
                           const PldOptions& opts = {});

// Example-level epsilon spent by num_steps subsampled-Gaussian steps.
double AccountEpsilon(double sigma, double delta, double num_records,
                      double batch, int num_steps,
                      const PldOptions& opts = {});

// User-level epsilon for a user owning k records, mixture accountant.
double AccountEpsilonGroup(int k, double sigma, double delta,
                           double num_records, double batch, int num_steps,
                           const PldOptions& opts = {});

// Closed-form group-privacy conversion from record level to a group of k.
// kStandard applies (eps, delta) -> (k eps, delta (e^{k eps}-1)/(e^eps-1));
// kLiteral keeps the variant delta e^{k eps - 1}/(e^eps - 1) around for
// comparison.
enum class NaiveGroupForm { kStandard, kLiteral };

struct EpsilonDelta {
  double epsilon = 0.0;
  double delta = 0.0;
};

EpsilonDelta NaiveGroupPrivacy(double epsilon, double delta, int k,
                               NaiveGroupForm form = NaiveGroupForm::kStandard);

// Record-level budget whose naive k-group conversion lands on the given
// user-level budget; used to calibrate the baseline route.
EpsilonDelta NaiveGroupPrivacyInverse(double user_epsilon, double user_delta,
                                      int k,
                                      NaiveGroupForm form = NaiveGroupForm::kStandard);

// Baseline group calibration: convert the user-level target down with the
// naive formula, then calibrate a plain subsampled Gaussian against it.
double CalibrateNoiseGroupNaive(int k, double epsilon, double delta,
                                double num_records, double batch,
                                int num_steps,
                                NaiveGroupForm form = NaiveGroupForm::kStandard,
                                const PldOptions& opts = {});

struct AccountingResult {
  std::string mechanism;
  double sigma = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double q = 0.0;
  int num_steps = 0;
  int k = 1;
  double grid_spacing = 1e-4;
  Rounding rounding = Rounding::kPessimistic;
};

std::string ToJson(const AccountingResult& result);

}  // namespace userdp::accounting

#endif  // USERDP_ACCOUNTING_H_
