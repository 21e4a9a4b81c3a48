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

#include "userdp/accounting.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "userdp/errors.h"

namespace userdp::accounting {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double Phi(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
double PhiC(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

// ln(e^x - 1) for x > 0, stable at both ends.
double LogExpm1(double x) {
  if (x > 36.0) return x;  // e^{-x} below double resolution
  return std::log(std::expm1(x));
}

void ValidateOptions(const PldOptions& opts) {
  if (!(opts.grid_spacing > 0) || !std::isfinite(opts.grid_spacing)) {
    throw ConfigError("grid_spacing must be positive and finite");
  }
  if (!(opts.tail_mass > 0) || opts.tail_mass > 1e-6) {
    throw ConfigError("tail_mass must lie in (0, 1e-6]");
  }
  if (opts.max_support < 1024) {
    throw ConfigError("max_support must be at least 1024 cells");
  }
}

// The sensitivity pattern shared by both adjacency directions: the differing
// user's records shift the Gaussian sum by s with probability
// w_s = Binomial(k, q) at s. All loss math is expressed through
//   G(t) = ln sum_{s>=1} w_s exp((2ts - s^2) / (2 sigma^2)),
// which is strictly increasing with derivative in [1/sigma^2, k/sigma^2],
// so Newton inversion is safe everywhere.
class Mixture {
 public:
  Mixture(double sigma, double q, int k, double grid_spacing)
      : sigma_(sigma), q_(q), k_(k), inv_tol_(1e-3 * grid_spacing) {
    log_w_.resize(k + 1);
    w_.resize(k + 1);
    double log_q = std::log(q);
    double log_1mq = q < 1.0 ? std::log1p(-q) : -kInf;
    for (int s = 0; s <= k; ++s) {
      double log_binom = std::lgamma(k + 1.0) - std::lgamma(s + 1.0) -
                         std::lgamma(k - s + 1.0);
      double lw;
      if (q == 1.0) {
        lw = s == k ? 0.0 : -kInf;
      } else {
        lw = log_binom + s * log_q + (k - s) * log_1mq;
      }
      log_w_[s] = lw;
      w_[s] = std::exp(lw);
    }
    log_w0_ = log_w_[0];
    double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    a_.resize(k + 1, -kInf);
    b_.resize(k + 1, 0.0);
    for (int s = 1; s <= k; ++s) {
      if (log_w_[s] == -kInf) continue;
      a_[s] = log_w_[s] - s * s * inv_two_var;
      b_[s] = s / (sigma * sigma);
    }
  }

  double sigma() const { return sigma_; }
  int k() const { return k_; }
  bool symmetric() const { return q_ == 1.0; }

  // G and G' at t.
  std::pair<double, double> GDeriv(double t) const {
    double m = -kInf;
    for (int s = 1; s <= k_; ++s) {
      if (a_[s] == -kInf) continue;
      m = std::max(m, a_[s] + b_[s] * t);
    }
    double sum = 0.0, dsum = 0.0;
    for (int s = 1; s <= k_; ++s) {
      if (a_[s] == -kInf) continue;
      double v = std::exp(a_[s] + b_[s] * t - m);
      sum += v;
      dsum += b_[s] * v;
    }
    return {m + std::log(sum), dsum / sum};
  }

  // Privacy loss of the remove direction at outcome t (t drawn from the
  // mixture): ln(w0 + e^{G(t)}).
  double LossRemove(double t) const {
    double g = GDeriv(t).first;
    if (log_w0_ == -kInf) return g;
    double m = std::max(log_w0_, g);
    return m + std::log(std::exp(log_w0_ - m) + std::exp(g - m));
  }

  // Privacy loss of the add direction at outcome u (u drawn from N(0,
  // sigma^2) after reflecting so the loss increases in u): -ln(w0 +
  // e^{G(-u)}).
  double LossAdd(double u) const { return -LossRemove(-u); }

  double CdfRemove(double t) const {
    double f = 0.0;
    for (int s = 0; s <= k_; ++s) {
      if (w_[s] == 0.0) continue;
      f += w_[s] * Phi((t - s) / sigma_);
    }
    return f;
  }
  double CcdfRemove(double t) const {
    double f = 0.0;
    for (int s = 0; s <= k_; ++s) {
      if (w_[s] == 0.0) continue;
      f += w_[s] * PhiC((t - s) / sigma_);
    }
    return f;
  }
  double CdfAdd(double u) const { return Phi(u / sigma_); }
  double CcdfAdd(double u) const { return PhiC(u / sigma_); }

  // Solves G(t) = target within [lo, hi]; returns a bracket end when the
  // target lies outside G's range there.
  double InvertG(double target, double warm, double lo, double hi) const {
    if (target == -kInf) return lo;
    if (target == kInf) return hi;
    double t = std::clamp(warm, lo, hi);
    for (int iter = 0; iter < 300; ++iter) {
      auto [g, gp] = GDeriv(t);
      double diff = g - target;
      if (std::abs(diff) <= inv_tol_) return t;
      if (diff > 0) {
        hi = t;
      } else {
        lo = t;
      }
      double next = t - diff / gp;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == t) return t;
      t = next;
    }
    return t;
  }

  // Outcome whose loss equals l, for either direction, clamped to [lo, hi].
  double OutcomeFromLoss(double l, bool add_direction, double lo, double hi,
                         double warm) const {
    if (add_direction) {
      // -ln(w0 + e^{G(-u)}) = l  =>  G(-u) = ln(e^{-l} - w0)
      double target = GTargetFromLoss(-l);
      return -InvertG(target, -warm, -hi, -lo);
    }
    return InvertG(GTargetFromLoss(l), warm, lo, hi);
  }

 private:
  // ln(e^x - w0), the G level at which the remove loss reaches x.
  double GTargetFromLoss(double x) const {
    if (log_w0_ == -kInf) return x;
    double d = x - log_w0_;
    if (d <= 0) return -kInf;
    if (d > 36.0) return x;
    return log_w0_ + std::log(std::expm1(d));
  }

  double sigma_;
  double q_;
  int k_;
  double inv_tol_;
  double log_w0_ = -kInf;
  std::vector<double> log_w_, w_;
  std::vector<double> a_, b_;  // G exponent terms: a_s + b_s * t
};

// Largest t in [lo, hi] with cdf(t) <= p (is_lower) or smallest t with
// ccdf(t) <= p (!is_lower). cdf/ccdf are monotone; plain bisection.
template <typename F>
double TailQuantile(const F& tail_fn, double p, double lo, double hi,
                    bool decreasing_keep_low) {
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    bool below = tail_fn(mid) <= p;
    if (decreasing_keep_low == below) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct FailFast {
  double epsilon;
  double delta;
};

// Discretizes one adjacency direction. Returns nullopt only when fail_fast
// is set and the mass provably exceeds fail_fast->delta at
// fail_fast->epsilon, which the calibrator treats as "sigma too small".
std::optional<PrivacyLossPmf> BuildDirection(const Mixture& mix,
                                             bool add_direction,
                                             const PldOptions& opts,
                                             const FailFast* fail_fast) {
  const double dl = opts.grid_spacing;
  const double half_tail = 0.5 * opts.tail_mass;
  const double sigma = mix.sigma();

  double span_lo, span_hi;
  if (add_direction) {
    span_lo = -12.0 * sigma;
    span_hi = 12.0 * sigma;
  } else {
    span_lo = -12.0 * sigma;
    span_hi = mix.k() + 12.0 * sigma;
  }
  auto cdf = [&](double t) {
    return add_direction ? mix.CdfAdd(t) : mix.CdfRemove(t);
  };
  auto ccdf = [&](double t) {
    return add_direction ? mix.CcdfAdd(t) : mix.CcdfRemove(t);
  };
  auto loss = [&](double t) {
    return add_direction ? mix.LossAdd(t) : mix.LossRemove(t);
  };

  // Outcome range carrying all but tail_mass of the probability.
  double t_lo = TailQuantile(cdf, half_tail, span_lo, span_hi, false);
  double t_hi = TailQuantile(ccdf, half_tail, span_lo, span_hi, true);

  double l_lo = loss(t_lo);
  double l_hi = loss(t_hi);

  if (fail_fast != nullptr && l_lo > fail_fast->epsilon) {
    // Every outcome in range has loss above epsilon, so
    // delta(eps) >= (1 - e^{eps - l_lo}) * (1 - tail).
    double bound = -std::expm1(fail_fast->epsilon - l_lo) * (1.0 - opts.tail_mass);
    if (bound >= fail_fast->delta) return std::nullopt;
  }

  const bool pess = opts.rounding == Rounding::kPessimistic;
  double di_lo = pess ? std::ceil(l_lo / dl) : std::floor(l_lo / dl);
  double di_hi = pess ? std::ceil(l_hi / dl) : std::floor(l_hi / dl);
  // Casting out-of-range doubles to int64 is undefined; reject before the
  // cast. Only degenerate scales (sigma far below the grid's resolution)
  // get here.
  constexpr double kIndexLimit = 4.0e18;
  if (!(di_lo >= -kIndexLimit) || !(di_hi <= kIndexLimit)) {
    throw NumericError(
        "privacy loss support exceeds the representable index range");
  }
  std::int64_t i_lo = static_cast<std::int64_t>(di_lo);
  std::int64_t i_hi = static_cast<std::int64_t>(di_hi);

  double t_top = t_hi;
  if (i_hi - i_lo + 1 > opts.max_support) {
    std::int64_t i_cap = i_lo + opts.max_support - 1;
    double t_cap = mix.OutcomeFromLoss(i_cap * dl, add_direction, t_lo, t_hi,
                                       0.5 * (t_lo + t_hi));
    double fold = ccdf(t_cap);
    if (!pess && fold > opts.tail_mass) {
      throw NumericError(
          "privacy loss support overflows max_support under optimistic "
          "rounding");
    }
    if (fail_fast != nullptr && fold >= fail_fast->delta) return std::nullopt;
    i_hi = i_cap;
    t_top = t_cap;
  }

  PrivacyLossPmf pmf;
  pmf.grid_spacing = dl;
  pmf.rounding = opts.rounding;
  pmf.min_index = i_lo;
  pmf.masses.assign(static_cast<std::size_t>(i_hi - i_lo + 1), 0.0);

  // Sweep cell boundaries in increasing loss order; differences of the
  // outcome CDF at the boundaries give cell masses. Warm-started Newton
  // makes each inversion a couple of G evaluations.
  double warm = t_lo;
  double prev_cdf = pess ? 0.0 : cdf(t_lo);  // pessimistic folds the lower
                                             // tail up into the first cell
  for (std::int64_t i = i_lo; i <= i_hi; ++i) {
    double cur_cdf;
    if (i == i_hi) {
      cur_cdf = cdf(t_top);
    } else {
      // Pessimistic cell i covers losses ((i-1) dl, i dl]; optimistic cell i
      // covers [i dl, (i+1) dl). Either way the upper boundary is below.
      double boundary = pess ? i * dl : (i + 1) * dl;
      double t_b = mix.OutcomeFromLoss(boundary, add_direction, t_lo, t_hi, warm);
      warm = t_b;
      cur_cdf = cdf(t_b);
    }
    double m = cur_cdf - prev_cdf;
    pmf.masses[static_cast<std::size_t>(i - i_lo)] = m > 0 ? m : 0.0;
    prev_cdf = cur_cdf;
  }

  double upper_tail = ccdf(t_top);
  if (pess) {
    pmf.infinity_mass = upper_tail;
  } else {
    pmf.masses.back() += upper_tail;  // rounded down into the top cell
    pmf.infinity_mass = 0.0;
  }
  return pmf;
}

double MaxInfinity(const PrivacyLossDistribution& pld) {
  double m = pld.remove_adjacency.infinity_mass;
  if (pld.add_adjacency) m = std::max(m, pld.add_adjacency->infinity_mass);
  return m;
}

std::optional<PrivacyLossDistribution> BuildPld(double sigma, double q, int k,
                                                const PldOptions& opts,
                                                const FailFast* fail_fast) {
  if (!(sigma > 0) || !std::isfinite(sigma)) {
    throw ConfigError("sigma must be positive and finite");
  }
  if (!(q > 0) || q > 1.0) {
    throw ConfigError("sampling probability q must lie in (0, 1]");
  }
  if (k < 1) throw ConfigError("k must be at least 1");
  ValidateOptions(opts);

  Mixture mix(sigma, q, k, opts.grid_spacing);
  PrivacyLossDistribution pld;
  auto remove = BuildDirection(mix, false, opts, fail_fast);
  if (!remove) return std::nullopt;
  pld.remove_adjacency = std::move(*remove);
  if (!mix.symmetric()) {
    auto add = BuildDirection(mix, true, opts, fail_fast);
    if (!add) return std::nullopt;
    pld.add_adjacency = std::move(*add);
  }
  return pld;
}

std::int64_t NextFastLen(std::int64_t n) {
  while (true) {
    std::int64_t m = n;
    for (int p : {2, 3, 5, 7}) {
      while (m % p == 0) m /= p;
    }
    if (m == 1) return n;
    ++n;
  }
}

std::vector<double> FftConvolve(const std::vector<double>& a,
                                const std::vector<double>& b) {
  const std::int64_t n = static_cast<std::int64_t>(a.size() + b.size()) - 1;
  const std::int64_t nf = NextFastLen(n);
  const std::int64_t nc = nf / 2 + 1;

  double* in = fftw_alloc_real(nf);
  fftw_complex* spec = fftw_alloc_complex(nc);
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(nf), in, spec, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_1d(static_cast<int>(nf), spec, in, FFTW_ESTIMATE);

  std::vector<std::complex<double>> fa(nc);
  std::fill(in, in + nf, 0.0);
  std::copy(a.begin(), a.end(), in);
  fftw_execute(fwd);
  std::copy(reinterpret_cast<std::complex<double>*>(spec),
            reinterpret_cast<std::complex<double>*>(spec) + nc, fa.begin());

  std::fill(in, in + nf, 0.0);
  std::copy(b.begin(), b.end(), in);
  fftw_execute(fwd);

  auto* sp = reinterpret_cast<std::complex<double>*>(spec);
  for (std::int64_t i = 0; i < nc; ++i) sp[i] *= fa[i];
  fftw_execute(bwd);

  std::vector<double> out(static_cast<std::size_t>(n));
  const double scale = 1.0 / static_cast<double>(nf);
  for (std::int64_t i = 0; i < n; ++i) {
    double v = in[i] * scale;
    out[static_cast<std::size_t>(i)] = v > 0 ? v : 0.0;
  }

  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  fftw_free(in);
  fftw_free(spec);
  return out;
}

void TruncateTails(PrivacyLossPmf& p, const PldOptions& opts) {
  const double half_tail = 0.5 * opts.tail_mass;
  const bool pess = p.rounding == Rounding::kPessimistic;

  // Lower tail: pessimistic folds it up into the first kept cell,
  // optimistic drops it (<= tail_mass/2 of mass, within tolerance).
  std::size_t lo = 0;
  double acc = 0.0;
  while (lo + 1 < p.masses.size() && acc + p.masses[lo] <= half_tail) {
    acc += p.masses[lo];
    ++lo;
  }
  if (lo > 0) {
    if (pess) p.masses[lo] += acc;
    p.masses.erase(p.masses.begin(), p.masses.begin() + static_cast<std::ptrdiff_t>(lo));
    p.min_index += static_cast<std::int64_t>(lo);
  }

  // Upper tail: pessimistic promotes it to infinity_mass, optimistic folds
  // it down into the last kept cell.
  std::size_t hi = p.masses.size();
  acc = 0.0;
  while (hi > 1 && acc + p.masses[hi - 1] <= half_tail) {
    acc += p.masses[hi - 1];
    --hi;
  }
  if (hi < p.masses.size()) {
    p.masses.resize(hi);
    if (pess) {
      p.infinity_mass += acc;
    } else {
      p.masses.back() += acc;
    }
  }

  if (static_cast<std::int64_t>(p.masses.size()) > opts.max_support) {
    if (!pess) {
      throw NumericError(
          "composed privacy loss support overflows max_support under "
          "optimistic rounding");
    }
    double fold = 0.0;
    for (std::size_t i = static_cast<std::size_t>(opts.max_support); i < p.masses.size(); ++i) {
      fold += p.masses[i];
    }
    p.masses.resize(static_cast<std::size_t>(opts.max_support));
    p.infinity_mass += fold;
  }
}

PrivacyLossPmf ConvolvePmf(const PrivacyLossPmf& a, const PrivacyLossPmf& b,
                           const PldOptions& opts) {
  if (a.grid_spacing != b.grid_spacing || a.rounding != b.rounding) {
    throw ConfigError("cannot compose losses on mismatched grids");
  }
  PrivacyLossPmf out;
  out.grid_spacing = a.grid_spacing;
  out.rounding = a.rounding;
  out.min_index = a.min_index + b.min_index;
  out.masses = FftConvolve(a.masses, b.masses);
  out.infinity_mass = 1.0 - (1.0 - a.infinity_mass) * (1.0 - b.infinity_mass);
  TruncateTails(out, opts);
  return out;
}

PrivacyLossPmf ComposePmf(const PrivacyLossPmf& base, int num_steps,
                          const PldOptions& opts) {
  PrivacyLossPmf acc;
  bool has_acc = false;
  PrivacyLossPmf sq = base;
  int rem = num_steps;
  while (rem > 0) {
    if (rem & 1) {
      acc = has_acc ? ConvolvePmf(acc, sq, opts) : sq;
      has_acc = true;
    }
    rem >>= 1;
    if (rem > 0) sq = ConvolvePmf(sq, sq, opts);
  }
  return acc;
}

// delta(j * grid) for all j in O(1) after an O(n) suffix pass:
//   delta(eps) = inf + sum_{loss > eps} m (1 - e^{eps - loss})
//              = inf + S[a] - e^{(j - i_a) grid} E[a]
// with S the plain suffix sum and E the suffix sum discounted by e^{-grid}
// per cell.
class DeltaCurve {
 public:
  explicit DeltaCurve(const PrivacyLossPmf& p) : p_(&p) {
    const std::size_t n = p.masses.size();
    s_.assign(n + 1, 0.0);
    e_.assign(n + 1, 0.0);
    const double decay = std::exp(-p.grid_spacing);
    for (std::size_t i = n; i-- > 0;) {
      s_[i] = s_[i + 1] + p.masses[i];
      e_[i] = p.masses[i] + decay * e_[i + 1];
    }
  }

  double DeltaAt(std::int64_t j) const {
    const std::int64_t n = static_cast<std::int64_t>(p_->masses.size());
    std::int64_t a = j + 1 - p_->min_index;  // first cell with loss > j*grid
    if (a < 0) a = 0;
    if (a >= n) return p_->infinity_mass;
    double shift = static_cast<double>(j - (a + p_->min_index)) * p_->grid_spacing;
    return p_->infinity_mass + s_[static_cast<std::size_t>(a)] -
           std::exp(shift) * e_[static_cast<std::size_t>(a)];
  }

  std::int64_t MaxIndex() const { return p_->MaxIndex(); }

 private:
  const PrivacyLossPmf* p_;
  std::vector<double> s_, e_;
};

double DeltaForEpsilonPmf(const PrivacyLossPmf& p, double epsilon) {
  double delta = p.infinity_mass;
  for (std::size_t i = 0; i < p.masses.size(); ++i) {
    double loss = static_cast<double>(p.min_index + static_cast<std::int64_t>(i)) *
                  p.grid_spacing;
    if (loss <= epsilon) continue;
    delta += p.masses[i] * -std::expm1(epsilon - loss);
  }
  return delta;
}

std::optional<double> TryEpsilonForDelta(const PrivacyLossDistribution& pld,
                                         double delta) {
  if (delta <= MaxInfinity(pld)) return std::nullopt;

  std::vector<DeltaCurve> curves;
  curves.emplace_back(pld.remove_adjacency);
  if (pld.add_adjacency) curves.emplace_back(*pld.add_adjacency);

  auto delta_at = [&](std::int64_t j) {
    double d = 0.0;
    for (const DeltaCurve& c : curves) d = std::max(d, c.DeltaAt(j));
    return d;
  };

  if (delta_at(0) <= delta) return 0.0;
  std::int64_t hi = 1;
  for (const DeltaCurve& c : curves) hi = std::max(hi, c.MaxIndex());
  if (delta_at(hi) > delta) return std::nullopt;  // only infinity_mass left

  // delta_at is nonincreasing; find the smallest j with delta_at(j) <= delta.
  std::int64_t lo = 0;  // delta_at(lo) > delta
  while (hi - lo > 1) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (delta_at(mid) <= delta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return static_cast<double>(hi) * pld.remove_adjacency.grid_spacing;
}

struct MechanismShape {
  double q;
  int k;
};

bool SigmaSatisfies(double sigma, const MechanismShape& mech, int num_steps,
                    double epsilon, double delta, const PldOptions& opts) {
  FailFast ff{epsilon, delta};
  auto single = BuildPld(sigma, mech.q, mech.k, opts, &ff);
  if (!single) return false;

  // Infinity mass composes as 1-(1-m)^T regardless of the grid; reject early
  // when it alone exceeds delta.
  double m = MaxInfinity(*single);
  double inf_t = -std::expm1(static_cast<double>(num_steps) * std::log1p(-m));
  if (inf_t >= delta) return false;

  // Composition never shrinks the hockey stick, so a single step already
  // over budget rules sigma out without the FFT work.
  if (DeltaForEpsilon(*single, epsilon) > delta) return false;

  PrivacyLossDistribution composed = Compose(*single, num_steps, opts);
  auto eps = TryEpsilonForDelta(composed, delta);
  return eps.has_value() && *eps <= epsilon;
}

double CalibrateSigma(const MechanismShape& mech, double epsilon, double delta,
                      int num_steps, const PldOptions& opts) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw ConfigError("target epsilon must be positive and finite");
  }
  if (!(delta > 0) || delta >= 1.0) {
    throw ConfigError("target delta must lie in (0, 1)");
  }
  if (num_steps < 1) throw ConfigError("num_steps must be at least 1");

  auto ok = [&](double s) {
    return SigmaSatisfies(s, mech, num_steps, epsilon, delta, opts);
  };

  double lo = 1e-2, hi = 1e2;
  if (ok(lo)) {
    bool lo_ok = true;
    for (int i = 0; i < 200 && lo_ok; ++i) {
      hi = lo;
      lo *= 0.5;
      // Every evaluable sigma on the way down satisfied the target; once the
      // support leaves the representable range the hunt is hopeless, which
      // is the same no-bracket condition as exhausting the halvings.
      try {
        lo_ok = ok(lo);
      } catch (const NumericError&) {
        lo_ok = true;
        break;
      }
    }
    if (lo_ok) {
      throw CalibrationError(
          "noise calibration could not bracket: target met by arbitrarily "
          "small sigma");
    }
  } else {
    bool hi_ok = ok(hi);
    for (int i = 0; i < 200 && !hi_ok; ++i) {
      lo = hi;
      hi *= 2.0;
      hi_ok = ok(hi);
    }
    if (!hi_ok) {
      throw CalibrationError(
          "noise calibration could not bracket: target unreachable after 200 "
          "doublings");
    }
  }

  while (hi - lo > 1e-3 * hi) {
    double mid = 0.5 * (lo + hi);
    if (ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

void ValidateSampling(double num_records, double batch) {
  if (!(num_records > 0) || !std::isfinite(num_records)) {
    throw ConfigError("num_records must be positive");
  }
  if (!(batch > 0) || batch > num_records) {
    throw ConfigError("batch must lie in (0, num_records]");
  }
}

}  // namespace

double PrivacyLossPmf::TotalMass() const {
  return std::accumulate(masses.begin(), masses.end(), 0.0) + infinity_mass;
}

PrivacyLossDistribution GaussianPld(double sigma, double q,
                                    const PldOptions& opts) {
  return *BuildPld(sigma, q, 1, opts, nullptr);
}

PrivacyLossDistribution MixtureOfGaussiansPld(double sigma, double q, int k,
                                              const PldOptions& opts) {
  return *BuildPld(sigma, q, k, opts, nullptr);
}

PrivacyLossDistribution Compose(const PrivacyLossDistribution& pld,
                                int num_steps, const PldOptions& opts_in) {
  if (num_steps < 1) throw ConfigError("num_steps must be at least 1");
  PldOptions opts = opts_in;
  opts.grid_spacing = pld.remove_adjacency.grid_spacing;
  opts.rounding = pld.remove_adjacency.rounding;
  ValidateOptions(opts);

  PrivacyLossDistribution out;
  out.remove_adjacency = ComposePmf(pld.remove_adjacency, num_steps, opts);
  if (pld.add_adjacency) {
    out.add_adjacency = ComposePmf(*pld.add_adjacency, num_steps, opts);
  }
  return out;
}

double DeltaForEpsilon(const PrivacyLossDistribution& pld, double epsilon) {
  if (!std::isfinite(epsilon)) throw ConfigError("epsilon must be finite");
  double d = DeltaForEpsilonPmf(pld.remove_adjacency, epsilon);
  if (pld.add_adjacency) {
    d = std::max(d, DeltaForEpsilonPmf(*pld.add_adjacency, epsilon));
  }
  return d;
}

double EpsilonForDelta(const PrivacyLossDistribution& pld, double delta) {
  if (!(delta > 0) || delta >= 1.0) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  auto eps = TryEpsilonForDelta(pld, delta);
  if (!eps) {
    throw CalibrationError(
        "unsatisfiable: delta does not exceed the infinity mass " +
        std::to_string(MaxInfinity(pld)));
  }
  return *eps;
}

double CalibrateNoise(double epsilon, double delta, double num_records,
                      double batch, int num_steps, const PldOptions& opts) {
  ValidateSampling(num_records, batch);
  return CalibrateSigma({batch / num_records, 1}, epsilon, delta, num_steps,
                        opts);
}

double CalibrateNoiseGroup(int k, double epsilon, double delta,
                           double num_records, double batch, int num_steps,
                           const PldOptions& opts) {
  ValidateSampling(num_records, batch);
  if (k < 1) throw ConfigError("k must be at least 1");
  return CalibrateSigma({batch / num_records, k}, epsilon, delta, num_steps,
                        opts);
}

double AccountEpsilon(double sigma, double delta, double num_records,
                      double batch, int num_steps, const PldOptions& opts) {
  ValidateSampling(num_records, batch);
  PrivacyLossDistribution pld = GaussianPld(sigma, batch / num_records, opts);
  return EpsilonForDelta(Compose(pld, num_steps), delta);
}

double AccountEpsilonGroup(int k, double sigma, double delta,
                           double num_records, double batch, int num_steps,
                           const PldOptions& opts) {
  ValidateSampling(num_records, batch);
  PrivacyLossDistribution pld =
      MixtureOfGaussiansPld(sigma, batch / num_records, k, opts);
  return EpsilonForDelta(Compose(pld, num_steps), delta);
}

EpsilonDelta NaiveGroupPrivacy(double epsilon, double delta, int k,
                               NaiveGroupForm form) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw ConfigError("epsilon must be positive and finite");
  }
  if (!(delta > 0) || delta >= 1.0) throw ConfigError("delta must lie in (0, 1)");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (k == 1) return {epsilon, delta};

  double log_ratio;
  if (form == NaiveGroupForm::kStandard) {
    log_ratio = LogExpm1(k * epsilon) - LogExpm1(epsilon);
  } else {
    log_ratio = (k * epsilon - 1.0) - LogExpm1(epsilon);
  }
  return {k * epsilon, delta * std::exp(log_ratio)};
}

EpsilonDelta NaiveGroupPrivacyInverse(double user_epsilon, double user_delta,
                                      int k, NaiveGroupForm form) {
  if (!(user_epsilon > 0) || !std::isfinite(user_epsilon)) {
    throw ConfigError("epsilon must be positive and finite");
  }
  if (!(user_delta > 0) || user_delta >= 1.0) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  if (k < 1) throw ConfigError("k must be at least 1");
  if (k == 1) return {user_epsilon, user_delta};

  double eps0 = user_epsilon / k;
  double log_ratio;
  if (form == NaiveGroupForm::kStandard) {
    log_ratio = LogExpm1(k * eps0) - LogExpm1(eps0);
  } else {
    log_ratio = (k * eps0 - 1.0) - LogExpm1(eps0);
  }
  return {eps0, user_delta * std::exp(-log_ratio)};
}

double CalibrateNoiseGroupNaive(int k, double epsilon, double delta,
                                double num_records, double batch,
                                int num_steps, NaiveGroupForm form,
                                const PldOptions& opts) {
  EpsilonDelta record_level = NaiveGroupPrivacyInverse(epsilon, delta, k, form);
  return CalibrateNoise(record_level.epsilon, record_level.delta, num_records,
                        batch, num_steps, opts);
}

std::string ToJson(const AccountingResult& result) {
  nlohmann::ordered_json j;
  j["mechanism"] = result.mechanism;
  j["sigma"] = result.sigma;
  j["epsilon"] = result.epsilon;
  j["delta"] = result.delta;
  j["q"] = result.q;
  j["T"] = result.num_steps;
  j["k"] = result.k;
  j["grid_spacing"] = result.grid_spacing;
  j["rounding"] = result.rounding == Rounding::kPessimistic ? "pessimistic"
                                                            : "optimistic";
  return j.dump();
}

}  // namespace userdp::accounting
