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

#ifndef USERDP_RNG_H_
#define USERDP_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace userdp {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t HashName(std::string_view name) {
  // FNV-1a, then one mixing round so short names do not collide cheaply.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return SplitMix64(h);
}

// Independent generator for (seed, purpose, step). Streams are derived by
// mixing, not by consuming a shared generator, so the draws one purpose sees
// do not depend on whether any other purpose was sampled. Two mechanisms
// that sample the same purpose at the same step see identical draws.
inline std::mt19937_64 SubStream(std::uint64_t seed, std::string_view purpose,
                                 std::uint64_t step = 0) {
  std::uint64_t s = SplitMix64(seed ^ SplitMix64(HashName(purpose) + step));
  return std::mt19937_64(s);
}

// Laplace(0, scale) by inverse CDF; scale == 0 gives exactly 0.
inline double SampleLaplace(double scale, std::mt19937_64& rng) {
  if (scale == 0.0) return 0.0;
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  double u = unif(rng);
  double mag = -scale * std::log(1.0 - 2.0 * std::abs(u));
  return u < 0 ? -mag : mag;
}

}  // namespace userdp

#endif  // USERDP_RNG_H_
