// Copyright 2026 The dpwb Authors
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

#ifndef DPWB_RANDOM_HPP
#define DPWB_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "dpwb/errors.hpp"

namespace dpwb {

// Counter-based seeded random stream.
//
// A stream is identified by a (seed, stream_index) pair. The generator is
// std::mt19937_64 seeded with a SplitMix64-mixed key of that pair, so the
// algorithm is fixed by the C++ standard and the sample sequence is fully
// reproducible for a given library release. Child streams derived with
// substream(i) depend only on (seed, stream_index, i), never on how many
// values the parent has produced, which makes fan-out over trials, queries
// and teachers order-independent and safe to parallelize.
//
// All distribution transforms are implemented here from raw 64-bit draws
// (std::<distribution> types are not seed-stable across standard libraries):
//   uniform:  (x + 0.5) / 2^64, always inside the open interval (0,1)
//   normal:   Box-Muller, two uniforms per variate
//   laplace:  inverse CDF
//   gumbel:   -ln(-ln(u))
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_index = 0)
      : seed_(seed),
        stream_index_(stream_index),
        engine_(derive_key(seed, stream_index)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  // Independent child stream; stable across runs and across parent usage.
  RngStream substream(std::uint64_t index) const {
    return RngStream(derive_key(seed_, stream_index_), index);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double next_open01() {
    return (static_cast<double>(next_u64()) + 0.5) * 0x1.0p-64;
  }

  // N(0, stddev^2); stddev = 0 yields exactly 0 without consuming draws.
  double next_normal(double stddev) {
    if (!(stddev >= 0.0) || !std::isfinite(stddev)) {
      throw InvalidInputError("normal stddev must be finite and >= 0");
    }
    if (stddev == 0.0) return 0.0;
    const double u1 = next_open01();
    const double u2 = next_open01();
    return stddev * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Laplace(0, scale) via inverse CDF.
  double next_laplace(double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw InvalidInputError("laplace scale must be finite and >= 0");
    }
    if (scale == 0.0) return 0.0;
    const double u = next_open01() - 0.5;
    return -scale * (u < 0.0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
  }

  // Standard Gumbel scaled by `scale`: -scale * ln(-ln(u)), u in (0,1).
  double next_gumbel(double scale) {
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw InvalidInputError("gumbel scale must be finite and >= 0");
    }
    if (scale == 0.0) return 0.0;
    return -scale * std::log(-std::log(next_open01()));
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw InvalidInputError("next_below requires n >= 1");
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed ^ 0xD1B54A32D192ED03ULL) ^
                      (0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

}  // namespace dpwb

#endif  // DPWB_RANDOM_HPP
