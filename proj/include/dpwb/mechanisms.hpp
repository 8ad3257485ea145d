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

#ifndef DPWB_MECHANISMS_HPP
#define DPWB_MECHANISMS_HPP

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "dpwb/random.hpp"
#include "dpwb/types.hpp"

// Seed-deterministic differentially private noise and selection primitives.
//
// All functions are pure given their RngStream: rerunning with an equal
// stream reproduces the result bit for bit. Where a noiseless tie can occur
// (integer counts, zero noise scale), the lowest candidate index wins.
// Adjacency is add/remove of one record throughout, so one vote moves one
// count by exactly 1.
namespace dpwb::mech {

// Explicit non-release outcomes.
struct Abstain {};
struct Bottom {};

enum class RnmNoise { kLaplace, kGaussian };

// values[i] + N(0, sigma^2), i.i.d.; sigma = 0 returns values unchanged
// without consuming randomness.
Eigen::VectorXd gaussian_noise(const Eigen::Ref<const Eigen::VectorXd>& values,
                               double sigma, RngStream& rng);

// Argmax of counts[i] + noise_i with i.i.d. Laplace(scale) or N(0, scale^2)
// noise. With Laplace noise of scale 1/epsilon this is epsilon-DP for
// sensitivity-1 counting histograms (one record moves one count by one,
// monotonically).
Eigen::Index report_noisy_max(const VoteHistogram& hist, RnmNoise kind,
                              double scale, RngStream& rng);

// Convenience: Laplace report-noisy-max at scale 1/epsilon (epsilon-DP).
Eigen::Index report_noisy_max_laplace(const VoteHistogram& hist,
                                      double epsilon, RngStream& rng);

// Samples candidate r with probability proportional to
// exp(epsilon * score(r) / (2 * sensitivity)), computed with max-score
// subtraction before exponentiation.
Eigen::Index exponential_mechanism(const ScoreVector& scores,
                                   Sensitivity sensitivity, double epsilon,
                                   RngStream& rng);

// Adds i.i.d. Gumbel noise of scale 2*sensitivity/epsilon to every score and
// returns the indices of the k largest noisy scores, in descending noisy
// order. Distributionally identical to selecting k candidates one by one
// with the exponential mechanism at epsilon per peel; the k = 1 case is
// exactly the exponential mechanism.
std::vector<Eigen::Index> gumbel_topk(const ScoreVector& scores,
                                      Sensitivity sensitivity, double epsilon,
                                      int k, RngStream& rng);

// Propose-test-release top-k: noisily tests the gap between the k-th and
// (k+1)-th largest counts and releases the exact top-k indices (count
// descending, index ascending) only when the test passes, else abstains.
//
// Release condition (fixed convention of this library):
//   gap + Laplace(2/epsilon) - 2*ln(1/(2*delta))/epsilon > 2
// The delta failure mass is surfaced as Abstain rather than silently
// released. Requires delta > 0 and k < domain size.
std::variant<std::vector<Eigen::Index>, Abstain> ptr_topk(
    const VoteHistogram& hist, int k, const PrivacyBudget& budget,
    RngStream& rng);

// Noisy argmax restricted to the kbar highest counts, with a bottom outcome.
// Each restricted count gets Laplace(2/epsilon) noise; the winner is
// released only if it clears a noisy threshold of
//   count_(kbar+1) + 1 + 2*ln(1/delta)/epsilon + Laplace(2/epsilon),
// where count_(kbar+1) is 0 when kbar equals the domain size. These
// constants are this library's fixed convention. Requires delta > 0.
std::variant<Eigen::Index, Bottom> limited_domain_max(
    const VoteHistogram& hist, int kbar, const PrivacyBudget& budget,
    RngStream& rng);

// Gaussian-noise argmax over a vote histogram: argmax counts[i] + N(0,
// sigma^2). The aggregation primitive behind teacher-ensemble labeling.
Eigen::Index gnmax(const VoteHistogram& hist, double sigma, RngStream& rng);

// Noiseless reference: argmax with ties broken by lowest index. The limit of
// every selection mechanism above as its noise scale goes to zero.
Eigen::Index argmax_lowest_index(const Eigen::Ref<const Eigen::VectorXd>& v);

// Candidate indices ordered by (count descending, index ascending).
std::vector<Eigen::Index> rank_by_count(const CountVector& counts);

}  // namespace dpwb::mech

#endif  // DPWB_MECHANISMS_HPP
