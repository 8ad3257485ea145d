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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dpwb/mechanisms.hpp"
#include "test_util.hpp"

using namespace dpwb;
using namespace dpwb::mech;

namespace {

VoteHistogram hist_of(std::initializer_list<std::int64_t> counts) {
  const Eigen::Index n = static_cast<Eigen::Index>(counts.size());
  CountVector c(n);
  Eigen::Index i = 0;
  for (std::int64_t v : counts) c[i++] = v;
  return VoteHistogram(CandidateDomain(n), std::move(c));
}

ScoreVector scores_of(std::initializer_list<double> scores) {
  const Eigen::Index n = static_cast<Eigen::Index>(scores.size());
  Eigen::VectorXd s(n);
  Eigen::Index i = 0;
  for (double v : scores) s[i++] = v;
  return ScoreVector(CandidateDomain(n), std::move(s));
}

}  // namespace

TEST_CASE("gaussian_noise: sigma = 0 is the identity") {
  RngStream rng(1);
  Eigen::VectorXd v(2);
  v << 3.0, 7.0;
  const Eigen::VectorXd out = gaussian_noise(v, 0.0, rng);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 7.0);
}

TEST_CASE("gaussian_noise: moments at sigma = 1 over 1e6 samples") {
  RngStream rng(2);
  Eigen::VectorXd zero(1);
  zero << 0.0;
  double sum = 0.0, sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double x = gaussian_noise(zero, 1.0, rng)[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("gaussian_noise: continuous noise never returns the input") {
  RngStream rng(3);
  Eigen::VectorXd v(2);
  v << 1.0, 1.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd out = gaussian_noise(v, 5.0, rng);
    CHECK(out[0] != 1.0);
    CHECK(out[1] != 1.0);
  }
}

TEST_CASE("gaussian_noise: rejects non-finite input") {
  RngStream rng(4);
  Eigen::VectorXd v(1);
  v << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gaussian_noise(v, 1.0, rng), InvalidInputError);
  Eigen::VectorXd w(1);
  w << 1.0;
  CHECK_THROWS_AS(gaussian_noise(w, -1.0, rng), InvalidInputError);
}

TEST_CASE("report_noisy_max: dominant count wins at tight scale") {
  const VoteHistogram hist = hist_of({0, 9999, 0});
  RngStream rng(5);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    if (report_noisy_max_laplace(hist, 10.0, rng) == 1) ++hits;
  }
  CHECK(hits >= 9990);
}

TEST_CASE("report_noisy_max: tied counts split evenly") {
  const VoteHistogram hist = hist_of({5, 5});
  RngStream rng(6);
  int zero = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (report_noisy_max(hist, RnmNoise::kLaplace, 1.0, rng) == 0) ++zero;
  }
  CHECK(std::abs(zero / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("report_noisy_max: single candidate always wins") {
  const VoteHistogram hist = hist_of({7});
  RngStream rng(7);
  for (int i = 0; i < 100; ++i) {
    CHECK(report_noisy_max(hist, RnmNoise::kGaussian, 3.0, rng) == 0);
  }
}

TEST_CASE("report_noisy_max: zero or negative scale is invalid") {
  const VoteHistogram hist = hist_of({1, 2});
  RngStream rng(8);
  CHECK_THROWS_AS(report_noisy_max(hist, RnmNoise::kLaplace, 0.0, rng),
                  InvalidInputError);
  CHECK_THROWS_AS(report_noisy_max_laplace(hist, 0.0, rng), InvalidInputError);
}

TEST_CASE("empty candidate domains cannot be constructed") {
  CHECK_THROWS_AS(CandidateDomain(0), InvalidInputError);
}

TEST_CASE("exponential_mechanism: uniform scores give uniform selection") {
  const ScoreVector s = scores_of({2.5, 2.5, 2.5});
  RngStream rng(9);
  const Eigen::VectorXd freq = dpwb_test::empirical_distribution(
      [&] { return exponential_mechanism(s, Sensitivity(1.0), 3.0, rng); }, 3,
      100000);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(freq[i] - 1.0 / 3.0) < 0.01);
  }
}

TEST_CASE("exponential_mechanism: closed form at eps = 2 ln 3") {
  const ScoreVector s = scores_of({1.0, 0.0});
  RngStream rng(10);
  const double eps = 2.0 * std::log(3.0);
  int zero = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (exponential_mechanism(s, Sensitivity(1.0), eps, rng) == 0) ++zero;
  }
  // P(0) = e^{eps/2} / (e^{eps/2} + 1) = 3/4.
  CHECK(std::abs(zero / static_cast<double>(n) - 0.75) < 0.01);
}

TEST_CASE("exponential_mechanism: extreme score gap is decisive") {
  const ScoreVector s = scores_of({1000.0, 0.0});
  RngStream rng(11);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    if (exponential_mechanism(s, Sensitivity(1.0), 8.0, rng) == 0) ++hits;
  }
  CHECK(hits == 10000);  // exact formula gives P(1) < 1e-17
}

TEST_CASE("gumbel_topk: k = domain size returns a permutation") {
  const ScoreVector s = scores_of({0.0, 5.0, 2.0, 2.0});
  RngStream rng(12);
  for (int i = 0; i < 50; ++i) {
    const std::vector<Eigen::Index> out =
        gumbel_topk(s, Sensitivity(1.0), 1.0, 4, rng);
    std::set<Eigen::Index> unique(out.begin(), out.end());
    CHECK(out.size() == 4);
    CHECK(unique.size() == 4);
  }
}

TEST_CASE("gumbel_topk: noiseless limit returns the true top-k in order") {
  const ScoreVector s = scores_of({9.0, 5.0, 1.0});
  RngStream rng(13);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::vector<Eigen::Index> out =
        gumbel_topk(s, Sensitivity(1.0), 1e6, 2, rng);
    if (out.size() == 2 && out[0] == 0 && out[1] == 1) ++hits;
  }
  CHECK(hits >= 9990);
}

TEST_CASE("gumbel_topk: k = 1 matches the exponential mechanism") {
  const ScoreVector s = scores_of({1.0, 0.0});
  RngStream em_rng(14);
  RngStream gumbel_rng(14);
  const int n = 100000;
  Eigen::VectorXd em_freq = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd gb_freq = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    em_freq[exponential_mechanism(s, Sensitivity(1.0), 1.5, em_rng)] += 1.0;
    gb_freq[gumbel_topk(s, Sensitivity(1.0), 1.5, 1, gumbel_rng)[0]] += 1.0;
  }
  em_freq /= n;
  gb_freq /= n;
  CHECK(dpwb_test::total_variation(em_freq, gb_freq) <= 0.01);
}

TEST_CASE("gumbel_topk: k outside [1, domain size] is invalid") {
  const ScoreVector s = scores_of({1.0, 0.0});
  RngStream rng(15);
  CHECK_THROWS_AS(gumbel_topk(s, Sensitivity(1.0), 1.0, 3, rng),
                  InvalidInputError);
  CHECK_THROWS_AS(gumbel_topk(s, Sensitivity(1.0), 1.0, 0, rng),
                  InvalidInputError);
}

TEST_CASE("ptr_topk: overwhelming gap releases the exact top-k") {
  const VoteHistogram hist = hist_of({100, 1, 1, 1});
  const PrivacyBudget budget(1.0, 1e-5);
  RngStream rng(16);
  int released = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto out = ptr_topk(hist, 1, budget, rng);
    if (const auto* idx = std::get_if<std::vector<Eigen::Index>>(&out)) {
      REQUIRE(idx->size() == 1);
      CHECK((*idx)[0] == 0);
      ++released;
    }
  }
  CHECK(released >= 9900);
}

TEST_CASE("ptr_topk: zero gap abstains with high probability") {
  const VoteHistogram hist = hist_of({5, 5, 5});
  const PrivacyBudget budget(1.0, 1e-5);
  RngStream rng(17);
  int abstained = 0;
  for (int i = 0; i < 10000; ++i) {
    if (std::holds_alternative<Abstain>(ptr_topk(hist, 1, budget, rng))) {
      ++abstained;
    }
  }
  CHECK(abstained >= 9900);
}

TEST_CASE("ptr_topk: noiseless limit with gap above the test threshold") {
  const VoteHistogram hist = hist_of({7, 0});
  const PrivacyBudget budget(1e9, 1e-5);
  RngStream rng(18);
  for (int i = 0; i < 1000; ++i) {
    const auto out = ptr_topk(hist, 1, budget, rng);
    REQUIRE(std::holds_alternative<std::vector<Eigen::Index>>(out));
    CHECK(std::get<std::vector<Eigen::Index>>(out)[0] == 0);
  }
}

TEST_CASE("ptr_topk: k must leave a (k+1)-th candidate, delta must be > 0") {
  const VoteHistogram hist = hist_of({3, 2});
  RngStream rng(19);
  CHECK_THROWS_AS(ptr_topk(hist, 2, PrivacyBudget(1.0, 1e-5), rng),
                  InvalidInputError);
  CHECK_THROWS_AS(ptr_topk(hist, 1, PrivacyBudget(1.0, 0.0), rng),
                  InvalidInputError);
}

TEST_CASE("limited_domain_max: dominant candidate is released") {
  const VoteHistogram hist = hist_of({50, 0, 0, 0});
  const PrivacyBudget budget(8.0, 1e-5);
  RngStream rng(20);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto out = limited_domain_max(hist, 1, budget, rng);
    if (const auto* idx = std::get_if<Eigen::Index>(&out)) {
      if (*idx == 0) ++hits;
    }
  }
  CHECK(hits >= 9900);
}

TEST_CASE("limited_domain_max: flat histogram hits bottom") {
  const VoteHistogram hist = hist_of({4, 4, 4, 4});
  const PrivacyBudget budget(1.0, 1e-5);
  RngStream rng(21);
  int bottom = 0;
  for (int i = 0; i < 10000; ++i) {
    if (std::holds_alternative<Bottom>(
            limited_domain_max(hist, 1, budget, rng))) {
      ++bottom;
    }
  }
  CHECK(bottom >= 9000);
}

TEST_CASE("limited_domain_max: single dominant candidate, kbar = size") {
  const VoteHistogram hist = hist_of({10});
  const PrivacyBudget budget(8.0, 1e-5);
  RngStream rng(22);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto out = limited_domain_max(hist, 1, budget, rng);
    if (const auto* idx = std::get_if<Eigen::Index>(&out)) {
      if (*idx == 0) ++hits;
    }
  }
  CHECK(hits >= 9990);
  CHECK_THROWS_AS(limited_domain_max(hist, 2, budget, rng), InvalidInputError);
}

TEST_CASE("gnmax: dominant, tied, and single-candidate histograms") {
  RngStream rng(23);
  const VoteHistogram dominant = hist_of({200, 0});
  for (int i = 0; i < 10000; ++i) {
    CHECK(gnmax(dominant, 1.0, rng) == 0);
  }

  const VoteHistogram tied = hist_of({3, 3});
  int zero = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (gnmax(tied, 2.0, rng) == 0) ++zero;
  }
  CHECK(std::abs(zero / static_cast<double>(n) - 0.5) < 0.02);

  const VoteHistogram single = hist_of({1});
  CHECK(gnmax(single, 100.0, rng) == 0);
  CHECK_THROWS_AS(gnmax(single, 0.0, rng), InvalidInputError);
}

TEST_CASE("noiseless limits collapse to the true argmax") {
  const VoteHistogram hist = hist_of({2, 9, 4});
  RngStream rng(24);
  for (int i = 0; i < 200; ++i) {
    CHECK(report_noisy_max(hist, RnmNoise::kLaplace, 1e-12, rng) == 1);
    CHECK(gnmax(hist, 1e-9, rng) == 1);
  }
  CHECK(argmax_lowest_index(hist.counts_as_reals()) == 1);

  // Exact-zero noise path: ties go to the lowest index.
  Eigen::VectorXd tied(3);
  tied << 5.0, 5.0, 1.0;
  CHECK(argmax_lowest_index(tied) == 0);
}

TEST_CASE("every mechanism replays identically on an equal stream") {
  const VoteHistogram hist = hist_of({4, 7, 1, 3});
  const ScoreVector s = scores_of({0.5, 2.0, -1.0, 0.0});
  const PrivacyBudget budget(1.0, 1e-5);
  Eigen::VectorXd values(3);
  values << 0.0, 1.0, -2.0;

  for (std::uint64_t seed : {1ULL, 99ULL, 31337ULL}) {
    RngStream a(seed);
    RngStream b(seed);
    CHECK(gaussian_noise(values, 2.0, a) == gaussian_noise(values, 2.0, b));
    CHECK(report_noisy_max(hist, RnmNoise::kLaplace, 0.7, a) ==
          report_noisy_max(hist, RnmNoise::kLaplace, 0.7, b));
    CHECK(exponential_mechanism(s, Sensitivity(1.0), 2.0, a) ==
          exponential_mechanism(s, Sensitivity(1.0), 2.0, b));
    CHECK(gumbel_topk(s, Sensitivity(1.0), 2.0, 3, a) ==
          gumbel_topk(s, Sensitivity(1.0), 2.0, 3, b));
    CHECK(ptr_topk(hist, 2, budget, a).index() ==
          ptr_topk(hist, 2, budget, b).index());
    CHECK(gnmax(hist, 1.5, a) == gnmax(hist, 1.5, b));
  }
}
