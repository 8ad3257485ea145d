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

#include <nlohmann/json.hpp>

#include "dpwb/mechanisms.hpp"
#include "dpwb/simharness.hpp"
#include "test_util.hpp"

using namespace dpwb;
using namespace dpwb::sim;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

VoteHistogram hist_of(std::initializer_list<std::int64_t> counts) {
  const Eigen::Index n = static_cast<Eigen::Index>(counts.size());
  CountVector c(n);
  Eigen::Index i = 0;
  for (std::int64_t v : counts) c[i++] = v;
  return VoteHistogram(CandidateDomain(n), std::move(c));
}

MechanismSpec em_spec(double eps) {
  MechanismSpec spec;
  spec.kind = MechanismSpec::Kind::kExponential;
  spec.epsilon = eps;
  spec.sensitivity = 1.0;
  return spec;
}

MechanismSpec rnm_spec(double scale) {
  MechanismSpec spec;
  spec.kind = MechanismSpec::Kind::kRnmLaplace;
  spec.scale = scale;
  return spec;
}

MechanismSpec gnmax_spec(double sigma) {
  MechanismSpec spec;
  spec.kind = MechanismSpec::Kind::kGnMax;
  spec.sigma = sigma;
  return spec;
}

ScenarioConfig default_classification() {
  ScenarioConfig s;
  s.task = SimTask::kClassification;
  s.mechanism = SimMechanism::kGnMax;
  s.n_teachers = 25;
  s.n_queries = 40;
  s.trials = 10;
  s.teacher.accuracy = 0.9;
  s.teacher.n_classes = 4;
  return s;
}

}  // namespace

TEST_CASE("exact distribution: exponential mechanism closed forms") {
  const Eigen::VectorXd uniform =
      exact_mechanism_distribution(em_spec(5.0), vec({2.0, 2.0, 2.0}));
  for (int i = 0; i < 3; ++i) {
    CHECK(uniform[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  const Eigen::VectorXd spot = exact_mechanism_distribution(
      em_spec(2.0 * std::log(3.0)), vec({1.0, 0.0}));
  CHECK(spot[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(spot[1] == doctest::Approx(0.25).epsilon(1e-12));

  MechanismSpec gumbel = em_spec(2.0 * std::log(3.0));
  gumbel.kind = MechanismSpec::Kind::kGumbelTop1;
  const Eigen::VectorXd same =
      exact_mechanism_distribution(gumbel, vec({1.0, 0.0}));
  CHECK(same[0] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("exact distribution: two-candidate noisy argmax closed forms") {
  // Laplace: the trailing candidate wins iff the noise difference exceeds
  // the gap d, with P = (2 + d/b) e^{-d/b} / 4.
  const Eigen::VectorXd lap =
      exact_mechanism_distribution(rnm_spec(1.0), vec({3.0, 1.0}));
  CHECK(lap[1] == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
  CHECK(lap[0] == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-9));

  const Eigen::VectorXd lap2 =
      exact_mechanism_distribution(rnm_spec(2.0), vec({7.0, 2.0}));
  CHECK(lap2[1] ==
        doctest::Approx(0.25 * 4.5 * std::exp(-2.5)).epsilon(1e-9));

  // Gaussian: the noise difference is N(0, 2 sigma^2).
  const Eigen::VectorXd gauss =
      exact_mechanism_distribution(gnmax_spec(1.0), vec({3.0, 1.0}));
  const double expected = 0.5 * std::erfc(1.0);  // Phi(-sqrt(2))
  CHECK(gauss[1] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("exact distribution: symmetry and normalization") {
  const Eigen::VectorXd tied =
      exact_mechanism_distribution(rnm_spec(0.5), vec({5.0, 5.0}));
  CHECK(tied[0] == doctest::Approx(0.5).epsilon(1e-9));

  const Eigen::VectorXd gauss_tied =
      exact_mechanism_distribution(gnmax_spec(2.0), vec({3.0, 3.0, 3.0}));
  for (int i = 0; i < 3; ++i) {
    CHECK(gauss_tied[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }

  const std::vector<Eigen::VectorXd> fixtures = {
      vec({0.0, 20.0}), vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}),
      vec({10.0, 0.0, 5.0}), vec({2.0, 2.0, 1.0, 0.0})};
  for (const Eigen::VectorXd& counts : fixtures) {
    for (double scale : {0.5, 1.0, 3.0}) {
      CHECK(exact_mechanism_distribution(rnm_spec(scale), counts).sum() ==
            doctest::Approx(1.0).epsilon(1e-6));
      CHECK(exact_mechanism_distribution(gnmax_spec(scale), counts).sum() ==
            doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("exact distribution: refuses oversized domains") {
  CHECK_THROWS_AS(exact_mechanism_distribution(
                      em_spec(1.0), Eigen::VectorXd::Zero(7)),
                  InvalidInputError);
}

TEST_CASE("sampled frequencies match the exact distribution") {
  const VoteHistogram hist = hist_of({4, 2, 0});
  const Eigen::VectorXd counts = hist.counts_as_reals();
  const int n = 100000;

  RngStream rng(101);
  const Eigen::VectorXd rnm_freq = dpwb_test::empirical_distribution(
      [&] {
        return mech::report_noisy_max(hist, mech::RnmNoise::kLaplace, 1.0,
                                      rng);
      },
      3, n);
  CHECK(dpwb_test::total_variation(
            rnm_freq, exact_mechanism_distribution(rnm_spec(1.0), counts)) <=
        0.02);

  RngStream rng2(102);
  const Eigen::VectorXd gn_freq = dpwb_test::empirical_distribution(
      [&] { return mech::gnmax(hist, 2.0, rng2); }, 3, n);
  CHECK(dpwb_test::total_variation(
            gn_freq, exact_mechanism_distribution(gnmax_spec(2.0), counts)) <=
        0.02);
}

TEST_CASE("raising a candidate's count never lowers its win probability") {
  const std::vector<Eigen::VectorXd> fixtures = {
      vec({3.0, 1.0}), vec({2.0, 2.0, 2.0}), vec({5.0, 0.0, 3.0, 1.0})};
  const std::vector<MechanismSpec> specs = {em_spec(1.0), rnm_spec(1.0),
                                            gnmax_spec(1.5)};
  for (const Eigen::VectorXd& base : fixtures) {
    for (const MechanismSpec& spec : specs) {
      const Eigen::VectorXd before =
          exact_mechanism_distribution(spec, base);
      for (Eigen::Index i = 0; i < base.size(); ++i) {
        Eigen::VectorXd bumped = base;
        bumped[i] += 1.0;
        const Eigen::VectorXd after =
            exact_mechanism_distribution(spec, bumped);
        CHECK(after[i] >= before[i] - 1e-9);
      }
    }
  }
}

TEST_CASE("dp_ratio_audit stays within the declared epsilon") {
  const std::vector<VoteHistogram> fixtures = {
      hist_of({0, 20}), hist_of({5, 5, 5}), hist_of({7, 3, 0, 1}),
      hist_of({1, 1, 1, 1, 1, 1}), hist_of({20, 11, 4})};
  for (const VoteHistogram& hist : fixtures) {
    for (double eps : {0.5, 1.0, 2.0}) {
      const double em_audit = dp_ratio_audit(em_spec(eps), hist);
      CHECK(em_audit <= eps + 1e-9);
      CHECK(em_audit > 0.0);
      const double rnm_audit = dp_ratio_audit(rnm_spec(1.0 / eps), hist);
      CHECK(rnm_audit <= eps + 1e-9);
      CHECK(rnm_audit > 0.0);
    }
  }
}

TEST_CASE("dp_ratio_audit vanishes as the noise scale explodes") {
  const VoteHistogram hist = hist_of({4, 2, 1});
  CHECK(dp_ratio_audit(rnm_spec(1e6), hist) < 1e-4);
}

TEST_CASE("dp_ratio_audit refuses oversized counts") {
  CHECK_THROWS_AS(dp_ratio_audit(rnm_spec(1.0), hist_of({21, 0})),
                  InvalidInputError);
}

TEST_CASE("exact majority-vote oracle closed forms") {
  CHECK(exact_majority_vote_accuracy(25, 4, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact_majority_vote_accuracy(1, 2, 0.73) ==
        doctest::Approx(0.73).epsilon(1e-12));
  // Two teachers, binary: ties go to class 0, which exactly cancels across
  // the uniformly random truth, leaving accuracy p.
  CHECK(exact_majority_vote_accuracy(2, 2, 0.8) ==
        doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("exact majority-vote oracle agrees with Monte Carlo") {
  const int n_teachers = 5;
  const int n_classes = 3;
  const double p = 0.7;
  SimTeacherModel model;
  model.accuracy = p;
  model.n_classes = n_classes;

  RngStream rng(7);
  const int trials = 100000;
  int correct = 0;
  for (int t = 0; t < trials; ++t) {
    RngStream tr = rng.substream(static_cast<std::uint64_t>(t));
    const Eigen::Index truth = static_cast<Eigen::Index>(
        tr.next_below(static_cast<std::uint64_t>(n_classes)));
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_classes);
    for (int i = 0; i < n_teachers; ++i) {
      RngStream vr = tr.substream(static_cast<std::uint64_t>(i + 1));
      counts[model.answer(truth, vr)] += 1.0;
    }
    if (mech::argmax_lowest_index(counts) == truth) ++correct;
  }
  const double mc = correct / static_cast<double>(trials);
  const double oracle = exact_majority_vote_accuracy(n_teachers, n_classes, p);
  CHECK(std::abs(mc - oracle) < 0.01);
}

TEST_CASE("simulate_classification: perfect teachers are read out at eps 8") {
  ScenarioConfig s = default_classification();
  s.teacher.accuracy = 1.0;
  s.epsilon_grid = {8.0};
  const TradeoffCurve curve = simulate_classification(s, RngStream(11));
  REQUIRE(curve.points.size() == 1);
  CHECK(curve.points[0].utility_mean >= 0.99);
  CHECK(curve.points[0].abstain_rate == 0.0);
}

TEST_CASE("simulate_classification: reproducible and thread-invariant") {
  const ScenarioConfig s = default_classification();
  const TradeoffCurve a = simulate_classification(s, RngStream(5));
  const TradeoffCurve b = simulate_classification(s, RngStream(5));
  const TradeoffCurve c = simulate_classification(s, RngStream(5), 3);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].utility_mean == b.points[i].utility_mean);
    CHECK(a.points[i].utility_std == b.points[i].utility_std);
    CHECK(a.points[i].utility_mean == c.points[i].utility_mean);
  }
  const TradeoffCurve d = simulate_classification(s, RngStream(6));
  bool identical = true;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    identical = identical && a.points[i].utility_mean == d.points[i].utility_mean;
  }
  CHECK_FALSE(identical);
}

TEST_CASE("simulate_classification: noiseless limit matches the oracle") {
  ScenarioConfig s = default_classification();
  s.n_queries = 60;
  s.trials = 30;
  s.epsilon_grid = {8.0, std::numeric_limits<double>::infinity()};
  const TradeoffCurve curve = simulate_classification(s, RngStream(3));
  const double oracle = exact_majority_vote_accuracy(25, 4, 0.9);
  CHECK(std::abs(curve.points.back().utility_mean - oracle) <= 0.01);
}

TEST_CASE("simulate_classification: utility non-decreasing across the grid") {
  ScenarioConfig s = default_classification();
  s.mechanism = SimMechanism::kRnmLaplace;
  s.trials = 20;
  const TradeoffCurve curve = simulate_classification(s, RngStream(17));
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    // Paired teacher votes keep the comparison tight; allow Monte Carlo
    // slack of two standard errors of the paired difference.
    const double se =
        (curve.points[i].utility_std + curve.points[i - 1].utility_std) /
        std::sqrt(static_cast<double>(s.trials));
    CHECK(curve.points[i].utility_mean >=
          curve.points[i - 1].utility_mean - 2.0 * se);
  }
}

TEST_CASE("simulate_generation: deterministic teachers recover everything") {
  ScenarioConfig s;
  s.task = SimTask::kGeneration;
  s.mechanism = SimMechanism::kFewShotGen;
  s.n_teachers = 10;
  s.m_subsets = 10;
  s.n_queries = 10;
  s.trials = 5;
  s.t_max = 8;
  s.teacher.accuracy = 1.0;
  s.epsilon_grid = {8.0};
  const TradeoffCurve curve = simulate_generation(s, RngStream(2));
  CHECK(curve.points[0].utility_mean >= 0.98);

  s.mechanism = SimMechanism::kKsaGumbel;
  const TradeoffCurve ksa = simulate_generation(s, RngStream(2));
  CHECK(ksa.points[0].utility_mean >= 0.98);
}

TEST_CASE("simulate_generation: t_max = 0 yields zero utility") {
  ScenarioConfig s;
  s.task = SimTask::kGeneration;
  s.mechanism = SimMechanism::kFewShotGen;
  s.n_queries = 5;
  s.trials = 3;
  s.t_max = 0;
  s.teacher.accuracy = 1.0;
  const TradeoffCurve curve = simulate_generation(s, RngStream(4));
  for (const TradeoffPoint& p : curve.points) {
    CHECK(p.utility_mean == 0.0);
  }
}

TEST_CASE("simulate_generation: zero-gap PTR abstains nearly always") {
  ScenarioConfig s;
  s.task = SimTask::kGeneration;
  s.mechanism = SimMechanism::kKsaPtr;
  s.n_teachers = 20;
  s.n_queries = 20;
  s.trials = 10;
  s.teacher.accuracy = 1.0;
  s.keywords_per_query = 3;
  s.select_k = 1;  // unanimous keywords tie at the release rank: gap 0
  s.epsilon_grid = {1.0};
  const TradeoffCurve curve = simulate_generation(s, RngStream(6));
  CHECK(curve.points[0].abstain_rate >= 0.99);
}

TEST_CASE("scenario validation rejects malformed configs") {
  ScenarioConfig s = default_classification();
  s.trials = 0;
  CHECK_THROWS_AS(s.validate(), InvalidInputError);
  s = default_classification();
  s.epsilon_grid = {3.0, 1.0};
  CHECK_THROWS_AS(s.validate(), InvalidInputError);
  s = default_classification();
  s.mechanism = SimMechanism::kFewShotGen;
  CHECK_THROWS_AS(s.validate(), InvalidInputError);
}

TEST_CASE("teacher confusion matrices are validated and sampled") {
  SimTeacherModel model;
  model.n_classes = 2;
  model.accuracy = 0.8;
  model.error_model = TeacherErrorModel::kConfusionMatrix;
  model.confusion.resize(2, 2);
  model.confusion << 0.8, 0.2, 0.2, 0.8;
  model.validate();

  RngStream rng(12);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (model.answer(0, rng) == 0) ++hits;
  }
  CHECK(std::abs(hits / static_cast<double>(n) - 0.8) < 0.01);

  model.confusion << 0.9, 0.1, 0.1, 0.9;  // diagonal no longer matches
  CHECK_THROWS_AS(model.validate(), InvalidInputError);
}

TEST_CASE("ensemble transcripts serialize as wire records") {
  SimTeacherModel model;
  model.accuracy = 1.0;
  model.n_classes = 3;
  const agg::ClassificationEnsemble ensemble =
      make_classification_ensemble(model, 4, {2, 0}, RngStream(9));
  const nlohmann::json records =
      nlohmann::json::parse(ensemble_transcript_json(ensemble, 2));
  REQUIRE(records.size() == 8);
  CHECK(records[0]["query"] == 0);
  CHECK(records[0]["teacher"] == 0);
  CHECK(records[0]["answer"] == 2);  // perfect teacher echoes the truth
  CHECK(records[7]["answer"] == 0);
}
