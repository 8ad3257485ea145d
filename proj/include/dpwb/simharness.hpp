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

#ifndef DPWB_SIMHARNESS_HPP
#define DPWB_SIMHARNESS_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dpwb/aggregation.hpp"
#include "dpwb/random.hpp"
#include "dpwb/types.hpp"

// Simulated-teacher scenario runner for privacy-utility trade-off curves,
// plus the exact-distribution and DP-ratio oracles used to validate the
// mechanisms on small domains.
namespace dpwb::sim {

enum class TeacherErrorModel { kUniformOverWrong, kConfusionMatrix };

// A teacher that answers a query correctly with probability `accuracy` and
// otherwise errs uniformly over the wrong classes, or according to a
// row-stochastic confusion matrix.
struct SimTeacherModel {
  double accuracy = 1.0;
  Eigen::Index n_classes = 2;
  TeacherErrorModel error_model = TeacherErrorModel::kUniformOverWrong;
  Eigen::MatrixXd confusion;  // K x K, rows sum to 1; only for the matrix model

  void validate() const;
  Eigen::Index answer(Eigen::Index truth, RngStream& rng) const;
};

enum class SimMechanism {
  kGnMax,        // classification: Gaussian-noisy argmax, sigma from epsilon
  kRnmLaplace,   // classification: Laplace noisy argmax at scale 1/epsilon
  kFewShotGen,   // generation: per-token Gumbel selection
  kKsaGumbel,    // generation: keyword top-k via Gumbel noise
  kKsaPtr,       // generation: keyword top-k via propose-test-release
};

enum class SimTask { kClassification, kGeneration };

struct ScenarioConfig {
  SimTask task = SimTask::kClassification;
  SimMechanism mechanism = SimMechanism::kGnMax;
  int n_teachers = 25;
  int n_queries = 50;
  int trials = 20;
  double delta = 1e-5;
  // Per-query privacy budgets; the grid must be sorted ascending. +infinity
  // entries evaluate the noiseless limit (exact argmax, lowest-index ties).
  std::vector<double> epsilon_grid{0.1, 0.3, 0.7, 1.0, 3.0, 8.0};
  SimTeacherModel teacher;

  // Generation shape parameters.
  int t_max = 10;             // tokens per generated sequence
  int vocab_size = 50;        // simulated token domain
  int keywords_per_query = 3; // ground-truth keywords per query
  int keyword_pool = 30;      // distinct keywords teachers can emit
  int select_k = 0;           // keywords released per query; 0 = keywords_per_query
  int m_subsets = 20;         // disjoint private subsets (generation fan-out)
  int mn_shots = 80;          // recorded ensemble shape; not used in simulation

  void validate() const;
};

struct TradeoffPoint {
  double epsilon = 0.0;
  double utility_mean = 0.0;
  double utility_std = 0.0;
  int trials = 0;
  double abstain_rate = 0.0;
  // Per-trial utilities (trial order); not part of the CSV schema but kept
  // for paired-seed comparisons across grid points.
  std::vector<double> per_trial;
};

struct TradeoffCurve {
  std::vector<TradeoffPoint> points;
};

// Classification trade-off: utility is the fraction of queries whose private
// label equals the ground truth. GNMax noise is derived from the per-query
// budget via the accountant (unit-sensitivity Gaussian RDP converted at the
// scenario delta); RNM uses Laplace scale 1/epsilon. Teacher votes are
// paired across grid points (identical votes, only the noise differs), so
// curves are comparable point to point.
TradeoffCurve simulate_classification(const ScenarioConfig& scenario,
                                      const RngStream& rng, int threads = 1);

// Generation trade-off: utility is the token-level exact-match rate against
// the simulated ground-truth sequence (FewShotGen) or the keyword recall of
// the released set (KSA). The grid epsilon is the per-query budget; for
// FewShotGen it is split evenly over t_max tokens. PTR abstentions score 0
// and are reported through abstain_rate.
TradeoffCurve simulate_generation(const ScenarioConfig& scenario,
                                  const RngStream& rng, int threads = 1);

// Exact output distribution of a selection mechanism on a small domain.
struct MechanismSpec {
  enum class Kind { kExponential, kGumbelTop1, kRnmLaplace, kGnMax };
  Kind kind = Kind::kExponential;
  double epsilon = 1.0;      // exponential / Gumbel
  double sensitivity = 1.0;  // exponential / Gumbel
  double scale = 1.0;        // Laplace noise scale
  double sigma = 1.0;        // Gaussian noise stddev
};

// Probability that each candidate wins, for domains of size <= 6. The
// exponential mechanism (and Gumbel top-1, its distributional twin) is
// evaluated in closed form; Laplace and Gaussian noisy argmax by 1-D
// quadrature of P(candidate i's noisy count beats the rest) with absolute
// error well below 1e-6. Probabilities sum to 1 within 1e-6.
Eigen::VectorXd exact_mechanism_distribution(
    const MechanismSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& scores);

// Log-probabilities of the same distribution, accurate in relative terms
// even for very unlikely candidates (used by the DP ratio audit).
Eigen::VectorXd exact_mechanism_log_distribution(
    const MechanismSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& scores);

// Exhaustive DP audit: enumerates every neighbor obtained by adding one
// vote to one candidate, computes exact output distributions on both sides,
// and returns the largest |ln P(D, i) / P(D', i)| over neighbors and
// outcomes. A pure epsilon-DP mechanism must stay <= epsilon (+ numerical
// slack). Restricted to domains <= 6 and counts <= 20.
double dp_ratio_audit(const MechanismSpec& spec, const VoteHistogram& hist);

// Exact accuracy of the noiseless majority vote with lowest-index
// tie-breaking, averaged over a uniformly random ground-truth class, for
// i.i.d. teachers that answer correctly with probability `accuracy` and err
// uniformly otherwise. Restricted to <= 6 classes and <= 25 teachers.
double exact_majority_vote_accuracy(int n_teachers, int n_classes,
                                    double accuracy);

// Simulated classification ensemble over fixed ground truths, answering
// deterministically per (query, teacher) from the given stream.
agg::ClassificationEnsemble make_classification_ensemble(
    const SimTeacherModel& model, int n_teachers,
    std::vector<Eigen::Index> truths, const RngStream& rng);

// Mock wire record for one teacher answer, e.g.
//   {"query": 3, "teacher": 7, "answer": 1}
// This is the serialization contract for ensemble transcripts.
std::string ensemble_transcript_json(const agg::ClassificationEnsemble& e,
                                     int n_queries);

}  // namespace dpwb::sim

#endif  // DPWB_SIMHARNESS_HPP
