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

#include "dpwb/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "dpwb/accounting.hpp"
#include "dpwb/errors.hpp"
#include "dpwb/mechanisms.hpp"

namespace dpwb::sim {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLnSqrt2Pi = 0.9189385332046727;
constexpr int kMaxOracleDomain = 6;
constexpr std::int64_t kMaxAuditCount = 20;

// --- standardized noise kernels -------------------------------------------

double laplace_log_density(double s) { return -std::abs(s) - kLn2; }

double laplace_log_cdf(double s) {
  if (s < 0.0) return s - kLn2;
  return std::log1p(-0.5 * std::exp(-s));
}

double normal_log_density(double s) { return -0.5 * s * s - kLnSqrt2Pi; }

double normal_log_cdf(double s) {
  if (s > -36.0) {
    return std::log(0.5 * std::erfc(-s / std::sqrt(2.0)));
  }
  // Far-tail asymptotic expansion; relative error < 1e-6 at the switchover.
  const double s2 = s * s;
  return -0.5 * s2 - std::log(-s) - kLnSqrt2Pi +
         std::log1p(-1.0 / s2 + 3.0 / (s2 * s2));
}

// --- quadrature -------------------------------------------------------------

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double fa, double m, double fm, double b, double fb,
                        double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol,
                          depth - 1) +
         adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol,
                          depth - 1);
}

double integrate_segment(const std::function<double(double)>& f, double a,
                         double b) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = 1e-13 * std::max(1.0, b - a);
  return adaptive_simpson(f, a, fa, m, fm, b, fb, whole, tol, 48);
}

// Log-probability that candidate i's noisy count is the maximum, for i.i.d.
// additive noise described by the (log_density, log_cdf) pair standardized
// to unit scale. Evaluated as
//   P(i) = integral over s of density(s) * prod_j cdf(s + (c_i - c_j)/unit)
// with the integrand max-normalized in log space, so the result keeps full
// relative precision even for extremely unlikely candidates.
Eigen::VectorXd noisy_argmax_log_probs(
    const Eigen::Ref<const Eigen::VectorXd>& counts, double unit, bool laplace) {
  const Eigen::Index n = counts.size();
  const auto log_density = laplace ? laplace_log_density : normal_log_density;
  const auto log_cdf = laplace ? laplace_log_cdf : normal_log_cdf;

  Eigen::VectorXd log_probs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> shifts;  // d_j = (c_i - c_j) / unit
    shifts.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) shifts.push_back((counts[i] - counts[j]) / unit);
    }

    const auto log_g = [&](double s) {
      double v = log_density(s);
      for (double d : shifts) v += log_cdf(s + d);
      return v;
    };

    // Kinks of the piecewise definitions; harmless extra splits for the
    // (analytic) Gaussian kernel.
    std::set<double> cuts{0.0};
    for (double d : shifts) cuts.insert(-d);
    const double lo = *cuts.begin() - 60.0;
    const double hi = *cuts.rbegin() + 60.0;

    // Locate the integrand peak for max-normalization.
    double peak = -std::numeric_limits<double>::infinity();
    constexpr int kScan = 4096;
    for (int k = 0; k <= kScan; ++k) {
      const double s = lo + (hi - lo) * k / kScan;
      peak = std::max(peak, log_g(s));
    }
    for (double c : cuts) peak = std::max(peak, log_g(c));

    const auto normalized = [&](double s) { return std::exp(log_g(s) - peak); };

    std::vector<double> grid(cuts.begin(), cuts.end());
    grid.insert(grid.begin(), lo);
    grid.push_back(hi);
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      if (grid[k + 1] > grid[k]) {
        integral += integrate_segment(normalized, grid[k], grid[k + 1]);
      }
    }
    log_probs[i] = peak + std::log(integral);
  }
  return log_probs;
}

Eigen::VectorXd softmax_log_probs(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

void check_oracle_domain(Eigen::Index n) {
  if (n < 1 || n > kMaxOracleDomain) {
    throw InvalidInputError(
        "exact distribution oracle handles domains of size 1..6");
  }
}

}  // namespace

// --- teacher model ----------------------------------------------------------

void SimTeacherModel::validate() const {
  if (!(accuracy >= 0.0) || !(accuracy <= 1.0)) {
    throw InvalidInputError("teacher accuracy must lie in [0, 1]");
  }
  if (n_classes < 1) throw InvalidInputError("teacher needs >= 1 class");
  if (error_model == TeacherErrorModel::kConfusionMatrix) {
    if (confusion.rows() != n_classes || confusion.cols() != n_classes) {
      throw InvalidInputError("confusion matrix must be K x K");
    }
    if ((confusion.array() < 0.0).any()) {
      throw InvalidInputError("confusion entries must be >= 0");
    }
    for (Eigen::Index r = 0; r < n_classes; ++r) {
      if (std::abs(confusion.row(r).sum() - 1.0) > 1e-9) {
        throw InvalidInputError("confusion rows must sum to 1");
      }
    }
    const double diag_mean = confusion.diagonal().mean();
    if (std::abs(diag_mean - accuracy) > 1e-6) {
      throw InvalidInputError(
          "teacher accuracy must match the confusion diagonal");
    }
  }
}

Eigen::Index SimTeacherModel::answer(Eigen::Index truth,
                                     RngStream& rng) const {
  if (truth < 0 || truth >= n_classes) {
    throw InvalidInputError("truth class out of range");
  }
  if (error_model == TeacherErrorModel::kConfusionMatrix) {
    const double u = rng.next_open01();
    double acc = 0.0;
    for (Eigen::Index c = 0; c < n_classes; ++c) {
      acc += confusion(truth, c);
      if (u < acc) return c;
    }
    return n_classes - 1;
  }
  if (n_classes == 1) return 0;
  if (rng.next_open01() < accuracy) return truth;
  const Eigen::Index wrong = static_cast<Eigen::Index>(
      rng.next_below(static_cast<std::uint64_t>(n_classes - 1)));
  return wrong >= truth ? wrong + 1 : wrong;
}

void ScenarioConfig::validate() const {
  teacher.validate();
  if (n_teachers < 1) throw InvalidInputError("n_teachers must be >= 1");
  if (n_queries < 1) throw InvalidInputError("n_queries must be >= 1");
  if (trials < 1) throw InvalidInputError("trials must be >= 1");
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw InvalidInputError("scenario delta must lie in (0, 1)");
  }
  if (epsilon_grid.empty()) {
    throw InvalidInputError("epsilon_grid must be non-empty");
  }
  double prev = 0.0;
  for (double e : epsilon_grid) {
    if (!(e > prev)) {
      throw InvalidInputError(
          "epsilon_grid must be positive and sorted ascending");
    }
    prev = e;
  }
  const bool classification = task == SimTask::kClassification;
  if (classification) {
    if (mechanism != SimMechanism::kGnMax &&
        mechanism != SimMechanism::kRnmLaplace) {
      throw InvalidInputError(
          "classification scenarios need gnmax or rnm_laplace");
    }
    if (teacher.n_classes < 2) {
      throw InvalidInputError("classification needs >= 2 classes");
    }
  } else {
    if (mechanism == SimMechanism::kGnMax ||
        mechanism == SimMechanism::kRnmLaplace) {
      throw InvalidInputError(
          "generation scenarios need fewshotgen or a ksa mechanism");
    }
    if (t_max < 0) throw InvalidInputError("t_max must be >= 0");
    if (vocab_size < 2) throw InvalidInputError("vocab_size must be >= 2");
    if (keywords_per_query < 1 || keywords_per_query > keyword_pool) {
      throw InvalidInputError(
          "keywords_per_query must lie in [1, keyword_pool]");
    }
    if (select_k < 0) throw InvalidInputError("select_k must be >= 0");
    if (m_subsets < 1) throw InvalidInputError("m_subsets must be >= 1");
    if (mn_shots < 1) throw InvalidInputError("mn_shots must be >= 1");
  }
}

// --- exact oracles ----------------------------------------------------------

Eigen::VectorXd exact_mechanism_log_distribution(
    const MechanismSpec& spec,
    const Eigen::Ref<const Eigen::VectorXd>& scores) {
  check_oracle_domain(scores.size());
  if (!scores.allFinite()) {
    throw InvalidInputError("oracle scores must be finite");
  }
  switch (spec.kind) {
    case MechanismSpec::Kind::kExponential:
    case MechanismSpec::Kind::kGumbelTop1: {
      if (!(spec.epsilon > 0.0) || !(spec.sensitivity > 0.0)) {
        throw InvalidInputError("oracle needs epsilon > 0, sensitivity > 0");
      }
      const Eigen::VectorXd logits =
          (spec.epsilon / (2.0 * spec.sensitivity)) * scores.array();
      return softmax_log_probs(logits);
    }
    case MechanismSpec::Kind::kRnmLaplace:
      if (!(spec.scale > 0.0)) {
        throw InvalidInputError("oracle needs a positive noise scale");
      }
      return noisy_argmax_log_probs(scores, spec.scale, /*laplace=*/true);
    case MechanismSpec::Kind::kGnMax:
      if (!(spec.sigma > 0.0)) {
        throw InvalidInputError("oracle needs a positive sigma");
      }
      return noisy_argmax_log_probs(scores, spec.sigma, /*laplace=*/false);
  }
  throw InvalidInputError("unknown mechanism kind");
}

Eigen::VectorXd exact_mechanism_distribution(
    const MechanismSpec& spec,
    const Eigen::Ref<const Eigen::VectorXd>& scores) {
  return exact_mechanism_log_distribution(spec, scores).array().exp();
}

double dp_ratio_audit(const MechanismSpec& spec, const VoteHistogram& hist) {
  const Eigen::Index n = hist.domain().size();
  check_oracle_domain(n);
  if ((hist.counts().array() > kMaxAuditCount).any()) {
    throw InvalidInputError("dp_ratio_audit handles counts <= 20");
  }
  const Eigen::VectorXd base = hist.counts_as_reals();
  const Eigen::VectorXd log_p = exact_mechanism_log_distribution(spec, base);

  double worst = 0.0;
  for (Eigen::Index v = 0; v < n; ++v) {
    Eigen::VectorXd neighbor = base;
    neighbor[v] += 1.0;
    const Eigen::VectorXd log_q =
        exact_mechanism_log_distribution(spec, neighbor);
    for (Eigen::Index i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(log_p[i] - log_q[i]));
    }
  }
  return worst;
}

double exact_majority_vote_accuracy(int n_teachers, int n_classes,
                                    double accuracy) {
  if (n_teachers < 1 || n_teachers > 25) {
    throw InvalidInputError("majority oracle handles 1..25 teachers");
  }
  if (n_classes < 2 || n_classes > kMaxOracleDomain) {
    throw InvalidInputError("majority oracle handles 2..6 classes");
  }
  if (!(accuracy >= 0.0) || !(accuracy <= 1.0)) {
    throw InvalidInputError("accuracy must lie in [0, 1]");
  }

  const double wrong =
      (1.0 - accuracy) / static_cast<double>(n_classes - 1);
  double total = 0.0;
  for (int truth = 0; truth < n_classes; ++truth) {
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    double win_prob = 0.0;
    // Enumerate every vote-count composition with its multinomial weight.
    std::function<void(int, int)> enumerate = [&](int cls, int remaining) {
      if (cls == n_classes - 1) {
        counts[static_cast<std::size_t>(cls)] = remaining;
        // Lowest index wins ties: truth wins iff strictly ahead of every
        // lower class and at least tied with every higher class.
        bool wins = true;
        for (int j = 0; j < n_classes && wins; ++j) {
          if (j == truth) continue;
          const int ct = counts[static_cast<std::size_t>(truth)];
          const int cj = counts[static_cast<std::size_t>(j)];
          wins = j < truth ? ct > cj : ct >= cj;
        }
        if (wins) {
          double log_prob = std::lgamma(n_teachers + 1.0);
          for (int j = 0; j < n_classes; ++j) {
            const int cj = counts[static_cast<std::size_t>(j)];
            const double pj = j == truth ? accuracy : wrong;
            log_prob -= std::lgamma(cj + 1.0);
            if (cj > 0) {
              if (pj == 0.0) return;  // impossible composition
              log_prob += cj * std::log(pj);
            }
          }
          win_prob += std::exp(log_prob);
        }
        return;
      }
      for (int c = 0; c <= remaining; ++c) {
        counts[static_cast<std::size_t>(cls)] = c;
        enumerate(cls + 1, remaining - c);
      }
    };
    enumerate(0, n_teachers);
    total += win_prob;
  }
  return total / static_cast<double>(n_classes);
}

// --- simulated ensembles ----------------------------------------------------

agg::ClassificationEnsemble make_classification_ensemble(
    const SimTeacherModel& model, int n_teachers,
    std::vector<Eigen::Index> truths, const RngStream& rng) {
  model.validate();
  if (n_teachers < 1) throw InvalidInputError("n_teachers must be >= 1");
  agg::ClassificationEnsemble ensemble;
  ensemble.n_teachers = n_teachers;
  ensemble.domain = CandidateDomain(model.n_classes);
  ensemble.answer = [model, truths = std::move(truths),
                     rng](int query, int teacher) -> Eigen::Index {
    if (query < 0 || static_cast<std::size_t>(query) >= truths.size()) {
      throw InvalidInputError("query index out of range");
    }
    RngStream s = rng.substream(static_cast<std::uint64_t>(query))
                      .substream(static_cast<std::uint64_t>(teacher));
    return model.answer(truths[static_cast<std::size_t>(query)], s);
  };
  return ensemble;
}

std::string ensemble_transcript_json(const agg::ClassificationEnsemble& e,
                                     int n_queries) {
  nlohmann::json records = nlohmann::json::array();
  for (int q = 0; q < n_queries; ++q) {
    for (int t = 0; t < e.n_teachers; ++t) {
      records.push_back({{"query", q},
                         {"teacher", t},
                         {"answer", static_cast<std::int64_t>(e.answer(q, t))}});
    }
  }
  return records.dump();
}

// --- trade-off simulation ---------------------------------------------------

namespace {

constexpr std::uint64_t kTruthSub = 0;
constexpr std::uint64_t kVoteSub = 1;
constexpr std::uint64_t kNoiseSub = 2;

struct PointAccumulator {
  std::vector<double> trial_utility;  // one entry per trial
  std::vector<double> trial_abstain;  // abstain fraction per trial
};

TradeoffCurve finalize(const ScenarioConfig& scenario,
                       const std::vector<PointAccumulator>& acc) {
  TradeoffCurve curve;
  for (std::size_t e = 0; e < scenario.epsilon_grid.size(); ++e) {
    const std::vector<double>& u = acc[e].trial_utility;
    const double mean =
        std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
    double var = 0.0;
    for (double x : u) var += (x - mean) * (x - mean);
    const double stddev =
        u.size() > 1 ? std::sqrt(var / static_cast<double>(u.size() - 1)) : 0.0;
    const std::vector<double>& ab = acc[e].trial_abstain;
    const double abstain =
        std::accumulate(ab.begin(), ab.end(), 0.0) /
        static_cast<double>(ab.size());
    curve.points.push_back(TradeoffPoint{scenario.epsilon_grid[e], mean,
                                         stddev, scenario.trials, abstain, u});
  }
  return curve;
}

void run_trials(int trials, int threads,
                const std::function<void(int trial)>& body) {
  const int n_threads = std::max(1, threads);
  if (n_threads == 1) {
    for (int t = 0; t < trials; ++t) body(t);
    return;
  }
  std::vector<std::thread> workers;
  std::atomic<int> next{0};
  for (int w = 0; w < n_threads; ++w) {
    workers.emplace_back([&] {
      for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) {
        body(t);
      }
    });
  }
  for (std::thread& w : workers) w.join();
}

}  // namespace

TradeoffCurve simulate_classification(const ScenarioConfig& scenario,
                                      const RngStream& rng, int threads) {
  scenario.validate();
  if (scenario.task != SimTask::kClassification) {
    throw InvalidInputError("simulate_classification needs a classification "
                            "scenario");
  }
  const Eigen::Index n_classes = scenario.teacher.n_classes;
  const std::size_t n_eps = scenario.epsilon_grid.size();

  // Translate each per-query budget into a noise parameter once. GNMax sigma
  // comes from the accountant (unit-sensitivity Gaussian RDP at the scenario
  // delta); RNM uses Laplace scale 1/epsilon. Infinite epsilon marks the
  // noiseless limit.
  std::vector<double> noise(n_eps, 0.0);
  for (std::size_t e = 0; e < n_eps; ++e) {
    const double eps = scenario.epsilon_grid[e];
    if (std::isinf(eps)) continue;
    noise[e] = scenario.mechanism == SimMechanism::kGnMax
                   ? acct::calibrate_sigma(eps, scenario.delta, 1.0, 1)
                   : 1.0 / eps;
  }

  std::vector<PointAccumulator> acc(n_eps);
  for (PointAccumulator& a : acc) {
    a.trial_utility.assign(static_cast<std::size_t>(scenario.trials), 0.0);
    a.trial_abstain.assign(static_cast<std::size_t>(scenario.trials), 0.0);
  }

  run_trials(scenario.trials, threads, [&](int trial) {
    const RngStream trial_rng =
        rng.substream(static_cast<std::uint64_t>(trial));
    std::vector<int> correct(n_eps, 0);
    for (int q = 0; q < scenario.n_queries; ++q) {
      const RngStream query_rng =
          trial_rng.substream(static_cast<std::uint64_t>(q));
      RngStream truth_rng = query_rng.substream(kTruthSub);
      const Eigen::Index truth = static_cast<Eigen::Index>(
          truth_rng.next_below(static_cast<std::uint64_t>(n_classes)));

      VoteHistogram hist(CandidateDomain(n_classes),
                         CountVector::Zero(n_classes));
      const RngStream vote_rng = query_rng.substream(kVoteSub);
      for (int t = 0; t < scenario.n_teachers; ++t) {
        RngStream teacher_rng =
            vote_rng.substream(static_cast<std::uint64_t>(t));
        hist.add_vote(scenario.teacher.answer(truth, teacher_rng));
      }

      const RngStream noise_root = query_rng.substream(kNoiseSub);
      for (std::size_t e = 0; e < n_eps; ++e) {
        Eigen::Index label;
        if (std::isinf(scenario.epsilon_grid[e])) {
          label = mech::argmax_lowest_index(hist.counts_as_reals());
        } else {
          RngStream noise_rng =
              noise_root.substream(static_cast<std::uint64_t>(e));
          label = scenario.mechanism == SimMechanism::kGnMax
                      ? mech::gnmax(hist, noise[e], noise_rng)
                      : mech::report_noisy_max(hist, mech::RnmNoise::kLaplace,
                                               noise[e], noise_rng);
        }
        if (label == truth) ++correct[e];
      }
    }
    for (std::size_t e = 0; e < n_eps; ++e) {
      acc[e].trial_utility[static_cast<std::size_t>(trial)] =
          static_cast<double>(correct[e]) /
          static_cast<double>(scenario.n_queries);
    }
  });

  return finalize(scenario, acc);
}

namespace {

// Ground-truth keyword ids for one query: a deterministic partial shuffle.
std::vector<int> draw_truth_keywords(int pool, int k, RngStream& rng) {
  std::vector<int> ids(static_cast<std::size_t>(pool));
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t j =
        i + rng.next_below(static_cast<std::uint64_t>(pool - i));
    std::swap(ids[static_cast<std::size_t>(i)],
              ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(k));
  return ids;
}

std::string keyword_label(int id) { return "kw" + std::to_string(id); }

}  // namespace

TradeoffCurve simulate_generation(const ScenarioConfig& scenario,
                                  const RngStream& rng, int threads) {
  scenario.validate();
  if (scenario.task != SimTask::kGeneration) {
    throw InvalidInputError("simulate_generation needs a generation scenario");
  }
  const std::size_t n_eps = scenario.epsilon_grid.size();
  const bool fewshot = scenario.mechanism == SimMechanism::kFewShotGen;
  const bool ptr = scenario.mechanism == SimMechanism::kKsaPtr;
  const int select_k =
      scenario.select_k > 0 ? scenario.select_k : scenario.keywords_per_query;

  std::vector<PointAccumulator> acc(n_eps);
  for (PointAccumulator& a : acc) {
    a.trial_utility.assign(static_cast<std::size_t>(scenario.trials), 0.0);
    a.trial_abstain.assign(static_cast<std::size_t>(scenario.trials), 0.0);
  }

  run_trials(scenario.trials, threads, [&](int trial) {
    const RngStream trial_rng =
        rng.substream(static_cast<std::uint64_t>(trial));
    std::vector<double> utility(n_eps, 0.0);
    std::vector<int> abstains(n_eps, 0);

    for (int q = 0; q < scenario.n_queries; ++q) {
      const RngStream query_rng =
          trial_rng.substream(static_cast<std::uint64_t>(q));
      RngStream truth_rng = query_rng.substream(kTruthSub);
      const RngStream propose_rng = query_rng.substream(kVoteSub);
      const RngStream noise_root = query_rng.substream(kNoiseSub);

      if (fewshot) {
        if (scenario.t_max == 0) continue;  // utility stays 0
        std::vector<Eigen::Index> truth(
            static_cast<std::size_t>(scenario.t_max));
        for (int t = 0; t < scenario.t_max; ++t) {
          RngStream ts = truth_rng.substream(static_cast<std::uint64_t>(t));
          truth[static_cast<std::size_t>(t)] = static_cast<Eigen::Index>(
              ts.next_below(static_cast<std::uint64_t>(scenario.vocab_size)));
        }

        agg::TokenEnsemble ensemble;
        ensemble.n_subsets = scenario.m_subsets;
        ensemble.next_token = [&](int subset,
                                  std::span<const Eigen::Index> prefix) {
          const std::uint64_t step = prefix.size();
          RngStream s = propose_rng
                            .substream(static_cast<std::uint64_t>(subset))
                            .substream(step);
          const Eigen::Index target = truth[static_cast<std::size_t>(step)];
          if (s.next_open01() < scenario.teacher.accuracy) return target;
          const Eigen::Index wrong = static_cast<Eigen::Index>(s.next_below(
              static_cast<std::uint64_t>(scenario.vocab_size - 1)));
          return wrong >= target ? wrong + 1 : wrong;
        };

        for (std::size_t e = 0; e < n_eps; ++e) {
          const double eps = scenario.epsilon_grid[e];
          std::vector<Eigen::Index> tokens;
          if (std::isinf(eps)) {
            // Noiseless limit: plurality token, lowest token id on ties.
            for (int t = 0; t < scenario.t_max; ++t) {
              std::vector<Eigen::Index> cands(
                  static_cast<std::size_t>(scenario.m_subsets));
              for (int s = 0; s < scenario.m_subsets; ++s) {
                cands[static_cast<std::size_t>(s)] =
                    ensemble.next_token(s, tokens);
              }
              Eigen::VectorXd counts =
                  Eigen::VectorXd::Zero(scenario.vocab_size);
              for (Eigen::Index c : cands) counts[c] += 1.0;
              tokens.push_back(mech::argmax_lowest_index(counts));
            }
          } else {
            const agg::GenerationBudget budget(PrivacyBudget(eps, 0.0),
                                               eps / scenario.t_max,
                                               scenario.t_max);
            RngStream gen_rng =
                noise_root.substream(static_cast<std::uint64_t>(e));
            tokens = agg::fewshotgen_generate(ensemble, budget, std::nullopt,
                                              gen_rng)
                         .tokens;
          }
          int matches = 0;
          for (std::size_t t = 0; t < tokens.size(); ++t) {
            if (tokens[t] == truth[t]) ++matches;
          }
          utility[e] += static_cast<double>(matches) /
                        static_cast<double>(scenario.t_max);
        }
        continue;
      }

      // Keyword-space aggregation over simulated teacher texts.
      const std::vector<int> truth_ids = draw_truth_keywords(
          scenario.keyword_pool, scenario.keywords_per_query, truth_rng);
      std::vector<std::string> texts(
          static_cast<std::size_t>(scenario.n_teachers));
      for (int t = 0; t < scenario.n_teachers; ++t) {
        RngStream ts = propose_rng.substream(static_cast<std::uint64_t>(t));
        std::string text;
        for (int kw : truth_ids) {
          if (ts.next_open01() < scenario.teacher.accuracy) {
            if (!text.empty()) text += ' ';
            text += keyword_label(kw);
          }
        }
        texts[static_cast<std::size_t>(t)] = std::move(text);
      }

      agg::KeywordExtraction extraction;
      extraction.max_keywords_per_teacher = scenario.keywords_per_query;

      bool any_keyword = false;
      for (const std::string& t : texts) any_keyword |= !t.empty();

      for (std::size_t e = 0; e < n_eps; ++e) {
        const double eps = scenario.epsilon_grid[e];
        if (!any_keyword) {
          ++abstains[e];  // nothing to aggregate
          continue;
        }
        std::optional<std::vector<std::string>> released;
        if (std::isinf(eps)) {
          const VoteHistogram hist = agg::keyword_histogram(texts, extraction);
          const std::vector<Eigen::Index> order =
              mech::rank_by_count(hist.counts());
          const int k_eff =
              std::min<int>(select_k, static_cast<int>(order.size()));
          if (ptr) {
            const std::int64_t kth = hist.counts()[order[k_eff - 1]];
            const std::int64_t next =
                k_eff < static_cast<int>(order.size())
                    ? hist.counts()[order[static_cast<std::size_t>(k_eff)]]
                    : 0;
            if (static_cast<double>(kth - next) <= 2.0) {
              released = std::nullopt;
            } else {
              std::vector<std::string> kws;
              for (int r = 0; r < k_eff; ++r) {
                kws.push_back(hist.domain().label_of(
                    order[static_cast<std::size_t>(r)]));
              }
              released = std::move(kws);
            }
          } else {
            std::vector<std::string> kws;
            for (int r = 0; r < k_eff; ++r) {
              kws.push_back(
                  hist.domain().label_of(order[static_cast<std::size_t>(r)]));
            }
            released = std::move(kws);
          }
        } else {
          RngStream sel_rng =
              noise_root.substream(static_cast<std::uint64_t>(e));
          const agg::KsaResult result = agg::ksa_select(
              texts, extraction, select_k,
              PrivacyBudget(eps, scenario.delta),
              ptr ? agg::KsaMethod::kPtr : agg::KsaMethod::kGumbelTopk,
              sel_rng);
          released = result.keywords;
        }

        if (!released.has_value()) {
          ++abstains[e];
          continue;
        }
        int hits = 0;
        for (const std::string& kw : *released) {
          for (int id : truth_ids) {
            if (kw == keyword_label(id)) {
              ++hits;
              break;
            }
          }
        }
        utility[e] += static_cast<double>(hits) /
                      static_cast<double>(scenario.keywords_per_query);
      }
    }

    for (std::size_t e = 0; e < n_eps; ++e) {
      acc[e].trial_utility[static_cast<std::size_t>(trial)] =
          utility[e] / static_cast<double>(scenario.n_queries);
      acc[e].trial_abstain[static_cast<std::size_t>(trial)] =
          static_cast<double>(abstains[e]) /
          static_cast<double>(scenario.n_queries);
    }
  });

  return finalize(scenario, acc);
}

}  // namespace dpwb::sim
