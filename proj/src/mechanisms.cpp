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

#include "dpwb/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dpwb::mech {

namespace {

void require_positive_finite(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidInputError(std::string(name) + " must be finite and > 0");
  }
}

}  // namespace

Eigen::VectorXd gaussian_noise(const Eigen::Ref<const Eigen::VectorXd>& values,
                               double sigma, RngStream& rng) {
  if (!values.allFinite()) {
    throw InvalidInputError("gaussian_noise: values must be finite");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidInputError("gaussian_noise: sigma must be finite and >= 0");
  }
  Eigen::VectorXd out = values;
  if (sigma == 0.0) return out;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] += rng.next_normal(sigma);
  }
  return out;
}

Eigen::Index argmax_lowest_index(
    const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() < 1) throw InvalidInputError("argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<Eigen::Index> rank_by_count(const CountVector& counts) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(counts.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return counts[a] > counts[b];
                   });
  return order;
}

Eigen::Index report_noisy_max(const VoteHistogram& hist, RnmNoise kind,
                              double scale, RngStream& rng) {
  require_positive_finite(scale, "report_noisy_max: scale");
  const Eigen::VectorXd counts = hist.counts_as_reals();
  Eigen::VectorXd noisy(counts.size());
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    const double noise = kind == RnmNoise::kLaplace ? rng.next_laplace(scale)
                                                    : rng.next_normal(scale);
    noisy[i] = counts[i] + noise;
  }
  return argmax_lowest_index(noisy);
}

Eigen::Index report_noisy_max_laplace(const VoteHistogram& hist,
                                      double epsilon, RngStream& rng) {
  require_positive_finite(epsilon, "report_noisy_max: epsilon");
  return report_noisy_max(hist, RnmNoise::kLaplace, 1.0 / epsilon, rng);
}

Eigen::Index exponential_mechanism(const ScoreVector& scores,
                                   Sensitivity sensitivity, double epsilon,
                                   RngStream& rng) {
  require_positive_finite(epsilon, "exponential_mechanism: epsilon");
  const Eigen::VectorXd& q = scores.scores();
  const double scale = epsilon / (2.0 * sensitivity.value);
  // Stable softmax: subtract the max logit before exponentiating.
  const Eigen::VectorXd logits = scale * q.array();
  const double max_logit = logits.maxCoeff();
  const Eigen::VectorXd weights = (logits.array() - max_logit).exp();
  const double total = weights.sum();

  const double u = rng.next_open01() * total;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;  // guards against roundoff at u ~ total
}

std::vector<Eigen::Index> gumbel_topk(const ScoreVector& scores,
                                      Sensitivity sensitivity, double epsilon,
                                      int k, RngStream& rng) {
  require_positive_finite(epsilon, "gumbel_topk: epsilon");
  const Eigen::Index n = scores.domain().size();
  if (k < 1 || k > n) {
    throw InvalidInputError("gumbel_topk: k must lie in [1, domain size]");
  }
  const double scale = 2.0 * sensitivity.value / epsilon;
  Eigen::VectorXd noisy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    noisy[i] = scores.scores()[i] + rng.next_gumbel(scale);
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return noisy[a] > noisy[b];
                   });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

std::variant<std::vector<Eigen::Index>, Abstain> ptr_topk(
    const VoteHistogram& hist, int k, const PrivacyBudget& budget,
    RngStream& rng) {
  const Eigen::Index n = hist.domain().size();
  if (k < 1 || k >= n) {
    throw InvalidInputError("ptr_topk: k must lie in [1, domain size - 1]");
  }
  require_positive_finite(budget.epsilon, "ptr_topk: epsilon");
  if (!(budget.delta > 0.0)) {
    throw InvalidInputError("ptr_topk: delta must be > 0");
  }

  const std::vector<Eigen::Index> order = rank_by_count(hist.counts());
  const double gap = static_cast<double>(hist.counts()[order[k - 1]] -
                                         hist.counts()[order[k]]);
  const double eps = budget.epsilon;
  const double stat = gap + rng.next_laplace(2.0 / eps) -
                      2.0 * std::log(1.0 / (2.0 * budget.delta)) / eps;
  if (stat > 2.0) {
    return std::vector<Eigen::Index>(order.begin(), order.begin() + k);
  }
  return Abstain{};
}

std::variant<Eigen::Index, Bottom> limited_domain_max(
    const VoteHistogram& hist, int kbar, const PrivacyBudget& budget,
    RngStream& rng) {
  const Eigen::Index n = hist.domain().size();
  if (kbar < 1 || kbar > n) {
    throw InvalidInputError(
        "limited_domain_max: kbar must lie in [1, domain size]");
  }
  require_positive_finite(budget.epsilon, "limited_domain_max: epsilon");
  if (!(budget.delta > 0.0)) {
    throw InvalidInputError("limited_domain_max: delta must be > 0");
  }

  const double eps = budget.epsilon;
  const double scale = 2.0 / eps;
  const std::vector<Eigen::Index> order = rank_by_count(hist.counts());

  // Noisy scores for the kbar retained candidates, drawn in rank order.
  Eigen::Index best = order[0];
  double best_noisy = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < kbar; ++r) {
    const double noisy = static_cast<double>(hist.counts()[order[r]]) +
                         rng.next_laplace(scale);
    if (noisy > best_noisy) {
      best_noisy = noisy;
      best = order[static_cast<std::size_t>(r)];
    }
  }

  const double tail_count =
      kbar < n ? static_cast<double>(hist.counts()[order[kbar]]) : 0.0;
  const double threshold = tail_count + 1.0 +
                           2.0 * std::log(1.0 / budget.delta) / eps +
                           rng.next_laplace(scale);
  if (best_noisy > threshold) return best;
  return Bottom{};
}

Eigen::Index gnmax(const VoteHistogram& hist, double sigma, RngStream& rng) {
  require_positive_finite(sigma, "gnmax: sigma");
  return report_noisy_max(hist, RnmNoise::kGaussian, sigma, rng);
}

}  // namespace dpwb::mech
