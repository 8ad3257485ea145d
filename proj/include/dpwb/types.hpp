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

#ifndef DPWB_TYPES_HPP
#define DPWB_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dpwb/errors.hpp"

namespace dpwb {

using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// Finite set of candidates a private selection chooses from (class labels,
// keywords, vocabulary tokens). Labels are optional display names.
class CandidateDomain {
 public:
  explicit CandidateDomain(Eigen::Index size) : size_(size) { check(); }

  explicit CandidateDomain(std::vector<std::string> labels)
      : size_(static_cast<Eigen::Index>(labels.size())),
        labels_(std::move(labels)) {
    check();
  }

  Eigen::Index size() const { return size_; }
  bool has_labels() const { return !labels_.empty(); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::string label_of(Eigen::Index i) const {
    if (i < 0 || i >= size_) throw InvalidInputError("candidate out of range");
    return has_labels() ? labels_[static_cast<std::size_t>(i)]
                        : std::to_string(i);
  }

 private:
  void check() const {
    if (size_ < 1) throw InvalidInputError("domain size must be >= 1");
    if (!labels_.empty()) {
      std::unordered_set<std::string> seen(labels_.begin(), labels_.end());
      if (static_cast<Eigen::Index>(seen.size()) != size_) {
        throw InvalidInputError("domain labels must be unique");
      }
    }
  }

  Eigen::Index size_;
  std::vector<std::string> labels_;
};

// Nonnegative integer counts over a candidate domain.
class VoteHistogram {
 public:
  VoteHistogram(CandidateDomain domain, CountVector counts)
      : domain_(std::move(domain)), counts_(std::move(counts)) {
    if (counts_.size() != domain_.size()) {
      throw InvalidInputError("histogram size must match domain size");
    }
    if ((counts_.array() < 0).any()) {
      throw InvalidInputError("histogram counts must be nonnegative");
    }
  }

  // Tallies one vote per entry; votes must lie inside the domain.
  static VoteHistogram from_votes(CandidateDomain domain,
                                  std::span<const Eigen::Index> votes) {
    CountVector counts = CountVector::Zero(domain.size());
    for (Eigen::Index v : votes) {
      if (v < 0 || v >= domain.size()) {
        throw InvalidInputError("vote outside candidate domain");
      }
      ++counts[v];
    }
    return VoteHistogram(std::move(domain), std::move(counts));
  }

  const CandidateDomain& domain() const { return domain_; }
  const CountVector& counts() const { return counts_; }

  void add_vote(Eigen::Index candidate) {
    if (candidate < 0 || candidate >= domain_.size()) {
      throw InvalidInputError("vote outside candidate domain");
    }
    ++counts_[candidate];
  }

  Eigen::VectorXd counts_as_reals() const {
    return counts_.cast<double>();
  }

 private:
  CandidateDomain domain_;
  CountVector counts_;
};

// Finite real-valued quality scores over a candidate domain.
class ScoreVector {
 public:
  ScoreVector(CandidateDomain domain, Eigen::VectorXd scores)
      : domain_(std::move(domain)), scores_(std::move(scores)) {
    if (scores_.size() != domain_.size()) {
      throw InvalidInputError("score vector size must match domain size");
    }
    if (!scores_.allFinite()) {
      throw InvalidInputError("scores must be finite");
    }
  }

  const CandidateDomain& domain() const { return domain_; }
  const Eigen::VectorXd& scores() const { return scores_; }

 private:
  CandidateDomain domain_;
  Eigen::VectorXd scores_;
};

// Score-function sensitivity (the largest change one record can cause).
struct Sensitivity {
  explicit Sensitivity(double v) : value(v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInputError("sensitivity must be finite and > 0");
    }
  }
  double value;
};

// An (epsilon, delta) privacy budget. epsilon may be 0 (nothing spent yet)
// or +infinity (a non-private release); mechanisms that consume a budget
// require a finite positive epsilon at their call sites.
struct PrivacyBudget {
  PrivacyBudget(double eps, double del) : epsilon(eps), delta(del) {
    if (std::isnan(epsilon) || epsilon < 0.0) {
      throw InvalidInputError("epsilon must be >= 0");
    }
    if (!(delta >= 0.0) || !(delta < 1.0)) {
      throw InvalidInputError("delta must lie in [0, 1)");
    }
  }

  static PrivacyBudget zero() { return PrivacyBudget(0.0, 0.0); }

  double epsilon;
  double delta;
};

}  // namespace dpwb

#endif  // DPWB_TYPES_HPP
