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

#ifndef DPWB_ACCOUNTING_HPP
#define DPWB_ACCOUNTING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpwb/types.hpp"

// Renyi-DP accounting: per-mechanism RDP curves, additive composition,
// conversion to (epsilon, delta), and noise calibration against a target
// budget. Everything is a value object; callers own and merge ledgers.
namespace dpwb::acct {

// RDP values over a fixed grid of Renyi orders alpha > 1.
class RdpCurve {
 public:
  RdpCurve(std::vector<double> orders, Eigen::VectorXd values);

  const std::vector<double>& orders() const { return orders_; }
  const Eigen::VectorXd& values() const { return values_; }

  bool same_grid(const RdpCurve& other) const;

 private:
  std::vector<double> orders_;
  Eigen::VectorXd values_;
};

// Default order grid: 1.25, 1.5, 1.75, 2, 3, ..., 64, 128, 256.
const std::vector<double>& default_rdp_orders();

// Gaussian mechanism with unit L2 sensitivity: RDP(alpha) = alpha/(2 sigma^2).
RdpCurve rdp_gaussian(double sigma, std::span<const double> orders);
RdpCurve rdp_gaussian(double sigma);

struct SubsampledGaussianParams {
  double sigma = 0.0;  // noise multiplier
  double q = 0.0;      // Poisson sampling rate in (0, 1]
  int steps = 0;

  void validate() const;
};

// Per-step RDP of the Poisson-subsampled Gaussian mechanism at integer
// orders, multiplied by `steps`.
//
// Uses the exact binomial expansion of the mixture moment at integer alpha:
//   RDP(alpha) = log( sum_{j=0..alpha} C(alpha,j) (1-q)^(alpha-j) q^j
//                     * exp(j(j-1)/(2 sigma^2)) ) / (alpha - 1)
// evaluated in log space. Non-integer orders in the requested grid are
// dropped (q = 1 keeps the full grid since no subsampling is involved);
// when any order is dropped, *dropped_noninteger is set.
RdpCurve rdp_subsampled_gaussian(const SubsampledGaussianParams& params,
                                 std::span<const double> orders,
                                 bool* dropped_noninteger = nullptr);

// Pointwise sum over an identical order grid.
RdpCurve compose(std::span<const RdpCurve> curves);

struct EpsilonReport {
  double epsilon = 0.0;
  double alpha_star = 0.0;  // order attaining the minimum
};

// epsilon(delta) = min over alpha of RDP(alpha) + ln(1/delta)/(alpha - 1).
EpsilonReport to_eps_delta(const RdpCurve& curve, double delta);

// Accountant curve used for both calibration and conversion: plain Gaussian
// composition for q = 1, subsampled Gaussian otherwise.
RdpCurve accountant_curve(double sigma, double q, int steps,
                          std::span<const double> orders,
                          bool* dropped_noninteger = nullptr);
RdpCurve accountant_curve(double sigma, double q, int steps);

// Smallest sigma in [0.3, 100] (to tolerance 1e-4) whose accountant epsilon
// lands in [0.99 * target, target]. Throws CalibrationError when the target
// cannot be met inside the bracket.
double calibrate_sigma(double target_eps, double delta, double q, int steps);

// (n * epsilon, n * delta) with overflow guarded.
PrivacyBudget basic_composition(const PrivacyBudget& per_call,
                                std::int64_t n_calls);

// Convention for resolving delta from the dataset size.
class DeltaConvention {
 public:
  static DeltaConvention explicit_delta(double delta);
  static DeltaConvention one_over_n();

  // n is the dataset size; only consulted by the one_over_n rule.
  double resolve(Eigen::Index n) const;
  bool is_one_over_n() const { return !explicit_.has_value(); }

 private:
  DeltaConvention() = default;
  std::optional<double> explicit_;
};

// One privacy charge: either an RDP curve (composed in RDP space) or a pure
// (epsilon, delta) pair (composed by summation).
struct LedgerEntry {
  std::string mechanism;
  std::optional<RdpCurve> rdp;
  PrivacyBudget pure = PrivacyBudget::zero();
  std::map<std::string, double> metadata;
};

// Ordered record of privacy charges. A ledger is either all-RDP (DPSGD-style
// training) or all-pure (per-query protocol budgets); the totals below
// enforce whichever shape they need.
class PrivacyLedger {
 public:
  void charge_rdp(std::string mechanism, RdpCurve curve,
                  std::map<std::string, double> metadata = {});
  void charge_pure(std::string mechanism, PrivacyBudget budget,
                   std::map<std::string, double> metadata = {});
  void append(const PrivacyLedger& other);

  std::size_t size() const { return entries_.size(); }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  bool has_rdp() const;
  bool has_pure() const;

  // Sum of pure (epsilon, delta) charges; throws if any entry is RDP.
  PrivacyBudget pure_total() const;

  // Composition of all RDP entries; throws if empty or any entry is pure.
  RdpCurve composed_rdp() const;

  // Epsilon of the composed RDP entries at the given delta.
  EpsilonReport epsilon_at(double delta) const;

 private:
  std::vector<LedgerEntry> entries_;
};

}  // namespace dpwb::acct

#endif  // DPWB_ACCOUNTING_HPP
