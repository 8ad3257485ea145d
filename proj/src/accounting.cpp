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

#include "dpwb/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpwb/errors.hpp"

namespace dpwb::acct {

namespace {

constexpr double kSigmaLo = 0.3;
constexpr double kSigmaHi = 100.0;
constexpr double kSigmaTol = 1e-4;

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
         std::lgamma(n - k + 1.0);
}

double log_sum_exp(const std::vector<double>& log_terms) {
  const double m = *std::max_element(log_terms.begin(), log_terms.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double t : log_terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

bool is_integer_order(double alpha) {
  return alpha == std::floor(alpha);
}

// Per-step RDP of the Poisson-subsampled Gaussian at an integer order.
double subsampled_gaussian_rdp_step(double sigma, double q, int alpha) {
  if (alpha < 2) {
    // alpha = 1 is excluded by the grid invariant (orders > 1); alpha = 2 is
    // the smallest integer order the expansion is evaluated at.
    throw InvalidInputError("subsampled Gaussian needs integer alpha >= 2");
  }
  if (q == 1.0) {
    return alpha / (2.0 * sigma * sigma);
  }
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(alpha) + 1);
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int j = 0; j <= alpha; ++j) {
    const double moment = j * (j - 1) / (2.0 * sigma * sigma);
    log_terms.push_back(log_binom(alpha, j) + (alpha - j) * log_1mq +
                        j * log_q + moment);
  }
  const double log_moment = log_sum_exp(log_terms);
  // The expansion sums to >= 1 analytically; clamp tiny negative roundoff.
  return std::max(0.0, log_moment / (alpha - 1.0));
}

}  // namespace

RdpCurve::RdpCurve(std::vector<double> orders, Eigen::VectorXd values)
    : orders_(std::move(orders)), values_(std::move(values)) {
  if (orders_.empty()) throw InvalidInputError("RDP curve needs >= 1 order");
  if (static_cast<Eigen::Index>(orders_.size()) != values_.size()) {
    throw InvalidInputError("RDP orders/values size mismatch");
  }
  double prev = 1.0;
  for (double a : orders_) {
    if (!(a > prev) || !std::isfinite(a)) {
      throw InvalidInputError("RDP orders must be > 1 and strictly increasing");
    }
    prev = a;
  }
  if ((values_.array() < 0.0).any() || !values_.allFinite()) {
    throw InvalidInputError("RDP values must be finite and >= 0");
  }
}

bool RdpCurve::same_grid(const RdpCurve& other) const {
  return orders_ == other.orders_;
}

const std::vector<double>& default_rdp_orders() {
  static const std::vector<double> orders = [] {
    std::vector<double> o{1.25, 1.5, 1.75};
    for (int a = 2; a <= 64; ++a) o.push_back(a);
    o.push_back(128.0);
    o.push_back(256.0);
    return o;
  }();
  return orders;
}

RdpCurve rdp_gaussian(double sigma, std::span<const double> orders) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidInputError("rdp_gaussian: sigma must be finite and > 0");
  }
  Eigen::VectorXd values(static_cast<Eigen::Index>(orders.size()));
  for (std::size_t i = 0; i < orders.size(); ++i) {
    values[static_cast<Eigen::Index>(i)] =
        orders[i] / (2.0 * sigma * sigma);
  }
  return RdpCurve(std::vector<double>(orders.begin(), orders.end()),
                  std::move(values));
}

RdpCurve rdp_gaussian(double sigma) {
  return rdp_gaussian(sigma, default_rdp_orders());
}

void SubsampledGaussianParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidInputError("noise multiplier sigma must be finite and > 0");
  }
  if (!(q > 0.0) || !(q <= 1.0)) {
    throw InvalidInputError("sampling rate q must lie in (0, 1]");
  }
  if (steps < 1) throw InvalidInputError("steps must be >= 1");
}

RdpCurve rdp_subsampled_gaussian(const SubsampledGaussianParams& params,
                                 std::span<const double> orders,
                                 bool* dropped_noninteger) {
  params.validate();
  std::vector<double> kept;
  for (double a : orders) {
    if (params.q == 1.0 || is_integer_order(a)) kept.push_back(a);
  }
  if (dropped_noninteger != nullptr) {
    *dropped_noninteger = kept.size() != orders.size();
  }
  if (kept.empty()) {
    throw InvalidInputError(
        "rdp_subsampled_gaussian: no integer orders in grid");
  }
  Eigen::VectorXd values(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double per_step =
        params.q == 1.0
            ? kept[i] / (2.0 * params.sigma * params.sigma)
            : subsampled_gaussian_rdp_step(params.sigma, params.q,
                                           static_cast<int>(kept[i]));
    values[static_cast<Eigen::Index>(i)] = per_step * params.steps;
  }
  return RdpCurve(std::move(kept), std::move(values));
}

RdpCurve compose(std::span<const RdpCurve> curves) {
  if (curves.empty()) throw InvalidInputError("compose: empty curve list");
  Eigen::VectorXd total = curves.front().values();
  for (std::size_t i = 1; i < curves.size(); ++i) {
    if (!curves[i].same_grid(curves.front())) {
      throw InvalidInputError("compose: mismatched RDP order grids");
    }
    total += curves[i].values();
  }
  return RdpCurve(curves.front().orders(), std::move(total));
}

EpsilonReport to_eps_delta(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw InvalidInputError("to_eps_delta: delta must lie in (0, 1)");
  }
  const double log_inv_delta = std::log(1.0 / delta);
  EpsilonReport best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < curve.orders().size(); ++i) {
    const double alpha = curve.orders()[i];
    const double eps = curve.values()[static_cast<Eigen::Index>(i)] +
                       log_inv_delta / (alpha - 1.0);
    if (eps < best.epsilon) best = {eps, alpha};
  }
  return best;
}

RdpCurve accountant_curve(double sigma, double q, int steps,
                          std::span<const double> orders,
                          bool* dropped_noninteger) {
  SubsampledGaussianParams params{sigma, q, steps};
  return rdp_subsampled_gaussian(params, orders, dropped_noninteger);
}

RdpCurve accountant_curve(double sigma, double q, int steps) {
  return accountant_curve(sigma, q, steps, default_rdp_orders());
}

double calibrate_sigma(double target_eps, double delta, double q, int steps) {
  if (!(target_eps > 0.0) || !std::isfinite(target_eps)) {
    throw InvalidInputError("calibrate_sigma: target epsilon must be > 0");
  }
  const auto eps_at = [&](double sigma) {
    return to_eps_delta(accountant_curve(sigma, q, steps), delta).epsilon;
  };

  if (eps_at(kSigmaHi) > target_eps) {
    throw CalibrationError("target epsilon unreachable: sigma bracket too low");
  }
  const double eps_lo = eps_at(kSigmaLo);
  if (eps_lo <= target_eps) {
    // Even the smallest admissible sigma already satisfies the target; it is
    // only acceptable if it lands inside the calibration window.
    if (eps_lo >= 0.99 * target_eps) return kSigmaLo;
    throw CalibrationError(
        "target epsilon unreachable: sigma bracket floor overshoots");
  }

  double lo = kSigmaLo;  // eps(lo) > target
  double hi = kSigmaHi;  // eps(hi) <= target
  while (hi - lo > kSigmaTol) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) > target_eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double achieved = eps_at(hi);
  if (achieved < 0.99 * target_eps || achieved > target_eps) {
    throw CalibrationError("calibration did not land in the target window");
  }
  return hi;
}

PrivacyBudget basic_composition(const PrivacyBudget& per_call,
                                std::int64_t n_calls) {
  if (n_calls < 0) throw InvalidInputError("n_calls must be >= 0");
  const double n = static_cast<double>(n_calls);
  const double eps = n * per_call.epsilon;
  double delta = n * per_call.delta;
  if (std::isnan(eps)) throw InvalidInputError("epsilon overflow");
  if (delta >= 1.0) {
    throw InvalidInputError("composed delta reached 1; budget is meaningless");
  }
  return PrivacyBudget(eps, delta);
}

DeltaConvention DeltaConvention::explicit_delta(double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw InvalidInputError("explicit delta must lie in (0, 1)");
  }
  DeltaConvention c;
  c.explicit_ = delta;
  return c;
}

DeltaConvention DeltaConvention::one_over_n() { return DeltaConvention(); }

double DeltaConvention::resolve(Eigen::Index n) const {
  if (explicit_.has_value()) return *explicit_;
  if (n < 2) throw InvalidInputError("one_over_n delta needs n >= 2");
  return 1.0 / static_cast<double>(n);
}

void PrivacyLedger::charge_rdp(std::string mechanism, RdpCurve curve,
                               std::map<std::string, double> metadata) {
  entries_.push_back(LedgerEntry{std::move(mechanism), std::move(curve),
                                 PrivacyBudget::zero(), std::move(metadata)});
}

void PrivacyLedger::charge_pure(std::string mechanism, PrivacyBudget budget,
                                std::map<std::string, double> metadata) {
  entries_.push_back(LedgerEntry{std::move(mechanism), std::nullopt, budget,
                                 std::move(metadata)});
}

void PrivacyLedger::append(const PrivacyLedger& other) {
  entries_.insert(entries_.end(), other.entries_.begin(),
                  other.entries_.end());
}

bool PrivacyLedger::has_rdp() const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [](const LedgerEntry& e) { return e.rdp.has_value(); });
}

bool PrivacyLedger::has_pure() const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [](const LedgerEntry& e) { return !e.rdp.has_value(); });
}

PrivacyBudget PrivacyLedger::pure_total() const {
  if (has_rdp()) {
    throw InvalidInputError("pure_total: ledger contains RDP entries");
  }
  double eps = 0.0;
  double delta = 0.0;
  for (const LedgerEntry& e : entries_) {
    eps += e.pure.epsilon;
    delta += e.pure.delta;
  }
  return PrivacyBudget(eps, delta);
}

RdpCurve PrivacyLedger::composed_rdp() const {
  if (entries_.empty() || has_pure()) {
    throw InvalidInputError("composed_rdp: ledger is not all-RDP");
  }
  std::vector<RdpCurve> curves;
  curves.reserve(entries_.size());
  for (const LedgerEntry& e : entries_) curves.push_back(*e.rdp);
  return compose(curves);
}

EpsilonReport PrivacyLedger::epsilon_at(double delta) const {
  return to_eps_delta(composed_rdp(), delta);
}

}  // namespace dpwb::acct
