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

#include "dpwb/costmodel.hpp"

#include <cmath>

#include "dpwb/errors.hpp"

namespace dpwb::cost {

void validate(const PricingTable& pricing) {
  for (const auto& [name, price] : pricing.models) {
    if (name.empty()) throw InvalidInputError("empty model name");
    if (!(price.input_per_million >= 0.0) ||
        !(price.output_per_million >= 0.0)) {
      throw InvalidInputError("prices must be >= 0 for model " + name);
    }
  }
  for (const auto& [name, rate] : pricing.hardware_per_hour) {
    if (name.empty()) throw InvalidInputError("empty hardware name");
    if (!(rate >= 0.0)) {
      throw InvalidInputError("hourly rate must be >= 0 for " + name);
    }
  }
}

void validate(const TokenProfile& profile) {
  if (!(profile.avg_input_tokens >= 0.0) ||
      !(profile.avg_output_tokens >= 0.0) ||
      !(profile.instruction_tokens >= 0.0)) {
    throw InvalidInputError("token counts must be >= 0");
  }
}

void validate(const QueryWorkload& workload) {
  validate(workload.profile);
  if (workload.n_queries < 1) {
    throw InvalidInputError("n_queries must be >= 1");
  }
  if (workload.n_shots < 0) throw InvalidInputError("n_shots must be >= 0");
  if (workload.ensemble_size < 1) {
    throw InvalidInputError("ensemble_size must be >= 1");
  }
}

void validate(const TrainWorkload& workload) {
  if (!(workload.gpu_hours >= 0.0)) {
    throw InvalidInputError("gpu_hours must be >= 0");
  }
}

TokenCounts per_query_tokens(const QueryWorkload& workload) {
  validate(workload);
  const TokenProfile& p = workload.profile;
  TokenCounts tokens;
  tokens.input_tokens =
      p.instruction_tokens + p.avg_input_tokens +
      workload.n_shots * (p.avg_input_tokens + p.avg_output_tokens);
  tokens.output_tokens = p.avg_output_tokens;
  return tokens;
}

double query_cost(const PricingTable& pricing, const std::string& model,
                  const QueryWorkload& workload) {
  validate(pricing);
  const auto it = pricing.models.find(model);
  if (it == pricing.models.end()) {
    throw LookupError("unknown model: " + model);
  }
  const TokenCounts tokens = per_query_tokens(workload);
  const double per_call =
      (tokens.input_tokens * it->second.input_per_million +
       tokens.output_tokens * it->second.output_per_million) /
      1e6;
  return static_cast<double>(workload.n_queries) *
         static_cast<double>(workload.ensemble_size) * per_call;
}

double train_cost(const PricingTable& pricing, const TrainWorkload& workload) {
  validate(pricing);
  validate(workload);
  const auto it = pricing.hardware_per_hour.find(workload.hardware);
  if (it == pricing.hardware_per_hour.end()) {
    throw LookupError("unknown hardware: " + workload.hardware);
  }
  return workload.gpu_hours * it->second;
}

CostReport method_cost_report(const PricingTable& pricing,
                              const MethodDescriptor& descriptor) {
  CostReport report;
  if (descriptor.train.has_value()) {
    report.train_usd = train_cost(pricing, *descriptor.train);
  }
  if (descriptor.query.has_value()) {
    report.query_usd = query_cost(pricing, descriptor.model, *descriptor.query);
  }
  report.total_usd = report.train_usd + report.query_usd;
  return report;
}

double round_cents(double dollars) {
  return std::round(dollars * 100.0) / 100.0;
}

}  // namespace dpwb::cost
