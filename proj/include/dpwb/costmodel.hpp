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

#ifndef DPWB_COSTMODEL_HPP
#define DPWB_COSTMODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>

// Token-based API cost and GPU-hour cost calculator. All arithmetic is at
// full precision; rounding to cents happens only at display time.
namespace dpwb::cost {

struct ModelPrice {
  double input_per_million = 0.0;   // dollars per 1M input tokens
  double output_per_million = 0.0;  // dollars per 1M output tokens
};

struct PricingTable {
  std::map<std::string, ModelPrice> models;
  std::map<std::string, double> hardware_per_hour;
};

// Average token counts for one query of a task. The averages exclude
// instructions; instruction_tokens defaults to 0 and exists so implied
// instruction lengths can be back-solved.
struct TokenProfile {
  double avg_input_tokens = 0.0;
  double avg_output_tokens = 0.0;
  double instruction_tokens = 0.0;
};

struct QueryWorkload {
  std::int64_t n_queries = 1;
  int n_shots = 0;
  int ensemble_size = 1;
  TokenProfile profile;
};

struct TrainWorkload {
  double gpu_hours = 0.0;
  std::string hardware;
};

struct TokenCounts {
  double input_tokens = 0.0;   // per single prompt (one ensemble member)
  double output_tokens = 0.0;
};

void validate(const PricingTable& pricing);
void validate(const TokenProfile& profile);
void validate(const QueryWorkload& workload);
void validate(const TrainWorkload& workload);

// Tokens for one prompt: every shot prepends an average input plus its
// label, so
//   input  = instruction + avg_input + n_shots * (avg_input + avg_output)
//   output = avg_output
// Ensemble fan-out multiplies at charging time, not here.
TokenCounts per_query_tokens(const QueryWorkload& workload);

// n_queries * ensemble_size * (input * input_price + output * output_price)
// / 1e6, in dollars. Unknown models raise LookupError.
double query_cost(const PricingTable& pricing, const std::string& model,
                  const QueryWorkload& workload);

// gpu_hours * hourly rate. Unknown hardware raises LookupError.
double train_cost(const PricingTable& pricing, const TrainWorkload& workload);

struct MethodDescriptor {
  std::string model;               // required when `query` is present
  std::optional<QueryWorkload> query;
  std::optional<TrainWorkload> train;
};

struct CostReport {
  double train_usd = 0.0;
  double query_usd = 0.0;
  double total_usd = 0.0;  // train + query, exactly
};

CostReport method_cost_report(const PricingTable& pricing,
                              const MethodDescriptor& descriptor);

// Round-half-away-from-zero to cents; display only.
double round_cents(double dollars);

}  // namespace dpwb::cost

#endif  // DPWB_COSTMODEL_HPP
