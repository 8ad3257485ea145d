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

#include "dpwb/costmodel.hpp"
#include "dpwb/errors.hpp"

using namespace dpwb;
using namespace dpwb::cost;

namespace {

PricingTable reference_pricing() {
  PricingTable table;
  table.models["GPT-Babbage"] = {0.40, 0.40};
  table.models["GPT-Davinci"] = {2.00, 2.00};
  table.models["GPT-3.5-turbo Instruct"] = {1.50, 2.00};
  table.models["GPT-4-turbo"] = {10.00, 30.00};
  table.models["Claude 2.1"] = {8.00, 24.00};
  table.hardware_per_hour["A40 (RunPod)"] = 0.69;
  table.hardware_per_hour["A40 (Replicate)"] = 2.07;
  table.hardware_per_hour["A40 (Hyperstack)"] = 0.50;
  return table;
}

TokenProfile samsum_profile() { return TokenProfile{140.857, 25.620, 0.0}; }

}  // namespace

TEST_CASE("per_query_tokens: zero-shot and one-shot dialog summarization") {
  QueryWorkload w;
  w.n_queries = 1;
  w.n_shots = 0;
  w.ensemble_size = 1;
  w.profile = samsum_profile();

  const TokenCounts zero_shot = per_query_tokens(w);
  CHECK(zero_shot.input_tokens == doctest::Approx(140.857).epsilon(1e-12));
  CHECK(zero_shot.output_tokens == doctest::Approx(25.620).epsilon(1e-12));

  w.n_shots = 1;
  const TokenCounts one_shot = per_query_tokens(w);
  // instruction + input + 1 * (input + output)
  CHECK(one_shot.input_tokens == doctest::Approx(307.334).epsilon(1e-12));
  CHECK(one_shot.output_tokens == doctest::Approx(25.620).epsilon(1e-12));
}

TEST_CASE("per_query_tokens: empty profile gives zero tokens") {
  QueryWorkload w;
  w.profile = TokenProfile{};
  const TokenCounts t = per_query_tokens(w);
  CHECK(t.input_tokens == 0.0);
  CHECK(t.output_tokens == 0.0);
}

TEST_CASE("query_cost: zero-shot summarization on the mid-size API model") {
  QueryWorkload w;
  w.n_queries = 10000;
  w.n_shots = 0;
  w.ensemble_size = 1;
  w.profile = samsum_profile();
  const double cost = query_cost(reference_pricing(), "GPT-Davinci", w);

  // (140.857 + 25.620) tokens * $2 per 1M = $0.000333 per query.
  const double per_query = cost / 10000.0;
  CHECK(std::abs(per_query - 0.000333) < 1e-6);
  CHECK(std::abs(round_cents(cost) - 3.33) <= 0.005);
}

TEST_CASE("query_cost: 1-shot ensemble-of-100 summarization workload") {
  QueryWorkload w;
  w.n_queries = 10000;
  w.n_shots = 1;
  w.ensemble_size = 100;
  w.profile = samsum_profile();
  const double cost = query_cost(reference_pricing(), "GPT-Davinci", w);
  CHECK(std::abs(round_cents(cost) - 665.91) <= 0.005);
}

TEST_CASE("query_cost: all-zero prices cost nothing") {
  PricingTable table;
  table.models["free"] = {0.0, 0.0};
  QueryWorkload w;
  w.n_queries = 123;
  w.n_shots = 2;
  w.ensemble_size = 10;
  w.profile = samsum_profile();
  CHECK(query_cost(table, "free", w) == 0.0);
}

TEST_CASE("train_cost: hourly arithmetic") {
  TrainWorkload five_hours{5.0, "A40 (RunPod)"};
  CHECK(train_cost(reference_pricing(), five_hours) ==
        doctest::Approx(3.45).epsilon(1e-12));

  TrainWorkload nothing{0.0, "A40 (RunPod)"};
  CHECK(train_cost(reference_pricing(), nothing) == 0.0);

  TrainWorkload forty{40.0, "A40 (RunPod)"};
  CHECK(train_cost(reference_pricing(), forty) ==
        doctest::Approx(27.60).epsilon(1e-12));
}

TEST_CASE("method_cost_report: query-only, empty, and train-only reports") {
  const PricingTable pricing = reference_pricing();

  MethodDescriptor dpicl;
  dpicl.model = "GPT-Davinci";
  QueryWorkload q;
  q.n_queries = 10000;
  q.n_shots = 1;
  q.ensemble_size = 100;
  q.profile = samsum_profile();
  dpicl.query = q;
  const CostReport r = method_cost_report(pricing, dpicl);
  CHECK(r.train_usd == 0.0);
  CHECK(std::abs(round_cents(r.query_usd) - 665.91) <= 0.005);
  CHECK(r.total_usd == r.train_usd + r.query_usd);

  const CostReport empty = method_cost_report(pricing, MethodDescriptor{});
  CHECK(empty.train_usd == 0.0);
  CHECK(empty.query_usd == 0.0);
  CHECK(empty.total_usd == 0.0);

  MethodDescriptor train_only;
  train_only.train = TrainWorkload{5.0, "A40 (RunPod)"};
  const CostReport t = method_cost_report(pricing, train_only);
  CHECK(t.train_usd == doctest::Approx(3.45));
  CHECK(t.query_usd == 0.0);
  CHECK(t.total_usd == doctest::Approx(3.45));
}

TEST_CASE("cost scales exactly linearly in queries, ensemble, and prices") {
  PricingTable pricing = reference_pricing();
  QueryWorkload w;
  w.n_queries = 500;
  w.n_shots = 2;
  w.ensemble_size = 7;
  w.profile = samsum_profile();
  const double base = query_cost(pricing, "GPT-4-turbo", w);

  QueryWorkload doubled = w;
  doubled.n_queries = 1000;
  CHECK(query_cost(pricing, "GPT-4-turbo", doubled) ==
        doctest::Approx(2.0 * base).epsilon(1e-12));

  QueryWorkload tripled = w;
  tripled.ensemble_size = 21;
  CHECK(query_cost(pricing, "GPT-4-turbo", tripled) ==
        doctest::Approx(3.0 * base).epsilon(1e-12));

  PricingTable scaled = pricing;
  scaled.models["GPT-4-turbo"] = {50.0, 150.0};
  CHECK(query_cost(scaled, "GPT-4-turbo", w) ==
        doctest::Approx(5.0 * base).epsilon(1e-12));
}

TEST_CASE("unknown models and hardware raise lookup errors") {
  const PricingTable pricing = reference_pricing();
  QueryWorkload w;
  w.profile = samsum_profile();
  CHECK_THROWS_AS(query_cost(pricing, "GPT-9", w), LookupError);
  CHECK_THROWS_AS(train_cost(pricing, TrainWorkload{1.0, "B300"}),
                  LookupError);
}

TEST_CASE("rounding happens only at display time") {
  CHECK(round_cents(3.32954) == doctest::Approx(3.33));
  CHECK(round_cents(665.908) == doctest::Approx(665.91));
  CHECK(round_cents(-1.006) == doctest::Approx(-1.01));
  CHECK(round_cents(0.004) == doctest::Approx(0.0));
}

TEST_CASE("validation rejects negative workloads") {
  QueryWorkload w;
  w.n_queries = 0;
  CHECK_THROWS_AS(validate(w), InvalidInputError);
  TrainWorkload t{-1.0, "A40 (RunPod)"};
  CHECK_THROWS_AS(validate(t), InvalidInputError);
  TokenProfile p{-5.0, 0.0, 0.0};
  CHECK_THROWS_AS(validate(p), InvalidInputError);
}
