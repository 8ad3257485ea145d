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

#ifndef DPWB_IO_HPP
#define DPWB_IO_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpwb/accounting.hpp"
#include "dpwb/costmodel.hpp"
#include "dpwb/dpsgd.hpp"
#include "dpwb/simharness.hpp"

// JSON/CSV schemas for the shipped fixtures, CLI configs and outputs, plus
// run manifests. Schema documentation lives in docs/config-schemas.md.
namespace dpwb::io {

// Locale-independent shortest round-trip formatting; infinities print as
// "inf"/"-inf".
std::string format_double(double v);

// Parses a JSON number or the strings "inf"/"Infinity" (any case).
double parse_double_or_inf(const nlohmann::json& j, const std::string& field);

// Writes content to a temporary file in the target directory and renames it
// over the destination.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);
nlohmann::json load_json_file(const std::string& path);

// --- fixtures and configs ---------------------------------------------------

cost::PricingTable parse_pricing(const nlohmann::json& j);
std::map<std::string, cost::TokenProfile> parse_token_profiles(
    const nlohmann::json& j);

// Workload JSON (see docs). The profile may be inline or a dataset name to
// be resolved against a token-profile table.
cost::MethodDescriptor parse_workload(
    const nlohmann::json& j,
    const std::map<std::string, cost::TokenProfile>* profiles);

sim::ScenarioConfig parse_scenario(const nlohmann::json& j);

dpsgd::DpSgdConfig parse_dpsgd_config(const nlohmann::json& j);

// --- outputs ----------------------------------------------------------------

nlohmann::json rdp_curve_to_json(const acct::RdpCurve& curve);
acct::RdpCurve parse_rdp_curve(const nlohmann::json& j);

// Ledger entries as (mechanism, epsilon, delta, alpha_star, metadata).
// RDP entries are converted at `delta_for_rdp`, which is required when the
// ledger contains any.
nlohmann::json ledger_to_json(const acct::PrivacyLedger& ledger,
                              std::optional<double> delta_for_rdp);

// CSV with header epsilon,utility_mean,utility_std,trials,abstain_rate and
// one row per grid point. '.' decimal separator, LF line endings.
std::string tradeoff_curve_csv(const sim::TradeoffCurve& curve);

struct RunManifest {
  std::string command;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string output_path;
  std::string tool_version;
  double duration_seconds = 0.0;
};

// Written atomically as <output_path>.manifest.json.
void write_manifest(const RunManifest& manifest);

}  // namespace dpwb::io

#endif  // DPWB_IO_HPP
