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

#include "dpwb/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpwb/errors.hpp"

namespace dpwb::io {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw InvalidInputError("config field '" + field + "': " + why);
}

double require_number(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_number()) {
    bad_field(field, "expected a number");
  }
  return j[field].get<double>();
}

std::int64_t require_integer(const nlohmann::json& j,
                             const std::string& field) {
  if (!j.contains(field) || !j[field].is_number_integer()) {
    bad_field(field, "expected an integer");
  }
  return j[field].get<std::int64_t>();
}

std::string require_string(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_string()) {
    bad_field(field, "expected a string");
  }
  return j[field].get<std::string>();
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw InvalidInputError("number formatting failed");
  return std::string(buf, ptr);
}

double parse_double_or_inf(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == "inf" || s == "infinity") {
      return std::numeric_limits<double>::infinity();
    }
  }
  bad_field(field, "expected a number or \"inf\"");
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const fs::path target(path);
  const fs::path dir =
      target.has_parent_path() ? target.parent_path() : fs::path(".");
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write file: " + tmp.string());
    out << content;
    if (!out.flush()) {
      throw InvalidInputError("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

nlohmann::json load_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInputError("invalid JSON in " + path + ": " + e.what());
  }
}

cost::PricingTable parse_pricing(const nlohmann::json& j) {
  cost::PricingTable table;
  if (!j.contains("models") || !j["models"].is_object()) {
    bad_field("models", "expected an object of model prices");
  }
  for (const auto& [name, price] : j["models"].items()) {
    table.models[name] = cost::ModelPrice{
        require_number(price, "input_per_million"),
        require_number(price, "output_per_million")};
  }
  if (j.contains("hardware")) {
    for (const auto& [name, entry] : j["hardware"].items()) {
      table.hardware_per_hour[name] = require_number(entry, "per_hour");
    }
  }
  cost::validate(table);
  return table;
}

std::map<std::string, cost::TokenProfile> parse_token_profiles(
    const nlohmann::json& j) {
  if (!j.contains("profiles") || !j["profiles"].is_object()) {
    bad_field("profiles", "expected an object of token profiles");
  }
  std::map<std::string, cost::TokenProfile> profiles;
  for (const auto& [name, entry] : j["profiles"].items()) {
    cost::TokenProfile p;
    p.avg_input_tokens = require_number(entry, "avg_input_tokens");
    p.avg_output_tokens = require_number(entry, "avg_output_tokens");
    if (entry.contains("instruction_tokens")) {
      p.instruction_tokens = require_number(entry, "instruction_tokens");
    }
    cost::validate(p);
    profiles[name] = p;
  }
  return profiles;
}

cost::MethodDescriptor parse_workload(
    const nlohmann::json& j,
    const std::map<std::string, cost::TokenProfile>* profiles) {
  cost::MethodDescriptor descriptor;
  if (j.contains("model")) descriptor.model = require_string(j, "model");

  if (j.contains("query")) {
    const nlohmann::json& q = j["query"];
    cost::QueryWorkload workload;
    workload.n_queries = require_integer(q, "n_queries");
    workload.n_shots = static_cast<int>(require_integer(q, "n_shots"));
    workload.ensemble_size =
        static_cast<int>(require_integer(q, "ensemble_size"));
    if (!q.contains("profile")) bad_field("query.profile", "missing");
    if (q["profile"].is_string()) {
      const std::string name = q["profile"].get<std::string>();
      if (profiles == nullptr) {
        bad_field("query.profile",
                  "named profile '" + name +
                      "' needs a token-profile table (--profiles)");
      }
      const auto it = profiles->find(name);
      if (it == profiles->end()) {
        bad_field("query.profile", "unknown profile '" + name + "'");
      }
      workload.profile = it->second;
    } else {
      const nlohmann::json& p = q["profile"];
      workload.profile.avg_input_tokens =
          require_number(p, "avg_input_tokens");
      workload.profile.avg_output_tokens =
          require_number(p, "avg_output_tokens");
      if (p.contains("instruction_tokens")) {
        workload.profile.instruction_tokens =
            require_number(p, "instruction_tokens");
      }
    }
    cost::validate(workload);
    if (descriptor.model.empty()) {
      bad_field("model", "required when a query workload is present");
    }
    descriptor.query = workload;
  }

  if (j.contains("train")) {
    const nlohmann::json& t = j["train"];
    cost::TrainWorkload workload;
    workload.gpu_hours = require_number(t, "gpu_hours");
    workload.hardware = require_string(t, "hardware");
    cost::validate(workload);
    descriptor.train = workload;
  }
  return descriptor;
}

sim::ScenarioConfig parse_scenario(const nlohmann::json& j) {
  sim::ScenarioConfig scenario;

  const std::string task = require_string(j, "task");
  if (task == "classification") {
    scenario.task = sim::SimTask::kClassification;
  } else if (task == "generation") {
    scenario.task = sim::SimTask::kGeneration;
  } else {
    bad_field("task", "expected 'classification' or 'generation'");
  }

  const std::string mech = require_string(j, "mechanism");
  if (mech == "gnmax") {
    scenario.mechanism = sim::SimMechanism::kGnMax;
  } else if (mech == "rnm_laplace") {
    scenario.mechanism = sim::SimMechanism::kRnmLaplace;
  } else if (mech == "fewshotgen") {
    scenario.mechanism = sim::SimMechanism::kFewShotGen;
  } else if (mech == "ksa_gumbel") {
    scenario.mechanism = sim::SimMechanism::kKsaGumbel;
  } else if (mech == "ksa_ptr") {
    scenario.mechanism = sim::SimMechanism::kKsaPtr;
  } else {
    bad_field("mechanism",
              "expected gnmax, rnm_laplace, fewshotgen, ksa_gumbel or "
              "ksa_ptr");
  }

  scenario.n_teachers = static_cast<int>(require_integer(j, "n_teachers"));
  scenario.n_queries = static_cast<int>(require_integer(j, "n_queries"));
  scenario.trials = static_cast<int>(require_integer(j, "trials"));
  if (j.contains("delta")) scenario.delta = require_number(j, "delta");

  if (j.contains("epsilon_grid")) {
    if (!j["epsilon_grid"].is_array()) {
      bad_field("epsilon_grid", "expected an array");
    }
    scenario.epsilon_grid.clear();
    for (const auto& e : j["epsilon_grid"]) {
      scenario.epsilon_grid.push_back(parse_double_or_inf(e, "epsilon_grid"));
    }
  }

  if (!j.contains("teacher") || !j["teacher"].is_object()) {
    bad_field("teacher", "expected an object");
  }
  const nlohmann::json& t = j["teacher"];
  scenario.teacher.accuracy = require_number(t, "accuracy");
  scenario.teacher.n_classes =
      static_cast<Eigen::Index>(require_integer(t, "n_classes"));
  if (t.contains("confusion")) {
    const auto& rows = t["confusion"];
    if (!rows.is_array()) bad_field("teacher.confusion", "expected an array");
    scenario.teacher.error_model = sim::TeacherErrorModel::kConfusionMatrix;
    const Eigen::Index k = scenario.teacher.n_classes;
    scenario.teacher.confusion.resize(k, k);
    if (static_cast<Eigen::Index>(rows.size()) != k) {
      bad_field("teacher.confusion", "expected K rows");
    }
    for (Eigen::Index r = 0; r < k; ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != k) {
        bad_field("teacher.confusion", "expected K columns per row");
      }
      for (Eigen::Index c = 0; c < k; ++c) {
        scenario.teacher.confusion(r, c) = rows[r][c].get<double>();
      }
    }
  }

  if (j.contains("t_max")) {
    scenario.t_max = static_cast<int>(require_integer(j, "t_max"));
  }
  if (j.contains("vocab_size")) {
    scenario.vocab_size = static_cast<int>(require_integer(j, "vocab_size"));
  }
  if (j.contains("keywords_per_query")) {
    scenario.keywords_per_query =
        static_cast<int>(require_integer(j, "keywords_per_query"));
  }
  if (j.contains("keyword_pool")) {
    scenario.keyword_pool =
        static_cast<int>(require_integer(j, "keyword_pool"));
  }
  if (j.contains("select_k")) {
    scenario.select_k = static_cast<int>(require_integer(j, "select_k"));
  }
  if (j.contains("m_subsets")) {
    scenario.m_subsets = static_cast<int>(require_integer(j, "m_subsets"));
  }
  if (j.contains("mn_shots")) {
    scenario.mn_shots = static_cast<int>(require_integer(j, "mn_shots"));
  }

  scenario.validate();
  return scenario;
}

dpsgd::DpSgdConfig parse_dpsgd_config(const nlohmann::json& j) {
  dpsgd::DpSgdConfig config;
  const std::string loss = require_string(j, "loss");
  if (loss == "logistic") {
    config.loss = dpsgd::Loss::kLogistic;
  } else if (loss == "squared") {
    config.loss = dpsgd::Loss::kSquared;
  } else {
    bad_field("loss", "expected 'logistic' or 'squared'");
  }
  config.clip_norm = require_number(j, "clip_norm");
  config.noise_multiplier = require_number(j, "noise_multiplier");
  config.sampling_rate = require_number(j, "sampling_rate");
  config.steps = static_cast<int>(require_integer(j, "steps"));
  config.learning_rate = require_number(j, "learning_rate");

  if (j.contains("delta")) {
    const nlohmann::json& d = j["delta"];
    const std::string rule = require_string(d, "rule");
    if (rule == "one_over_n") {
      config.delta = acct::DeltaConvention::one_over_n();
    } else if (rule == "explicit") {
      config.delta =
          acct::DeltaConvention::explicit_delta(require_number(d, "value"));
    } else {
      bad_field("delta.rule", "expected 'one_over_n' or 'explicit'");
    }
  }
  config.validate();
  return config;
}

nlohmann::json rdp_curve_to_json(const acct::RdpCurve& curve) {
  nlohmann::json j;
  j["orders"] = curve.orders();
  std::vector<double> values(curve.values().data(),
                             curve.values().data() + curve.values().size());
  j["values"] = values;
  return j;
}

acct::RdpCurve parse_rdp_curve(const nlohmann::json& j) {
  if (!j.contains("orders") || !j.contains("values") ||
      !j["orders"].is_array() || !j["values"].is_array()) {
    bad_field("orders/values", "expected arrays");
  }
  std::vector<double> orders = j["orders"].get<std::vector<double>>();
  std::vector<double> values = j["values"].get<std::vector<double>>();
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = values[i];
  }
  return acct::RdpCurve(std::move(orders), std::move(v));
}

nlohmann::json ledger_to_json(const acct::PrivacyLedger& ledger,
                              std::optional<double> delta_for_rdp) {
  nlohmann::json entries = nlohmann::json::array();
  for (const acct::LedgerEntry& e : ledger.entries()) {
    nlohmann::json entry;
    entry["mechanism"] = e.mechanism;
    if (e.rdp.has_value()) {
      if (!delta_for_rdp.has_value()) {
        throw InvalidInputError(
            "ledger_to_json: RDP entries need a delta to convert at");
      }
      const acct::EpsilonReport r = acct::to_eps_delta(*e.rdp, *delta_for_rdp);
      entry["epsilon"] = r.epsilon;
      entry["delta"] = *delta_for_rdp;
      entry["alpha_star"] = r.alpha_star;
    } else {
      if (std::isinf(e.pure.epsilon)) {
        entry["epsilon"] = nullptr;  // non-private charge
      } else {
        entry["epsilon"] = e.pure.epsilon;
      }
      entry["delta"] = e.pure.delta;
      entry["alpha_star"] = nullptr;
    }
    entry["metadata"] = e.metadata;
    entries.push_back(entry);
  }
  return entries;
}

std::string tradeoff_curve_csv(const sim::TradeoffCurve& curve) {
  std::string out = "epsilon,utility_mean,utility_std,trials,abstain_rate\n";
  for (const sim::TradeoffPoint& p : curve.points) {
    out += format_double(p.epsilon);
    out += ',';
    out += format_double(p.utility_mean);
    out += ',';
    out += format_double(p.utility_std);
    out += ',';
    out += std::to_string(p.trials);
    out += ',';
    out += format_double(p.abstain_rate);
    out += '\n';
  }
  return out;
}

void write_manifest(const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["configs"] = manifest.config_paths;
  j["seed"] = manifest.seed;
  j["output"] = manifest.output_path;
  j["tool_version"] = manifest.tool_version;
  j["duration_seconds"] = manifest.duration_seconds;
  atomic_write_file(manifest.output_path + ".manifest.json", j.dump(2) + "\n");
}

}  // namespace dpwb::io
