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

// Command-line front end. Exit codes: 0 success, 2 configuration or
// validation error, 3 calibration failure, 4 numerical/training failure.
// All randomness flows from --seed; outputs are deterministic given flags
// and seed, and every file output gets a .manifest.json sidecar.

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpwb/aggregation.hpp"
#include "dpwb/costmodel.hpp"
#include "dpwb/dpsgd.hpp"
#include "dpwb/errors.hpp"
#include "dpwb/io.hpp"
#include "dpwb/mechanisms.hpp"
#include "dpwb/simharness.hpp"
#include "dpwb/version.hpp"

namespace {

using dpwb::CandidateDomain;
using dpwb::CountVector;
using dpwb::PrivacyBudget;
using dpwb::RngStream;
using dpwb::ScoreVector;
using dpwb::Sensitivity;
using dpwb::VoteHistogram;

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

std::vector<double> parse_double_list(const std::string& csv,
                                      const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw dpwb::InvalidInputError("flag " + flag +
                                    ": not a number: '" + cell + "'");
    }
  }
  if (values.empty()) {
    throw dpwb::InvalidInputError("flag " + flag + ": empty list");
  }
  return values;
}

VoteHistogram histogram_from_flag(const std::string& csv) {
  const std::vector<double> raw = parse_double_list(csv, "--counts");
  const Eigen::Index n = static_cast<Eigen::Index>(raw.size());
  CountVector counts(n);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0 || raw[i] != std::floor(raw[i])) {
      throw dpwb::InvalidInputError(
          "flag --counts: entries must be nonnegative integers");
    }
    counts[static_cast<Eigen::Index>(i)] = static_cast<std::int64_t>(raw[i]);
  }
  return VoteHistogram(CandidateDomain(n), std::move(counts));
}

void emit(const std::string& content, const std::string& out_path,
          const dpwb::io::RunManifest& manifest) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  dpwb::io::atomic_write_file(out_path, content);
  dpwb::io::write_manifest(manifest);
}

struct MechSampleOptions {
  std::string mechanism;
  std::string scores;
  std::string counts;
  std::string values;
  double sensitivity = 1.0;
  double epsilon = 0.0;
  double sigma = 0.0;
  double scale = 0.0;
  double delta = 0.0;
  int k = 1;
  int kbar = 1;
  std::int64_t n = 1;
  std::uint64_t seed = 0;
  std::string out;
};

std::string join_indices(const std::vector<Eigen::Index>& idx) {
  std::string line;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i > 0) line += ',';
    line += std::to_string(idx[i]);
  }
  return line;
}

int run_mech_sample(const MechSampleOptions& opt) {
  Timer timer;
  if (opt.n < 0) throw dpwb::InvalidInputError("flag --n: must be >= 0");
  const RngStream root(opt.seed);
  std::string out;

  const auto sample_lines = [&](auto&& one_sample) {
    for (std::int64_t i = 0; i < opt.n; ++i) {
      RngStream rng = root.substream(static_cast<std::uint64_t>(i));
      out += one_sample(rng);
      out += '\n';
    }
  };

  if (opt.mechanism == "em" || opt.mechanism == "gumbel-topk") {
    if (opt.scores.empty()) {
      throw dpwb::InvalidInputError("flag --scores: required for " +
                                    opt.mechanism);
    }
    const std::vector<double> raw = parse_double_list(opt.scores, "--scores");
    Eigen::VectorXd s(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
      s[static_cast<Eigen::Index>(i)] = raw[i];
    }
    const ScoreVector scores(CandidateDomain(s.size()), s);
    const Sensitivity sens(opt.sensitivity);
    if (opt.mechanism == "em") {
      sample_lines([&](RngStream& rng) {
        return std::to_string(
            dpwb::mech::exponential_mechanism(scores, sens, opt.epsilon, rng));
      });
    } else {
      sample_lines([&](RngStream& rng) {
        return join_indices(
            dpwb::mech::gumbel_topk(scores, sens, opt.epsilon, opt.k, rng));
      });
    }
  } else if (opt.mechanism == "rnm-laplace" || opt.mechanism == "rnm-gaussian" ||
             opt.mechanism == "gnmax") {
    const VoteHistogram hist = histogram_from_flag(opt.counts);
    if (opt.mechanism == "gnmax") {
      sample_lines([&](RngStream& rng) {
        return std::to_string(dpwb::mech::gnmax(hist, opt.sigma, rng));
      });
    } else if (opt.mechanism == "rnm-laplace") {
      const double scale = opt.scale > 0.0 ? opt.scale : 1.0 / opt.epsilon;
      sample_lines([&](RngStream& rng) {
        return std::to_string(dpwb::mech::report_noisy_max(
            hist, dpwb::mech::RnmNoise::kLaplace, scale, rng));
      });
    } else {
      sample_lines([&](RngStream& rng) {
        return std::to_string(dpwb::mech::report_noisy_max(
            hist, dpwb::mech::RnmNoise::kGaussian, opt.sigma, rng));
      });
    }
  } else if (opt.mechanism == "ptr-topk") {
    const VoteHistogram hist = histogram_from_flag(opt.counts);
    const PrivacyBudget budget(opt.epsilon, opt.delta);
    sample_lines([&](RngStream& rng) -> std::string {
      const auto outcome = dpwb::mech::ptr_topk(hist, opt.k, budget, rng);
      if (std::holds_alternative<dpwb::mech::Abstain>(outcome)) {
        return "abstain";
      }
      return join_indices(std::get<std::vector<Eigen::Index>>(outcome));
    });
  } else if (opt.mechanism == "lda") {
    const VoteHistogram hist = histogram_from_flag(opt.counts);
    const PrivacyBudget budget(opt.epsilon, opt.delta);
    sample_lines([&](RngStream& rng) -> std::string {
      const auto outcome =
          dpwb::mech::limited_domain_max(hist, opt.kbar, budget, rng);
      if (std::holds_alternative<dpwb::mech::Bottom>(outcome)) {
        return "bottom";
      }
      return std::to_string(std::get<Eigen::Index>(outcome));
    });
  } else if (opt.mechanism == "gaussian-noise") {
    if (opt.values.empty()) {
      throw dpwb::InvalidInputError(
          "flag --values: required for gaussian-noise");
    }
    const std::vector<double> raw = parse_double_list(opt.values, "--values");
    Eigen::VectorXd v(static_cast<Eigen::Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = raw[i];
    }
    sample_lines([&](RngStream& rng) {
      const Eigen::VectorXd noisy =
          dpwb::mech::gaussian_noise(v, opt.sigma, rng);
      std::string line;
      for (Eigen::Index i = 0; i < noisy.size(); ++i) {
        if (i > 0) line += ',';
        line += dpwb::io::format_double(noisy[i]);
      }
      return line;
    });
  } else {
    throw dpwb::InvalidInputError(
        "flag --mech: unknown mechanism '" + opt.mechanism + "'");
  }

  emit(out, opt.out,
       dpwb::io::RunManifest{"mech sample", {}, opt.seed, opt.out,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

int run_account_calibrate(double eps, double delta, double q, int steps,
                          const std::string& out_path) {
  Timer timer;
  const double sigma = dpwb::acct::calibrate_sigma(eps, delta, q, steps);
  const dpwb::acct::EpsilonReport report = dpwb::acct::to_eps_delta(
      dpwb::acct::accountant_curve(sigma, q, steps), delta);
  nlohmann::json j;
  j["sigma"] = sigma;
  j["epsilon"] = report.epsilon;
  j["alpha_star"] = report.alpha_star;
  j["target_epsilon"] = eps;
  j["delta"] = delta;
  j["q"] = q;
  j["steps"] = steps;
  emit(j.dump(2) + "\n", out_path,
       dpwb::io::RunManifest{"account calibrate", {}, 0, out_path,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

int run_account_convert(double sigma, double delta, double q, int steps,
                        const std::string& curve_path,
                        const std::string& out_path) {
  Timer timer;
  std::vector<std::string> configs;
  dpwb::acct::EpsilonReport report;
  bool dropped = false;
  if (!curve_path.empty()) {
    configs.push_back(curve_path);
    const dpwb::acct::RdpCurve curve =
        dpwb::io::parse_rdp_curve(dpwb::io::load_json_file(curve_path));
    report = dpwb::acct::to_eps_delta(curve, delta);
  } else {
    const dpwb::acct::RdpCurve curve = dpwb::acct::accountant_curve(
        sigma, q, steps, dpwb::acct::default_rdp_orders(), &dropped);
    report = dpwb::acct::to_eps_delta(curve, delta);
  }
  if (dropped) {
    std::cerr << "note: non-integer orders dropped for the subsampled "
                 "accountant\n";
  }
  nlohmann::json j;
  j["epsilon"] = report.epsilon;
  j["alpha_star"] = report.alpha_star;
  j["delta"] = delta;
  emit(j.dump(2) + "\n", out_path,
       dpwb::io::RunManifest{"account convert", configs, 0, out_path,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

int run_account_compose(const std::vector<std::string>& curve_paths,
                        std::optional<double> delta,
                        const std::string& out_path) {
  Timer timer;
  std::vector<dpwb::acct::RdpCurve> curves;
  for (const std::string& path : curve_paths) {
    curves.push_back(
        dpwb::io::parse_rdp_curve(dpwb::io::load_json_file(path)));
  }
  const dpwb::acct::RdpCurve total = dpwb::acct::compose(curves);
  nlohmann::json j = dpwb::io::rdp_curve_to_json(total);
  if (delta.has_value()) {
    const dpwb::acct::EpsilonReport report =
        dpwb::acct::to_eps_delta(total, *delta);
    j["epsilon"] = report.epsilon;
    j["alpha_star"] = report.alpha_star;
    j["delta"] = *delta;
  }
  emit(j.dump(2) + "\n", out_path,
       dpwb::io::RunManifest{"account compose", curve_paths, 0, out_path,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

int run_sim(const std::string& scenario_path, std::uint64_t seed,
            const std::string& out_path, int threads) {
  Timer timer;
  const dpwb::sim::ScenarioConfig scenario =
      dpwb::io::parse_scenario(dpwb::io::load_json_file(scenario_path));
  const RngStream rng(seed);
  const dpwb::sim::TradeoffCurve curve =
      scenario.task == dpwb::sim::SimTask::kClassification
          ? dpwb::sim::simulate_classification(scenario, rng, threads)
          : dpwb::sim::simulate_generation(scenario, rng, threads);
  emit(dpwb::io::tradeoff_curve_csv(curve), out_path,
       dpwb::io::RunManifest{"sim", {scenario_path}, seed, out_path,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

int run_cost(const std::string& pricing_path, const std::string& workload_path,
             const std::string& profiles_path, const std::string& out_path) {
  Timer timer;
  const dpwb::cost::PricingTable pricing =
      dpwb::io::parse_pricing(dpwb::io::load_json_file(pricing_path));
  std::map<std::string, dpwb::cost::TokenProfile> profiles;
  if (!profiles_path.empty()) {
    profiles = dpwb::io::parse_token_profiles(
        dpwb::io::load_json_file(profiles_path));
  }
  const dpwb::cost::MethodDescriptor descriptor = dpwb::io::parse_workload(
      dpwb::io::load_json_file(workload_path),
      profiles_path.empty() ? nullptr : &profiles);
  const dpwb::cost::CostReport report =
      dpwb::cost::method_cost_report(pricing, descriptor);

  nlohmann::json j;
  j["train_usd"] = dpwb::cost::round_cents(report.train_usd);
  j["query_usd"] = dpwb::cost::round_cents(report.query_usd);
  j["total_usd"] = dpwb::cost::round_cents(report.total_usd);
  j["exact"] = {{"train_usd", report.train_usd},
                {"query_usd", report.query_usd},
                {"total_usd", report.total_usd}};
  if (descriptor.query.has_value()) {
    const double per_query =
        report.query_usd / static_cast<double>(descriptor.query->n_queries);
    j["per_query_usd"] = std::round(per_query * 1e6) / 1e6;
    const dpwb::cost::TokenCounts tokens =
        dpwb::cost::per_query_tokens(*descriptor.query);
    j["tokens_per_call"] = {{"input", tokens.input_tokens},
                            {"output", tokens.output_tokens}};
    j["model"] = descriptor.model;
  }
  std::vector<std::string> configs{pricing_path, workload_path};
  if (!profiles_path.empty()) configs.push_back(profiles_path);
  emit(j.dump(2) + "\n", out_path,
       dpwb::io::RunManifest{"cost estimate", configs, 0, out_path,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

int run_dpsgd(const std::string& data_path, const std::string& config_path,
              std::uint64_t seed, const std::string& out_path) {
  Timer timer;
  const dpwb::dpsgd::ToyDataset dataset =
      dpwb::dpsgd::load_csv_dataset_file(data_path);
  const dpwb::dpsgd::DpSgdConfig config =
      dpwb::io::parse_dpsgd_config(dpwb::io::load_json_file(config_path));
  RngStream rng(seed);
  const dpwb::dpsgd::TrainResult result =
      dpwb::dpsgd::train(dataset, config, rng);

  nlohmann::json j;
  std::vector<double> weights(result.weights.data(),
                              result.weights.data() + result.weights.size());
  j["weights"] = weights;
  if (std::isinf(result.epsilon)) {
    j["epsilon"] = nullptr;
    j["private"] = false;
  } else {
    j["epsilon"] = result.epsilon;
    j["private"] = true;
    j["alpha_star"] = result.alpha_star;
  }
  j["delta"] = result.delta;
  j["steps"] = config.steps;
  j["ledger"] = dpwb::io::ledger_to_json(
      result.ledger, config.noise_multiplier > 0.0
                         ? std::optional<double>(result.delta)
                         : std::nullopt);
  emit(j.dump(2) + "\n", out_path,
       dpwb::io::RunManifest{"dpsgd", {data_path, config_path}, seed, out_path,
                             dpwb::kVersion, timer.seconds()});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differential privacy workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dpwb::kVersion);

  // mech sample
  MechSampleOptions mech_opt;
  CLI::App* mech = app.add_subcommand("mech", "mechanism sampling");
  mech->require_subcommand(1);
  CLI::App* sample = mech->add_subcommand("sample", "draw mechanism samples");
  sample->add_option("--mech", mech_opt.mechanism,
                     "em|gumbel-topk|rnm-laplace|rnm-gaussian|gnmax|ptr-topk|"
                     "lda|gaussian-noise")
      ->required();
  sample->add_option("--scores", mech_opt.scores, "comma-separated scores");
  sample->add_option("--counts", mech_opt.counts, "comma-separated counts");
  sample->add_option("--values", mech_opt.values, "comma-separated values");
  sample->add_option("--sens", mech_opt.sensitivity, "score sensitivity");
  sample->add_option("--eps", mech_opt.epsilon, "epsilon");
  sample->add_option("--sigma", mech_opt.sigma, "gaussian noise stddev");
  sample->add_option("--scale", mech_opt.scale, "laplace noise scale");
  sample->add_option("--delta", mech_opt.delta, "delta");
  sample->add_option("--k", mech_opt.k, "top-k size");
  sample->add_option("--kbar", mech_opt.kbar, "restricted domain size");
  sample->add_option("--n", mech_opt.n, "number of samples")->required();
  sample->add_option("--seed", mech_opt.seed, "root seed")->required();
  sample->add_option("--out", mech_opt.out, "output file")->required();

  // account
  CLI::App* account = app.add_subcommand("account", "privacy accounting");
  account->require_subcommand(1);
  double acc_eps = 8.0, acc_delta = 1e-5, acc_q = 1.0, acc_sigma = 1.0;
  int acc_steps = 1;
  std::string acc_out, acc_curve;
  std::vector<std::string> acc_curves;
  std::optional<double> compose_delta;

  CLI::App* calibrate =
      account->add_subcommand("calibrate", "find sigma for a target epsilon");
  calibrate->add_option("--eps", acc_eps, "target epsilon")->required();
  calibrate->add_option("--delta", acc_delta, "delta")->required();
  calibrate->add_option("--q", acc_q, "sampling rate")->required();
  calibrate->add_option("--steps", acc_steps, "steps")->required();
  calibrate->add_option("--out", acc_out, "output file");

  CLI::App* convert =
      account->add_subcommand("convert", "RDP to (epsilon, delta)");
  convert->add_option("--sigma", acc_sigma, "noise multiplier");
  convert->add_option("--delta", acc_delta, "delta")->required();
  convert->add_option("--q", acc_q, "sampling rate");
  convert->add_option("--steps", acc_steps, "steps");
  convert->add_option("--curve", acc_curve, "RDP curve JSON file");
  convert->add_option("--out", acc_out, "output file");

  CLI::App* compose_cmd =
      account->add_subcommand("compose", "sum RDP curves pointwise");
  compose_cmd->add_option("--curves", acc_curves, "RDP curve JSON files")
      ->required();
  compose_cmd->add_option("--delta", compose_delta,
                          "also convert at this delta");
  compose_cmd->add_option("--out", acc_out, "output file");

  // sim
  std::string sim_scenario, sim_out;
  std::uint64_t sim_seed = 0;
  int sim_threads = 1;
  CLI::App* sim_cmd = app.add_subcommand("sim", "trade-off simulation");
  sim_cmd->add_option("--scenario", sim_scenario, "scenario JSON")->required();
  sim_cmd->add_option("--seed", sim_seed, "root seed")->required();
  sim_cmd->add_option("--out", sim_out, "output CSV")->required();
  sim_cmd->add_option("--threads", sim_threads,
                      "parallel trial workers (results independent of N)");

  // cost
  std::string cost_pricing, cost_workload, cost_profiles, cost_out;
  CLI::App* cost_cmd = app.add_subcommand("cost", "cost model");
  cost_cmd->require_subcommand(1);
  CLI::App* estimate = cost_cmd->add_subcommand("estimate", "estimate costs");
  estimate->add_option("--pricing", cost_pricing, "pricing JSON")->required();
  estimate->add_option("--workload", cost_workload, "workload JSON")
      ->required();
  estimate->add_option("--profiles", cost_profiles,
                       "token profile JSON for named profiles");
  estimate->add_option("--out", cost_out, "output file");

  // dpsgd
  std::string sgd_data, sgd_config, sgd_out;
  std::uint64_t sgd_seed = 0;
  CLI::App* sgd_cmd = app.add_subcommand("dpsgd", "toy DPSGD trainer");
  sgd_cmd->add_option("--data", sgd_data, "dataset CSV")->required();
  sgd_cmd->add_option("--config", sgd_config, "config JSON")->required();
  sgd_cmd->add_option("--seed", sgd_seed, "root seed")->required();
  sgd_cmd->add_option("--out", sgd_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sample->parsed()) return run_mech_sample(mech_opt);
    if (calibrate->parsed()) {
      return run_account_calibrate(acc_eps, acc_delta, acc_q, acc_steps,
                                   acc_out);
    }
    if (convert->parsed()) {
      return run_account_convert(acc_sigma, acc_delta, acc_q, acc_steps,
                                 acc_curve, acc_out);
    }
    if (compose_cmd->parsed()) {
      return run_account_compose(acc_curves, compose_delta, acc_out);
    }
    if (sim_cmd->parsed()) {
      return run_sim(sim_scenario, sim_seed, sim_out, sim_threads);
    }
    if (estimate->parsed()) {
      return run_cost(cost_pricing, cost_workload, cost_profiles, cost_out);
    }
    if (sgd_cmd->parsed()) {
      return run_dpsgd(sgd_data, sgd_config, sgd_seed, sgd_out);
    }
  } catch (const dpwb::CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return 3;
  } catch (const dpwb::TrainingError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
