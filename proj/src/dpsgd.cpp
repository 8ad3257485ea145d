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

#include "dpwb/dpsgd.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dpwb/errors.hpp"

namespace dpwb::dpsgd {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void ToyDataset::validate() const {
  if (n() < 1) throw InvalidInputError("dataset needs >= 1 example");
  if (dim() < 1) throw InvalidInputError("dataset needs >= 1 feature");
  if (targets.size() != n()) {
    throw InvalidInputError("feature/target row mismatch");
  }
  if (!features.allFinite() || !targets.allFinite()) {
    throw InvalidInputError("dataset values must be finite");
  }
}

ToyDataset load_csv_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw InvalidInputError("CSV dataset is empty (missing header)");
  }
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidInputError("CSV cell is not a number: '" + cell + "'");
      }
    }
    if (row.size() < 2) {
      throw InvalidInputError("CSV rows need >= 1 feature and a target");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw InvalidInputError("CSV rows have inconsistent column counts");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInputError("CSV dataset has no data rows");

  ToyDataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(width - 1));
  data.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < width; ++j) {
      data.features(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    data.targets[static_cast<Eigen::Index>(i)] = rows[i][width - 1];
  }
  data.validate();
  return data;
}

ToyDataset load_csv_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open dataset file: " + path);
  return load_csv_dataset(in);
}

void DpSgdConfig::validate() const {
  if (!(clip_norm > 0.0)) throw InvalidInputError("clip_norm must be > 0");
  if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
    throw InvalidInputError("noise_multiplier must be finite and >= 0");
  }
  if (!(sampling_rate > 0.0) || !(sampling_rate <= 1.0)) {
    throw InvalidInputError("sampling_rate must lie in (0, 1]");
  }
  if (steps < 1) throw InvalidInputError("steps must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw InvalidInputError("learning_rate must be > 0");
  }
}

double per_example_loss(Loss loss, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& x, double y) {
  if (weights.size() != x.size()) {
    throw InvalidInputError("weight/feature dimension mismatch");
  }
  const double z = weights.dot(x);
  if (loss == Loss::kSquared) {
    const double r = z - y;
    return 0.5 * r * r;
  }
  // Numerically stable -y*log(s) - (1-y)*log(1-s).
  const double softplus = z >= 0.0 ? z + std::log1p(std::exp(-z))
                                   : std::log1p(std::exp(z));
  return softplus - y * z;
}

Eigen::VectorXd per_sample_gradient(Loss loss, const Eigen::VectorXd& weights,
                                    const Eigen::VectorXd& x, double y) {
  if (weights.size() != x.size()) {
    throw InvalidInputError("weight/feature dimension mismatch");
  }
  const double z = weights.dot(x);
  const double residual = loss == Loss::kLogistic ? sigmoid(z) - y : z - y;
  return residual * x;
}

Eigen::VectorXd clip(Eigen::VectorXd gradient, double clip_norm) {
  if (!(clip_norm > 0.0)) throw InvalidInputError("clip_norm must be > 0");
  // stableNorm: plain norm() overflows once entries pass ~1e154 and would
  // silently zero the gradient here.
  const double norm = gradient.stableNorm();
  if (norm > clip_norm) gradient *= clip_norm / norm;
  return gradient;
}

StepOutcome dpsgd_step(const Eigen::VectorXd& weights,
                       const ToyDataset& dataset, const DpSgdConfig& config,
                       RngStream& rng, acct::PrivacyLedger& ledger) {
  config.validate();
  dataset.validate();
  if (weights.size() != dataset.dim()) {
    throw InvalidInputError("weight/feature dimension mismatch");
  }

  const double q = config.sampling_rate;
  const double c = config.clip_norm;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(weights.size());
  int batch = 0;
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    if (rng.next_open01() >= q) continue;  // q = 1 always includes
    const Eigen::VectorXd g = clip(
        per_sample_gradient(config.loss, weights,
                            dataset.features.row(i).transpose(),
                            dataset.targets[i]),
        c);
    if (g.stableNorm() > c * (1.0 + 1e-12)) {
      throw TrainingError("clipped gradient exceeded the clip norm");
    }
    sum += g;
    ++batch;
  }

  if (config.noise_multiplier > 0.0) {
    const double stddev = config.noise_multiplier * c;
    for (Eigen::Index d = 0; d < sum.size(); ++d) {
      sum[d] += rng.next_normal(stddev);
    }
    ledger.charge_rdp(
        "subsampled_gaussian",
        acct::accountant_curve(config.noise_multiplier, q, 1),
        {{"sigma", config.noise_multiplier}, {"q", q}});
  }
  // An empty Poisson batch still takes a (noise-only) step.

  const double expected_batch = q * static_cast<double>(dataset.n());
  StepOutcome out;
  out.weights = weights - config.learning_rate * (sum / expected_batch);
  out.batch_size = batch;
  return out;
}

TrainResult train(const ToyDataset& dataset, const DpSgdConfig& config,
                  RngStream& rng) {
  config.validate();
  dataset.validate();

  TrainResult result;
  result.weights = Eigen::VectorXd::Zero(dataset.dim());
  for (int s = 0; s < config.steps; ++s) {
    RngStream step_rng = rng.substream(static_cast<std::uint64_t>(s));
    StepOutcome out =
        dpsgd_step(result.weights, dataset, config, step_rng, result.ledger);
    if (!out.weights.allFinite()) {
      throw TrainingError("training diverged at step " + std::to_string(s));
    }
    result.weights = std::move(out.weights);
  }

  result.delta = config.delta.resolve(dataset.n());
  if (config.noise_multiplier > 0.0) {
    const acct::EpsilonReport report = result.ledger.epsilon_at(result.delta);
    result.epsilon = report.epsilon;
    result.alpha_star = report.alpha_star;
  } else {
    result.epsilon = std::numeric_limits<double>::infinity();
    result.alpha_star = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

double classification_accuracy(const Eigen::VectorXd& weights,
                               const ToyDataset& dataset) {
  dataset.validate();
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    const double z = weights.dot(dataset.features.row(i).transpose());
    const double predicted = z >= 0.0 ? 1.0 : 0.0;
    if (predicted == dataset.targets[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.n());
}

}  // namespace dpwb::dpsgd
