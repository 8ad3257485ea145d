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

#ifndef DPWB_DPSGD_HPP
#define DPWB_DPSGD_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

#include "dpwb/accounting.hpp"
#include "dpwb/random.hpp"

// Minimal differentially private SGD on convex toy models (logistic and
// linear regression). The point of this trainer is to exercise per-sample
// clipping, calibrated noise and the accountant end to end, not to learn
// representations.
namespace dpwb::dpsgd {

enum class Loss { kLogistic, kSquared };

struct ToyDataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd targets;   // n (binary 0/1 for logistic)

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  void validate() const;
};

// Parses CSV with a header row; the last column is the target.
ToyDataset load_csv_dataset(std::istream& in);
ToyDataset load_csv_dataset_file(const std::string& path);

struct DpSgdConfig {
  Loss loss = Loss::kLogistic;
  double clip_norm = 1.0;         // C
  double noise_multiplier = 0.0;  // sigma; 0 disables noise (non-private)
  double sampling_rate = 1.0;     // Poisson rate q in (0, 1]
  int steps = 1;
  double learning_rate = 0.1;
  acct::DeltaConvention delta = acct::DeltaConvention::one_over_n();

  void validate() const;
};

double per_example_loss(Loss loss, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& x, double y);

// Exact analytic gradient of the per-example loss:
//   logistic: (sigmoid(w.x) - y) * x
//   squared:  (w.x - y) * x     (loss 0.5 * (w.x - y)^2)
Eigen::VectorXd per_sample_gradient(Loss loss, const Eigen::VectorXd& weights,
                                    const Eigen::VectorXd& x, double y);

// gradient * min(1, clip_norm / ||gradient||_2)
Eigen::VectorXd clip(Eigen::VectorXd gradient, double clip_norm);

struct StepOutcome {
  Eigen::VectorXd weights;
  int batch_size = 0;  // realized Poisson batch; 0 means a noise-only step
};

// One DPSGD step: Poisson-samples examples at rate q, sums clipped
// per-sample gradients, adds N(0, (sigma * C)^2) per coordinate, divides by
// the expected batch size q*n (keeping the sensitivity analysis exact), and
// applies the gradient step. Appends one subsampled-Gaussian RDP entry to
// the ledger (none when sigma = 0, which has no privacy to account).
StepOutcome dpsgd_step(const Eigen::VectorXd& weights,
                       const ToyDataset& dataset, const DpSgdConfig& config,
                       RngStream& rng, acct::PrivacyLedger& ledger);

struct TrainResult {
  Eigen::VectorXd weights;
  double epsilon = 0.0;  // +infinity when sigma = 0
  double delta = 0.0;
  double alpha_star = 0.0;
  acct::PrivacyLedger ledger;
};

// Runs config.steps steps from zero weights and reports the accountant
// epsilon at delta (1/n by default). Throws TrainingError on divergence.
TrainResult train(const ToyDataset& dataset, const DpSgdConfig& config,
                  RngStream& rng);

// Fraction of correct sign/threshold predictions for logistic weights.
double classification_accuracy(const Eigen::VectorXd& weights,
                               const ToyDataset& dataset);

}  // namespace dpwb::dpsgd

#endif  // DPWB_DPSGD_HPP
