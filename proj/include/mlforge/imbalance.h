// Copyright 2026 The mlforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MLFORGE_IMBALANCE_H_
#define MLFORGE_IMBALANCE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mlforge/matrix.h"
#include "mlforge/rng.h"

namespace mlforge {

struct LossConfig {
  double eta = 12.0;         // extra cost on positive labels, >= 1
  std::size_t neg_ratio = 5;  // negatives kept per positive in a column
  double skip_prob = 0.1;    // activation probability of all-negative columns
  double clamp_eps = 1e-7;   // probabilities clamped to [eps, 1 - eps]

  void Validate() const;
};

// Adaptive weight for a positive label after t consecutive mini-batches with
// the same column status: max(0.01, log10(10 / (0.01 + t))).
double PositiveWeight(std::uint64_t t);
// Negative counterpart: max(0.01, log10(10 / (8 + t))).
double NegativeWeight(std::uint64_t t);

struct ColumnWeights {
  double positive = 0.0;
  double negative = 0.0;
  std::uint64_t t = 0;
};

// Per-category run-length counter. A column's status for a mini-batch is 1
// when any row in the batch is positive for it and 0 otherwise; t resets to
// 1 whenever the status flips (or on the first batch) and increments while
// it repeats.
class AdaptiveWeightState {
 public:
  AdaptiveWeightState() = default;
  explicit AdaptiveWeightState(std::size_t categories)
      : prev_status_(categories), t_(categories, 0) {}

  std::size_t size() const { return t_.size(); }
  std::optional<bool> prev_status(std::size_t j) const { return prev_status_.at(j); }
  std::uint64_t t(std::size_t j) const { return t_.at(j); }

  ColumnWeights Update(std::size_t j, bool has_positive);

  // Updates every column from the raw labels of one mini-batch.
  std::vector<ColumnWeights> ObserveBatch(const BinaryMatrix& labels);

  // Restores a saved state (checkpoint path).
  void Set(std::size_t j, std::optional<bool> prev_status, std::uint64_t t);

  friend bool operator==(const AdaptiveWeightState&,
                         const AdaptiveWeightState&) = default;

 private:
  std::vector<std::optional<bool>> prev_status_;
  std::vector<std::uint64_t> t_;
};

// r(i,j) = positive weight of column j when labels(i,j) = 1, negative weight
// otherwise.
Matrix WeightMatrix(const BinaryMatrix& labels,
                    const std::vector<ColumnWeights>& columns);

struct BatchLabels {
  BinaryMatrix labels;  // n x m, 0/1
  Matrix probs;         // n x m, sigmoid outputs
};

struct LossSum {
  double loss_sum = 0.0;
  Matrix grad_sum;  // d(loss_sum)/d(logit), n x m
  std::size_t active = 0;
};

// Unnormalized weighted cross entropy over active entries:
//   sum r * [-eta * y * ln p - (1 - y) * ln(1 - p)]
// together with its gradient with respect to the pre-sigmoid logits.
LossSum WeightedBceSum(const BatchLabels& batch, const Matrix& weights,
                       const LossConfig& config, const BinaryMatrix& active_mask);

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;
  std::size_t active = 0;
};

// WeightedBceSum divided by the number of active entries. With a full mask
// this is the 1/m-per-image loss averaged over the batch.
LossResult WeightedBce(const BatchLabels& batch, const Matrix& weights,
                       const LossConfig& config, const BinaryMatrix& active_mask);

// Per column: with p > 0 positives, all positives plus min(ratio * p, #neg)
// negatives drawn uniformly without replacement are active; a column with no
// positives is fully active with probability skip_prob, else inactive.
BinaryMatrix DownsampleBatch(const BinaryMatrix& labels, std::size_t ratio,
                             double skip_prob, Rng& rng);

}  // namespace mlforge

#endif  // MLFORGE_IMBALANCE_H_
