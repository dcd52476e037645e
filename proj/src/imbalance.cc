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

#include "mlforge/imbalance.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlforge/error.h"

namespace mlforge {

void LossConfig::Validate() const {
  if (!(eta >= 1.0)) throw UsageError("imbalance", "config", "eta must be >= 1");
  if (neg_ratio < 1) throw UsageError("imbalance", "config", "neg_ratio must be >= 1");
  if (!(skip_prob >= 0.0 && skip_prob <= 1.0)) {
    throw UsageError("imbalance", "config", "skip_prob must lie in [0,1]");
  }
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
    throw UsageError("imbalance", "config", "clamp_eps must lie in (0, 0.5)");
  }
}

double PositiveWeight(std::uint64_t t) {
  return std::max(0.01, std::log10(10.0 / (0.01 + static_cast<double>(t))));
}

double NegativeWeight(std::uint64_t t) {
  return std::max(0.01, std::log10(10.0 / (8.0 + static_cast<double>(t))));
}

ColumnWeights AdaptiveWeightState::Update(std::size_t j, bool has_positive) {
  auto& prev = prev_status_.at(j);
  auto& t = t_.at(j);
  if (!prev || *prev != has_positive) {
    t = 1;
  } else {
    ++t;
  }
  prev = has_positive;
  return ColumnWeights{PositiveWeight(t), NegativeWeight(t), t};
}

std::vector<ColumnWeights> AdaptiveWeightState::ObserveBatch(
    const BinaryMatrix& labels) {
  if (static_cast<std::size_t>(labels.cols()) != size()) {
    throw UsageError("imbalance", "shape",
                     "label matrix has " + std::to_string(labels.cols()) +
                         " columns, state tracks " + std::to_string(size()));
  }
  std::vector<ColumnWeights> out(size());
  for (std::size_t j = 0; j < size(); ++j) {
    const bool has_positive = (labels.col(static_cast<Eigen::Index>(j)).array() != 0).any();
    out[j] = Update(j, has_positive);
  }
  return out;
}

void AdaptiveWeightState::Set(std::size_t j, std::optional<bool> prev_status,
                              std::uint64_t t) {
  prev_status_.at(j) = prev_status;
  t_.at(j) = t;
}

Matrix WeightMatrix(const BinaryMatrix& labels,
                    const std::vector<ColumnWeights>& columns) {
  if (static_cast<std::size_t>(labels.cols()) != columns.size()) {
    throw UsageError("imbalance", "shape", "column weight count mismatch");
  }
  Matrix r(labels.rows(), labels.cols());
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      const auto& w = columns[static_cast<std::size_t>(j)];
      r(i, j) = labels(i, j) ? w.positive : w.negative;
    }
  }
  return r;
}

LossSum WeightedBceSum(const BatchLabels& batch, const Matrix& weights,
                       const LossConfig& config, const BinaryMatrix& active_mask) {
  const auto n = batch.labels.rows();
  const auto m = batch.labels.cols();
  if (batch.probs.rows() != n || batch.probs.cols() != m || weights.rows() != n ||
      weights.cols() != m || active_mask.rows() != n || active_mask.cols() != m) {
    throw UsageError("imbalance", "shape", "labels, probabilities, weights and mask must agree");
  }
  const double lo = config.clamp_eps;
  const double hi = 1.0 - config.clamp_eps;
  LossSum out;
  out.grad_sum = Matrix::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!active_mask(i, j)) continue;
      const double p = std::clamp(batch.probs(i, j), lo, hi);
      const double r = weights(i, j);
      if (batch.labels(i, j)) {
        out.loss_sum += r * (-config.eta * std::log(p));
        out.grad_sum(i, j) = r * config.eta * (p - 1.0);
      } else {
        out.loss_sum += r * (-std::log(1.0 - p));
        out.grad_sum(i, j) = r * p;
      }
      ++out.active;
    }
  }
  return out;
}

LossResult WeightedBce(const BatchLabels& batch, const Matrix& weights,
                       const LossConfig& config, const BinaryMatrix& active_mask) {
  LossSum sum = WeightedBceSum(batch, weights, config, active_mask);
  LossResult out;
  out.active = sum.active;
  if (sum.active == 0) {
    out.grad_logits = Matrix::Zero(batch.labels.rows(), batch.labels.cols());
    return out;
  }
  const double scale = 1.0 / static_cast<double>(sum.active);
  out.loss = sum.loss_sum * scale;
  out.grad_logits = sum.grad_sum * scale;
  return out;
}

BinaryMatrix DownsampleBatch(const BinaryMatrix& labels, std::size_t ratio,
                             double skip_prob, Rng& rng) {
  if (ratio < 1) throw UsageError("imbalance", "config", "ratio must be >= 1");
  if (!(skip_prob >= 0.0 && skip_prob <= 1.0)) {
    throw UsageError("imbalance", "config", "skip_prob must lie in [0,1]");
  }
  BinaryMatrix mask = BinaryMatrix::Zero(labels.rows(), labels.cols());
  std::vector<Eigen::Index> negatives;
  for (Eigen::Index j = 0; j < labels.cols(); ++j) {
    negatives.clear();
    std::size_t positives = 0;
    for (Eigen::Index i = 0; i < labels.rows(); ++i) {
      if (labels(i, j)) {
        mask(i, j) = 1;
        ++positives;
      } else {
        negatives.push_back(i);
      }
    }
    if (positives == 0) {
      if (rng.Bernoulli(skip_prob)) mask.col(j).setOnes();
      continue;
    }
    const std::size_t keep = std::min(ratio * positives, negatives.size());
    // Partial Fisher-Yates: the first `keep` slots become the sample.
    for (std::size_t k = 0; k < keep; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.Below(negatives.size() - k));
      std::swap(negatives[k], negatives[pick]);
      mask(negatives[k], j) = 1;
    }
  }
  return mask;
}

}  // namespace mlforge
