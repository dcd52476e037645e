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

#include "mlforge/metrics.h"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {
namespace {

std::vector<std::size_t> TopKIndices(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

std::span<const double> Row(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::vector<std::uint8_t> TopKBinarize(std::span<const double> scores,
                                       std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw UsageError("metrics", "k-range",
                     "k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(scores.size()) + "]");
  }
  std::vector<std::uint8_t> out(scores.size(), 0);
  for (std::size_t j : TopKIndices(scores, k)) out[j] = 1;
  return out;
}

EvalResult InstanceMetrics(const BinaryMatrix& labels, const Matrix& scores,
                           std::size_t k, bool exclude_empty) {
  if (labels.rows() != scores.rows() || labels.cols() != scores.cols()) {
    throw UsageError("metrics", "shape", "labels and scores must have the same shape");
  }
  if (k < 1 || k > static_cast<std::size_t>(scores.cols())) {
    throw UsageError("metrics", "k-range", "k=" + std::to_string(k) + " out of range");
  }
  EvalResult result;
  result.k = k;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    std::size_t positives = 0;
    for (Eigen::Index j = 0; j < labels.cols(); ++j) positives += labels(i, j) != 0;
    if (positives == 0) {
      if (!exclude_empty) {
        throw DataError("metrics", "empty-row",
                        "row " + std::to_string(i) + " has no positive label");
      }
      ++result.n_excluded;
      continue;
    }
    std::size_t hits = 0;
    for (std::size_t j : TopKIndices(Row(scores, i), k)) {
      hits += labels(i, static_cast<Eigen::Index>(j)) != 0;
    }
    InstanceScore s;
    s.row = static_cast<std::size_t>(i);
    s.precision = static_cast<double>(hits) / static_cast<double>(k);
    s.recall = static_cast<double>(hits) / static_cast<double>(positives);
    const double denom = s.precision + s.recall;
    s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
    p_sum += s.precision;
    r_sum += s.recall;
    f_sum += s.f1;
    result.per_instance.push_back(s);
  }
  result.n_instances = result.per_instance.size();
  if (result.n_instances > 0) {
    const double n = static_cast<double>(result.n_instances);
    result.precision = p_sum / n;
    result.recall = r_sum / n;
    result.f1 = f_sum / n;
  }
  return result;
}

double TopKAccuracy(std::span<const std::size_t> labels, const Matrix& scores,
                    std::size_t k) {
  if (labels.size() != static_cast<std::size_t>(scores.rows())) {
    throw UsageError("metrics", "shape", "one label per score row required");
  }
  if (k < 1 || k > static_cast<std::size_t>(scores.cols())) {
    throw UsageError("metrics", "k-range", "k=" + std::to_string(k) + " out of range");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= static_cast<std::size_t>(scores.cols())) {
      throw DataError("metrics", "label-range",
                      "label " + std::to_string(labels[i]) + " outside the vocabulary");
    }
    const auto top = TopKIndices(Row(scores, static_cast<Eigen::Index>(i)), k);
    correct += std::find(top.begin(), top.end(), labels[i]) != top.end();
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::string RenderEvalRow(const EvalResult& r) {
  std::ostringstream out;
  out << "k=" << r.k << " precision=" << FormatFixed(r.precision, 6)
      << " recall=" << FormatFixed(r.recall, 6) << " f1=" << FormatFixed(r.f1, 6)
      << " n_instances=" << r.n_instances << " n_excluded=" << r.n_excluded;
  return out.str();
}

std::string RenderPerInstanceCsv(const EvalResult& r) {
  std::ostringstream out;
  out << "row,precision,recall,f1\n";
  for (const InstanceScore& s : r.per_instance) {
    out << s.row << ',' << FormatFixed(s.precision, 6) << ',' << FormatFixed(s.recall, 6)
        << ',' << FormatFixed(s.f1, 6) << '\n';
  }
  return out.str();
}

}  // namespace mlforge
