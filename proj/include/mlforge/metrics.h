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

#ifndef MLFORGE_METRICS_H_
#define MLFORGE_METRICS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlforge/matrix.h"

namespace mlforge {

// Exactly k ones at the k largest scores; ties go to the lower index.
std::vector<std::uint8_t> TopKBinarize(std::span<const double> scores,
                                       std::size_t k);

struct InstanceScore {
  std::size_t row = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalResult {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_instances = 0;  // rows averaged over
  std::size_t n_excluded = 0;   // rows without any positive label
  std::vector<InstanceScore> per_instance;
};

// Instance-level precision, recall and F1 at top-k, averaged over rows:
//   P_i = |y_i . yhat_i| / k,  R_i = |y_i . yhat_i| / |y_i|,
//   F1_i = 2 P_i R_i / (P_i + R_i), or 0 when P_i + R_i = 0.
// Rows with no positive label are skipped and counted in n_excluded unless
// `exclude_empty` is false, in which case they are an error.
EvalResult InstanceMetrics(const BinaryMatrix& labels, const Matrix& scores,
                           std::size_t k, bool exclude_empty = true);

// Fraction of rows whose label is among the top-k scores.
double TopKAccuracy(std::span<const std::size_t> labels, const Matrix& scores,
                    std::size_t k);

// One "k=.. precision=.. recall=.. f1=.. n_instances=.. n_excluded=.." line.
std::string RenderEvalRow(const EvalResult& result);
// CSV: row,precision,recall,f1
std::string RenderPerInstanceCsv(const EvalResult& result);

}  // namespace mlforge

#endif  // MLFORGE_METRICS_H_
