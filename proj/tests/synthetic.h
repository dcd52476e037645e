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

// Synthetic training sets for the trainer, distsim and acceptance tests.

#ifndef MLFORGE_TESTS_SYNTHETIC_H_
#define MLFORGE_TESTS_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "mlforge/matrix.h"
#include "mlforge/rng.h"
#include "mlforge/trainer.h"

namespace mlforge::testing {

// Two mutually exclusive categories on either side of a random hyperplane;
// points closer than `margin` to it are redrawn.
inline TrainingData SeparableTwoClass(std::size_t n, std::size_t d, std::uint64_t seed,
                                      double margin = 0.5) {
  Rng rng = Rng::Stream(seed, "synthetic.two_class");
  std::vector<double> w(d);
  for (double& v : w) v = rng.Normal(0.0, 1.0);
  TrainingData data;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  data.labels = BinaryMatrix::Zero(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double dot = 0.0;
    do {
      dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        data.features(row, static_cast<Eigen::Index>(c)) = rng.Normal(0.0, 1.0);
        dot += w[c] * data.features(row, static_cast<Eigen::Index>(c));
      }
    } while (std::abs(dot) < margin);
    const std::size_t cls = dot > 0.0 ? 0 : 1;
    data.labels(row, static_cast<Eigen::Index>(cls)) = 1;
    data.classes.push_back(cls);
  }
  return data;
}

// Random unit-variance directions shared between related tasks.
inline Matrix RandomDirections(std::size_t count, std::size_t d, std::uint64_t seed) {
  Rng rng = Rng::Stream(seed, "synthetic.directions");
  Matrix u(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) u(r, c) = rng.Normal(0.0, 1.0);
  }
  return u;
}

// Multi-label targets y_j = [u_j . x > 0] for every direction, and a
// single-label target: the argmax of the first `classes` projections.
inline TrainingData ProjectionTask(const Matrix& directions, std::size_t n,
                                   std::size_t classes, std::uint64_t seed) {
  Rng rng = Rng::Stream(seed, "synthetic.projection");
  TrainingData data;
  data.features.resize(static_cast<Eigen::Index>(n), directions.cols());
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      data.features(r, c) = rng.Normal(0.0, 1.0);
    }
  }
  const Matrix proj = data.features * directions.transpose();
  data.labels = (proj.array() > 0.0).cast<std::uint8_t>();
  for (Eigen::Index r = 0; r < proj.rows(); ++r) {
    Eigen::Index best = 0;
    proj.row(r).head(static_cast<Eigen::Index>(classes)).maxCoeff(&best);
    data.classes.push_back(static_cast<std::size_t>(best));
  }
  return data;
}

// Fraction of rows whose highest-scoring column is the target class.
inline double Accuracy(const Matrix& scores, const std::vector<std::size_t>& classes) {
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    hits += static_cast<std::size_t>(best) == classes[static_cast<std::size_t>(r)] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

}  // namespace mlforge::testing

#endif  // MLFORGE_TESTS_SYNTHETIC_H_
