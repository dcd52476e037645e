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

#include <gtest/gtest.h>

#include <algorithm>

#include "testing.h"

namespace mlforge {
namespace {

using testing::ErrorCode;

std::vector<int> Binarize(std::vector<double> s, std::size_t k) {
  const std::vector<std::uint8_t> b = TopKBinarize(s, k);
  return {b.begin(), b.end()};
}

TEST(TopKBinarize, Examples) {
  EXPECT_EQ(Binarize({0.9, 0.2, 0.8, 0.1}, 2), (std::vector<int>{1, 0, 1, 0}));
  EXPECT_EQ(Binarize({0.9, 0.2, 0.8, 0.1}, 4), (std::vector<int>{1, 1, 1, 1}));
  EXPECT_EQ(Binarize({0.5, 0.5, 0.1}, 1), (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(Binarize({0.1, 0.5, 0.5, 0.5}, 2), (std::vector<int>{0, 1, 1, 0}));
}

TEST(TopKBinarize, KOutOfRange) {
  EXPECT_EQ(ErrorCode([] { Binarize({0.1, 0.2}, 0); }), "metrics:k-range");
  EXPECT_EQ(ErrorCode([] { Binarize({0.1, 0.2}, 3); }), "metrics:k-range");
}

TEST(InstanceMetrics, WorkedExample) {
  BinaryMatrix y(1, 4);
  y << 1, 1, 0, 0;
  Matrix s(1, 4);
  s << 0.9, 0.2, 0.8, 0.1;
  const EvalResult r = InstanceMetrics(y, s, 2);
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_EQ(r.f1, 0.5);
  EXPECT_EQ(r.n_instances, 1u);
  EXPECT_EQ(RenderEvalRow(r),
            "k=2 precision=0.500000 recall=0.500000 f1=0.500000 n_instances=1 n_excluded=0");
}

TEST(InstanceMetrics, PerfectRanking) {
  BinaryMatrix y(2, 3);
  y << 0, 1, 1, 0, 1, 1;
  Matrix s(2, 3);
  s << 0.1, 0.8, 0.7, 0.0, 0.6, 0.9;
  const EvalResult r = InstanceMetrics(y, s, 2);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(InstanceMetrics, EmptyRowsExcludedOrRejected) {
  BinaryMatrix y(3, 2);
  y << 1, 0, 0, 0, 0, 1;
  Matrix s(3, 2);
  s << 0.9, 0.1, 0.5, 0.5, 0.9, 0.1;
  const EvalResult r = InstanceMetrics(y, s, 1);
  EXPECT_EQ(r.n_instances, 2u);
  EXPECT_EQ(r.n_excluded, 1u);
  EXPECT_EQ(r.precision, 0.5);
  ErrorKind kind{};
  EXPECT_EQ(ErrorCode([&] { InstanceMetrics(y, s, 1, false); }, &kind), "metrics:empty-row");
  EXPECT_EQ(kind, ErrorKind::kData);
  EXPECT_EQ(ErrorCode([&] { InstanceMetrics(y, Matrix(3, 3), 1); }), "metrics:shape");
}

TEST(InstanceMetrics, PerInstanceCsv) {
  BinaryMatrix y(2, 2);
  y << 1, 0, 1, 1;
  Matrix s(2, 2);
  s << 0.2, 0.9, 0.9, 0.1;
  const EvalResult r = InstanceMetrics(y, s, 1);
  ASSERT_EQ(r.per_instance.size(), 2u);
  EXPECT_EQ(r.per_instance[0].f1, 0.0);
  EXPECT_EQ(r.per_instance[1].precision, 1.0);
  EXPECT_EQ(r.per_instance[1].recall, 0.5);
  EXPECT_NE(RenderPerInstanceCsv(r).find("row,precision,recall,f1"), std::string::npos);
}

struct RandomInstance {
  BinaryMatrix y;
  Matrix s;
  std::vector<std::vector<int>> y_rows;
  std::vector<std::vector<double>> s_rows;
};

RandomInstance MakeInstance(Rng& rng) {
  const std::size_t n = 1 + rng.Below(12), m = 1 + rng.Below(10);
  RandomInstance inst{BinaryMatrix(n, m), Matrix(n, m), {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    inst.y_rows.emplace_back(m);
    inst.s_rows.emplace_back(m);
    for (std::size_t j = 0; j < m; ++j) {
      const int yv = rng.Bernoulli(0.3) ? 1 : 0;
      // Coarse scores so ties occur.
      const double sv = static_cast<double>(rng.Below(6)) / 5.0;
      inst.y(i, j) = static_cast<std::uint8_t>(yv);
      inst.s(i, j) = sv;
      inst.y_rows[i][j] = yv;
      inst.s_rows[i][j] = sv;
    }
  }
  return inst;
}

TEST(InstanceMetrics, MatchesNestedLoopOracle) {
  Rng rng = Rng::Stream(1, "test.metrics");
  for (int trial = 0; trial < 500; ++trial) {
    const RandomInstance inst = MakeInstance(rng);
    const std::size_t k = 1 + rng.Below(static_cast<std::uint64_t>(inst.s.cols()));
    const testing::BruteMetrics want =
        testing::BruteInstanceMetrics(inst.y_rows, inst.s_rows, k, true);
    const EvalResult got = InstanceMetrics(inst.y, inst.s, k);
    ASSERT_EQ(got.n_instances, want.counted);
    ASSERT_EQ(got.n_instances + got.n_excluded, static_cast<std::size_t>(inst.y.rows()));
    EXPECT_NEAR(got.precision, want.precision, 1e-12);
    EXPECT_NEAR(got.recall, want.recall, 1e-12);
    EXPECT_NEAR(got.f1, want.f1, 1e-12);
    for (const InstanceScore& row : got.per_instance) {
      ASSERT_LE(row.precision, 1.0);
      ASSERT_LE(row.recall, 1.0);
      ASSERT_GE(row.f1, std::min(row.precision, row.recall) - 1e-15);
      ASSERT_LE(row.f1, std::max(row.precision, row.recall) + 1e-15);
    }
  }
}

TEST(InstanceMetrics, InvariantUnderJointColumnPermutation) {
  Rng rng = Rng::Stream(2, "test.metrics");
  for (int trial = 0; trial < 100; ++trial) {
    RandomInstance inst = MakeInstance(rng);
    // Distinct scores so the tie rule does not depend on column order.
    for (Eigen::Index i = 0; i < inst.s.size(); ++i) inst.s(i) = rng.Uniform();
    const std::size_t m = static_cast<std::size_t>(inst.s.cols());
    const std::vector<std::size_t> perm = Permutation(m, rng);
    BinaryMatrix py(inst.y.rows(), inst.y.cols());
    Matrix ps(inst.s.rows(), inst.s.cols());
    for (std::size_t j = 0; j < m; ++j) {
      py.col(static_cast<Eigen::Index>(perm[j])) = inst.y.col(static_cast<Eigen::Index>(j));
      ps.col(static_cast<Eigen::Index>(perm[j])) = inst.s.col(static_cast<Eigen::Index>(j));
    }
    const std::size_t k = 1 + rng.Below(m);
    const EvalResult a = InstanceMetrics(inst.y, inst.s, k);
    const EvalResult b = InstanceMetrics(py, ps, k);
    EXPECT_EQ(a.precision, b.precision);
    EXPECT_EQ(a.recall, b.recall);
    EXPECT_EQ(a.f1, b.f1);
  }
}

TEST(TopKAccuracy, Examples) {
  Matrix s(4, 3);
  s << 0.9, 0.1, 0.0,  //
      0.1, 0.8, 0.1,   //
      0.2, 0.3, 0.5,   //
      0.6, 0.3, 0.1;
  const std::vector<std::size_t> labels{0, 1, 2, 1};
  EXPECT_EQ(TopKAccuracy(labels, s, 1), 0.75);
  EXPECT_EQ(TopKAccuracy(labels, s, 2), 1.0);
  const std::vector<std::size_t> perfect{0, 1, 2, 0};
  EXPECT_EQ(TopKAccuracy(perfect, s, 1), 1.0);
  const std::vector<std::size_t> bad{0, 1, 3, 0};
  EXPECT_EQ(ErrorCode([&] { TopKAccuracy(bad, s, 1); }), "metrics:label-range");
}

TEST(TopKAccuracy, NonDecreasingInK) {
  Rng rng(9);
  Matrix s(50, 8);
  std::vector<std::size_t> labels(50);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = rng.Uniform();
  for (std::size_t& l : labels) l = rng.Below(8);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 8; ++k) {
    const double acc = TopKAccuracy(labels, s, k);
    EXPECT_GE(acc, prev);
    prev = acc;
  }
  EXPECT_EQ(prev, 1.0);
}

}  // namespace
}  // namespace mlforge
