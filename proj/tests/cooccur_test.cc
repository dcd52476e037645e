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

#include "mlforge/cooccur.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "testing.h"

namespace mlforge {
namespace {

using testing::C;
using testing::Cats;
using testing::ErrorCode;

const std::filesystem::path kData = MLFORGE_TEST_DATA;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Parent array of toy.tax, written out by hand.
const std::vector<long> kToyParents = {-1, 0, 1, 1, 1, 0, 5, 5, -1, 8, 8, -1};

TEST(MachineAnnotate, StrictThreshold) {
  EXPECT_EQ(MachineAnnotate({{C(3), 0.96}}, 0.95), Cats({3}));
  EXPECT_EQ(MachineAnnotate({{C(3), 0.95}}, 0.95), Cats({}));
  EXPECT_EQ(MachineAnnotate({{C(1), 1.0}, {C(2), 0.0}, {C(3), 0.9500001}}, 0.95), Cats({1, 3}));
}

TEST(MachineAnnotate, RejectsOutOfRangeScores) {
  EXPECT_EQ(ErrorCode([] { MachineAnnotate({{C(1), 1.5}}, 0.95); }), "cooccur:score-range");
  EXPECT_EQ(ErrorCode([] { MachineAnnotate({{C(1), -0.1}}, 0.95); }), "cooccur:score-range");
}

TEST(MachineAnnotate, RandomBatchMatchesFilter) {
  Rng rng = Rng::Stream(11, "test.annotate");
  for (int image = 0; image < 100; ++image) {
    std::map<CatId, double> scores;
    CatSet expected;
    for (std::uint32_t c = 0; c < 30; ++c) {
      const double s = rng.Below(4) == 0 ? 0.95 : rng.Uniform();
      scores[C(c)] = s;
      if (s > 0.95) expected.insert(C(c));
    }
    EXPECT_EQ(MachineAnnotate(scores, 0.95), expected);
  }
}

TEST(CoMatrix, HandCounts) {
  TagStream source, machine;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "i" + std::to_string(i);
    source[id] = Cats({1});
    machine[id] = i < 6 ? Cats({7}) : Cats({});
  }
  source["x"] = Cats({2});
  machine["x"] = Cats({7, 8});
  const CoMatrix co = ComputeCooccurrence(source, machine);
  EXPECT_EQ(co.Support(C(1)), 10u);
  EXPECT_EQ(co.Count(C(1), C(7)), 6u);
  EXPECT_DOUBLE_EQ(co.Ratio(C(1), C(7)), 0.6);
  EXPECT_EQ(co.Ratio(C(1), C(8)), 0.0);
  EXPECT_FALSE(co.counts().contains({C(1), C(8)}));
  EXPECT_EQ(co.Ratio(C(2), C(8)), 1.0);
  EXPECT_EQ(co.Ratio(C(5), C(8)), 0.0);  // n_i = 0
}

TEST(CoMatrix, MismatchedImagesAreRejected) {
  TagStream a{{"x", Cats({1})}}, b{{"y", Cats({1})}};
  EXPECT_EQ(ErrorCode([&] { ComputeCooccurrence(a, b); }), "cooccur:image-mismatch");
}

TEST(CoMatrix, NestedLoopOracleAndShardIndependence) {
  Rng rng = Rng::Stream(2, "test.comatrix");
  for (int trial = 0; trial < 30; ++trial) {
    TagStream source, machine;
    const std::size_t n = 1 + rng.Below(60);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "img" + std::to_string(i);
      for (std::uint32_t c = 0; c < 6; ++c) {
        if (rng.Bernoulli(0.3)) source[id].insert(C(c));
        if (rng.Bernoulli(0.3)) machine[id].insert(C(10 + c));
      }
      source.try_emplace(id);
      machine.try_emplace(id);
    }
    const CoMatrix co = ComputeCooccurrence(source, machine);
    for (std::uint32_t i = 0; i < 6; ++i) {
      std::size_t n_i = 0;
      for (const auto& [id, tags] : source) n_i += tags.contains(C(i)) ? 1 : 0;
      EXPECT_EQ(co.Support(C(i)), n_i);
      for (std::uint32_t j = 10; j < 16; ++j) {
        std::size_t n_ij = 0;
        for (const auto& [id, tags] : source) {
          n_ij += tags.contains(C(i)) && machine.at(id).contains(C(j)) ? 1 : 0;
        }
        EXPECT_EQ(co.Count(C(i), C(j)), n_ij);
        if (n_i > 0) {
          EXPECT_EQ(co.Ratio(C(i), C(j)), static_cast<double>(n_ij) / static_cast<double>(n_i));
        }
      }
    }
    for (std::size_t shards : {2, 3, 7}) {
      EXPECT_EQ(ComputeCooccurrence(source, machine, shards), co);
    }
  }
}

TEST(CoMatrix, FileRoundTrip) {
  std::istringstream in(Slurp(kData / "toy_co.golden.tsv"));
  const CoMatrix co = ParseCoMatrix(in);
  std::ostringstream out;
  WriteCoMatrix(co, out);
  EXPECT_EQ(out.str(), Slurp(kData / "toy_co.golden.tsv"));
  EXPECT_EQ(co.Count(C(9), C(11)), 4u);
  EXPECT_EQ(co.Support(C(8)), 7u);
}

TEST(StrongPairs, ThresholdAndHierarchy) {
  // thing(0) <- animal(1) <- snake(2); sea(3) separate.
  const LabelGraph g =
      testing::TaxonomyFromText("0\t-1\t-\tthing\n1\t0\t-\tanimal\n2\t1\t-\tsnake\n3\t-1\t-\tsea\n");
  const CoMatrix co = CoMatrix::FromCounts(
      {{C(2), 10}, {C(1), 4}},
      {{{C(2), C(3)}, 6}, {{C(2), C(1)}, 6}, {{C(1), C(3)}, 2}, {{C(2), C(0)}, 10}});
  EXPECT_EQ(StrongPairs(co, g, 0.5), (PairSet{{C(2), C(3)}}));
  // CO(1,3) is exactly 0.5.
  EXPECT_EQ(co.Ratio(C(1), C(3)), 0.5);
  EXPECT_EQ(StrongPairs(co, g, 0.49), (PairSet{{C(1), C(3)}, {C(2), C(3)}}));
}

TEST(StrongPairs, NeverRelatedOnRandomForests) {
  Rng rng = Rng::Stream(9, "test.strong");
  for (int trial = 0; trial < 50; ++trial) {
    const auto parent = testing::RandomForest(30, rng, 0.2);
    const LabelGraph g = testing::GraphFromParents(parent);
    std::map<CatId, std::size_t> support;
    std::map<CoMatrix::Key, std::size_t> counts;
    for (std::uint32_t i = 0; i < 30; ++i) {
      support[C(i)] = 10;
      for (std::uint32_t j = 0; j < 30; ++j) {
        if (rng.Bernoulli(0.2)) counts[{C(i), C(j)}] = 1 + rng.Below(10);
      }
    }
    const CoMatrix co = CoMatrix::FromCounts(support, counts);
    for (const auto& [i, j] : StrongPairs(co, g, 0.5)) {
      EXPECT_GT(co.Ratio(i, j), 0.5);
      EXPECT_FALSE(g.Related(i, j));
    }
  }
}

TEST(PairsIo, RoundTrip) {
  const PairSet pairs = ReadPairs(kData / "toy.pairs");
  EXPECT_EQ(pairs, (PairSet{{C(4), C(6)}, {C(9), C(11)}, {C(10), C(11)}}));
  std::ostringstream out;
  WritePairs(pairs, out);
  EXPECT_EQ(out.str(), "4\t6\n9\t11\n10\t11\n");
}

TEST(Augment, SeaSnakeGainsSea) {
  const LabelGraph g = testing::TaxonomyFromText("1\t-1\t-\tsea snake\n2\t-1\t-\tsea\n");
  const Manifest m = testing::ManifestFromText("a\tu\t1:0.7\nb\tu\t2:0.4\n");
  const Manifest out = AugmentByCooccurrence(m, {{C(1), C(2)}}, g);
  EXPECT_EQ(ManifestToString(out), "a\tu\t1:0.7,2:1\nb\tu\t2:0.4\n");
  EXPECT_EQ(AugmentByCooccurrence(m, {}, g), m);
}

TEST(Augment, UnknownPairCategory) {
  const LabelGraph g = testing::TaxonomyFromText("1\t-1\t-\ta\n");
  const Manifest m = testing::ManifestFromText("a\tu\t1:1\n");
  EXPECT_EQ(ErrorCode([&] { AugmentByCooccurrence(m, {{C(1), C(5)}}, g); }),
            "cooccur:unknown-category");
}

TEST(Augment, ToyCorpusMatchesRewriteOracle) {
  const LabelGraph g = LoadTaxonomy(kData / "toy.tax");
  const Manifest m = ReadManifest(kData / "toy.tsv");
  ASSERT_EQ(m.size(), 20u);
  ASSERT_EQ(g.size(), 12u);
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs{{9, 11}, {10, 11}, {4, 6}};
  PairSet pair_set;
  for (auto [i, j] : pairs) pair_set.insert({C(i), C(j)});

  const Manifest hier = PropagateManifest(m, g);
  EXPECT_EQ(testing::TableOf(hier),
            testing::RewriteHierarchy(testing::TableOf(m), kToyParents));
  const Manifest co = AugmentByCooccurrence(hier, pair_set, g);
  EXPECT_EQ(testing::TableOf(co),
            testing::RewriteCooccurrence(testing::TableOf(hier), pairs));
  const Manifest full = PropagateManifest(co, g);
  EXPECT_EQ(ManifestToString(full), Slurp(kData / "toy_aug.golden.tsv"));
}

TEST(Augment, RandomizedIdempotenceAndMonotonicity) {
  Rng rng = Rng::Stream(4, "test.augment");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng.Below(40);
    const auto parent = testing::RandomForest(n, rng);
    const LabelGraph g = testing::GraphFromParents(parent);
    // Sources and targets come from disjoint halves of the vocabulary so a
    // single round reaches its fixpoint.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    PairSet pair_set;
    for (int p = 0; p < 4; ++p) {
      const auto i = static_cast<std::uint32_t>(rng.Below(n / 2));
      const auto j = static_cast<std::uint32_t>(n / 2 + rng.Below(n - n / 2));
      pairs.emplace_back(i, j);
      pair_set.insert({C(i), C(j)});
    }
    std::vector<ImageRecord> records;
    for (int r = 0; r < 10; ++r) {
      ImageRecord rec;
      rec.image_id = "r" + std::to_string(r);
      rec.source_uri = "u";
      for (int t = 0; t < 3; ++t) {
        rec.AddTag(C(static_cast<std::uint32_t>(rng.Below(n))), 0.5);
      }
      records.push_back(rec);
    }
    const Manifest m = Manifest::FromRecords(records);
    const Manifest once = AugmentByCooccurrence(m, pair_set, g);
    EXPECT_EQ(testing::TableOf(once), testing::RewriteCooccurrence(testing::TableOf(m), pairs));
    EXPECT_EQ(AugmentByCooccurrence(once, pair_set, g), once);
    const Manifest prop = PropagateManifest(m, g);
    EXPECT_EQ(PropagateManifest(prop, g), prop);
    for (std::size_t r = 0; r < m.size(); ++r) {
      const CatSet before = m.records()[r].TagSet();
      for (const Manifest* after : {&once, &prop}) {
        const CatSet now = after->records()[r].TagSet();
        EXPECT_TRUE(std::includes(now.begin(), now.end(), before.begin(), before.end()));
        for (const Tag& t : m.records()[r].tags) {
          for (const Tag& u : after->records()[r].tags) {
            if (u.cat == t.cat) {
              EXPECT_EQ(u.confidence, t.confidence);
            }
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace mlforge
