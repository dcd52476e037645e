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

#ifndef MLFORGE_COOCCUR_H_
#define MLFORGE_COOCCUR_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>

#include "mlforge/curation.h"
#include "mlforge/taxonomy.h"

namespace mlforge {

// Per-image tag sets keyed by image_id.
using TagStream = std::map<std::string, CatSet>;

// Categories whose score is strictly greater than `threshold`. Scores must
// lie in [0, 1].
CatSet MachineAnnotate(const std::map<CatId, double>& scores, double threshold);

// Applies MachineAnnotate to every record of a score manifest, reading tag
// confidences as posterior probabilities.
TagStream MachineAnnotate(const Manifest& scores, double threshold);

TagStream ToTagStream(const Manifest& manifest);

// Sparse co-occurrence counts between a source vocabulary (rows) and a
// machine-annotation vocabulary (columns). Ratios are always derived from
// the integer counts: CO(i,j) = n_ij / n_i.
class CoMatrix {
 public:
  using Key = std::pair<CatId, CatId>;

  // n_i for each source category with at least one image.
  const std::map<CatId, std::size_t>& support() const { return support_; }
  // n_ij > 0 entries only.
  const std::map<Key, std::size_t>& counts() const { return counts_; }

  std::size_t Support(CatId i) const;
  std::size_t Count(CatId i, CatId j) const;
  // 0 when the entry is absent.
  double Ratio(CatId i, CatId j) const;

  // Adds the counts of `other` into this matrix.
  void Merge(const CoMatrix& other);
  void AddImage(const CatSet& source_tags, const CatSet& machine_tags);

  // Builds from explicit counts; checks n_ij <= n_i.
  static CoMatrix FromCounts(std::map<CatId, std::size_t> support,
                             std::map<Key, std::size_t> counts);

  friend bool operator==(const CoMatrix&, const CoMatrix&) = default;

 private:
  std::map<CatId, std::size_t> support_;
  std::map<Key, std::size_t> counts_;
};

// Counts over images present in both streams. The two streams must cover
// exactly the same image ids. `shards` > 1 counts disjoint slices of the
// images on separate threads and merges; the result does not depend on it.
CoMatrix ComputeCooccurrence(const TagStream& source, const TagStream& machine,
                             std::size_t shards = 1);

using PairSet = std::set<std::pair<CatId, CatId>>;

// Pairs with CO(i,j) > threshold and no hierarchy path between i and j.
PairSet StrongPairs(const CoMatrix& co, const LabelGraph& graph,
                    double threshold);

// One round: every record originally tagged i gains j (confidence 1.0) for
// each pair (i, j). Pair categories must belong to `vocabulary`.
Manifest AugmentByCooccurrence(const Manifest& manifest, const PairSet& pairs,
                               const LabelGraph& vocabulary);

// Replaces every record's tags with their hierarchy closure; added ancestors
// get confidence 1.0.
Manifest PropagateManifest(const Manifest& manifest, const LabelGraph& graph);

// CO file: i <TAB> j <TAB> n_ij <TAB> n_i <TAB> ratio(6 decimals)
void WriteCoMatrix(const CoMatrix& co, std::ostream& out);
CoMatrix ParseCoMatrix(std::istream& in);

// Pairs file: i <TAB> j
void WritePairs(const PairSet& pairs, std::ostream& out);
PairSet ParsePairs(std::istream& in);
PairSet ReadPairs(const std::filesystem::path& path);

}  // namespace mlforge

#endif  // MLFORGE_COOCCUR_H_
