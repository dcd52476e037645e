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

#ifndef MLFORGE_CURATION_H_
#define MLFORGE_CURATION_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlforge/taxonomy.h"

namespace mlforge {

struct Tag {
  CatId cat;
  double confidence = 1.0;  // in [0, 1]

  friend bool operator==(const Tag&, const Tag&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::string source_uri;
  std::vector<Tag> tags;  // sorted by cat, unique
  std::optional<std::vector<double>> features;

  bool HasTag(CatId cat) const;
  CatSet TagSet() const;
  // Inserts or keeps the larger confidence; keeps `tags` sorted.
  void AddTag(CatId cat, double confidence);

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Ordered list of image records with unique ids. Records carrying features
// all share `feature_dim`.
class Manifest {
 public:
  Manifest() = default;

  // Validates ids, tag ranges and feature dimensions; sorts each record's
  // tags. Throws mlforge::Error.
  static Manifest FromRecords(std::vector<ImageRecord> records);

  const std::vector<ImageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::optional<std::size_t> feature_dim() const { return feature_dim_; }

  // Sorted set of every category that tags at least one record.
  CatSet Vocabulary() const;
  // Number of records tagged with each category.
  std::map<CatId, std::size_t> ImagesPerCategory() const;

  friend bool operator==(const Manifest&, const Manifest&) = default;

 private:
  std::vector<ImageRecord> records_;
  std::optional<std::size_t> feature_dim_;
};

// Manifest text format, one record per line:
//   image_id <TAB> source_uri <TAB> tag_list [<TAB> feature_csv]
// tag_list is comma-separated cat_id:confidence, sorted by cat_id on output.
Manifest ParseManifest(std::istream& in);
Manifest ReadManifest(const std::filesystem::path& path);
void WriteManifest(const Manifest& manifest, std::ostream& out);
void WriteManifest(const Manifest& manifest, const std::filesystem::path& path);
std::string ManifestToString(const Manifest& manifest);

struct FilterResult {
  Manifest manifest;
  CatSet removed;
};

// Drops every category seen in fewer than `min_count` records or listed in
// `drop_list`, then drops records left without tags.
FilterResult FilterVocabulary(const Manifest& manifest, std::size_t min_count,
                              const CatSet& drop_list);

// Maps a secondary vocabulary onto canonical ids. Must be idempotent:
// no value may itself be remapped to something else.
using SynonymMap = std::map<CatId, CatId>;

SynonymMap ParseSynonymMap(std::istream& in);
SynonymMap ReadSynonymMap(const std::filesystem::path& path);

// Concatenates `a` and `b`, rewriting `b`'s tags through `synonyms`.
Manifest MergeVocabularies(const Manifest& a, const Manifest& b,
                           const SynonymMap& synonyms);

struct SplitResult {
  Manifest train;
  Manifest val;
  // Set when the per-category cap prevented reaching the requested size.
  bool short_of_target = false;
};

// Seeded greedy validation split: records are visited in shuffled order and
// accepted into `val` while no tag of the record has reached
// `per_category_cap`. Relative record order is preserved in both outputs.
SplitResult SplitValidation(const Manifest& manifest, std::size_t target_size,
                            std::size_t per_category_cap, std::uint64_t seed);

struct DatasetStats {
  std::size_t record_count = 0;
  std::map<CatId, std::size_t> images_per_category;
  std::map<std::size_t, std::size_t> tags_per_image;  // #tags -> #records
  double mean_tags = 0.0;
  std::size_t max_tags = 0;
  std::size_t min_tags = 0;

  // Categories with strictly more than `threshold` images.
  std::size_t TrainableCount(std::size_t threshold) const;
  double MeanImagesPerCategory() const;
};

DatasetStats ComputeDatasetStats(const Manifest& manifest);

struct StatsReport {
  std::string summary;           // key=value lines
  std::string per_category_csv;  // cat_id,images[,log2_images]
  std::string tags_per_image_csv;
};

StatsReport RenderStatsReport(const DatasetStats& stats,
                              std::size_t trainable_threshold, bool log2_counts);

}  // namespace mlforge

#endif  // MLFORGE_CURATION_H_
