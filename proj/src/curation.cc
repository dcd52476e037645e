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

#include "mlforge/curation.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mlforge/error.h"
#include "mlforge/rng.h"
#include "mlforge/text.h"

namespace mlforge {
namespace {

Error ParseError(std::size_t line_no, const std::string& why) {
  return DataError("curation", "parse",
                   "line " + std::to_string(line_no) + ": " + why);
}

bool ValidConfidence(double c) { return c >= 0.0 && c <= 1.0; }

}  // namespace

bool ImageRecord::HasTag(CatId cat) const {
  return std::binary_search(
      tags.begin(), tags.end(), Tag{cat, 0.0},
      [](const Tag& a, const Tag& b) { return a.cat < b.cat; });
}

CatSet ImageRecord::TagSet() const {
  CatSet out;
  for (const Tag& t : tags) out.insert(t.cat);
  return out;
}

void ImageRecord::AddTag(CatId cat, double confidence) {
  auto it = std::lower_bound(
      tags.begin(), tags.end(), cat,
      [](const Tag& t, CatId c) { return t.cat < c; });
  if (it != tags.end() && it->cat == cat) {
    it->confidence = std::max(it->confidence, confidence);
  } else {
    tags.insert(it, Tag{cat, confidence});
  }
}

Manifest Manifest::FromRecords(std::vector<ImageRecord> records) {
  Manifest m;
  std::unordered_set<std::string> ids;
  ids.reserve(records.size());
  for (ImageRecord& r : records) {
    if (r.image_id.empty() || r.image_id.find_first_of("\t\n") != std::string::npos) {
      throw DataError("curation", "bad-id", "invalid image_id '" + r.image_id + "'");
    }
    if (!ids.insert(r.image_id).second) {
      throw DataError("curation", "duplicate-id",
                      "duplicate image_id " + r.image_id);
    }
    std::sort(r.tags.begin(), r.tags.end(),
              [](const Tag& a, const Tag& b) { return a.cat < b.cat; });
    for (std::size_t i = 0; i < r.tags.size(); ++i) {
      if (i > 0 && r.tags[i].cat == r.tags[i - 1].cat) {
        throw DataError("curation", "duplicate-tag",
                        "image " + r.image_id + " repeats cat_id " +
                            std::to_string(Value(r.tags[i].cat)));
      }
      if (!ValidConfidence(r.tags[i].confidence)) {
        throw DataError("curation", "confidence",
                        "image " + r.image_id + " has confidence outside [0,1]");
      }
    }
    if (r.features) {
      if (r.features->empty()) {
        throw DataError("curation", "features",
                        "image " + r.image_id + " has an empty feature vector");
      }
      if (!m.feature_dim_) m.feature_dim_ = r.features->size();
      if (*m.feature_dim_ != r.features->size()) {
        throw DataError("curation", "feature-dim",
                        "image " + r.image_id + " has " +
                            std::to_string(r.features->size()) +
                            " features, expected " +
                            std::to_string(*m.feature_dim_));
      }
    }
  }
  m.records_ = std::move(records);
  return m;
}

CatSet Manifest::Vocabulary() const {
  CatSet out;
  for (const ImageRecord& r : records_) {
    for (const Tag& t : r.tags) out.insert(t.cat);
  }
  return out;
}

std::map<CatId, std::size_t> Manifest::ImagesPerCategory() const {
  std::map<CatId, std::size_t> counts;
  for (const ImageRecord& r : records_) {
    for (const Tag& t : r.tags) ++counts[t.cat];
  }
  return counts;
}

Manifest ParseManifest(std::istream& in) {
  std::vector<ImageRecord> records;
  std::unordered_set<std::string> ids;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = SplitString(line, '\t');
    if (fields.size() != 3 && fields.size() != 4) {
      throw ParseError(line_no, "expected 3 or 4 tab-separated fields");
    }
    ImageRecord r;
    r.image_id = std::string(fields[0]);
    r.source_uri = std::string(fields[1]);
    if (r.image_id.empty()) throw ParseError(line_no, "empty image_id");
    if (!ids.insert(r.image_id).second) {
      throw DataError("curation", "duplicate-id",
                      "line " + std::to_string(line_no) +
                          ": duplicate image_id " + r.image_id);
    }
    if (!fields[2].empty()) {
      for (std::string_view item : SplitString(fields[2], ',')) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) {
          throw ParseError(line_no, "tag '" + std::string(item) + "' lacks ':'");
        }
        auto cat = ParseUnsigned<std::uint32_t>(item.substr(0, colon));
        auto conf = ParseReal(item.substr(colon + 1));
        if (!cat) throw ParseError(line_no, "bad cat_id in '" + std::string(item) + "'");
        if (!conf || !ValidConfidence(*conf)) {
          throw ParseError(line_no,
                           "confidence out of [0,1] in '" + std::string(item) + "'");
        }
        r.tags.push_back(Tag{CatId{*cat}, *conf});
      }
      std::sort(r.tags.begin(), r.tags.end(),
                [](const Tag& a, const Tag& b) { return a.cat < b.cat; });
      for (std::size_t i = 1; i < r.tags.size(); ++i) {
        if (r.tags[i].cat == r.tags[i - 1].cat) {
          throw ParseError(line_no, "repeated cat_id " +
                                        std::to_string(Value(r.tags[i].cat)));
        }
      }
    }
    if (fields.size() == 4) {
      std::vector<double> feats;
      for (std::string_view item : SplitString(fields[3], ',')) {
        auto v = ParseReal(item);
        if (!v) throw ParseError(line_no, "bad feature value '" + std::string(item) + "'");
        feats.push_back(*v);
      }
      if (!dim) dim = feats.size();
      if (*dim != feats.size()) {
        throw ParseError(line_no, "feature dimension " + std::to_string(feats.size()) +
                                      " differs from " + std::to_string(*dim));
      }
      r.features = std::move(feats);
    }
    records.push_back(std::move(r));
  }
  return Manifest::FromRecords(std::move(records));
}

Manifest ReadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("curation", "io", "cannot open " + path.string());
  return ParseManifest(in);
}

void WriteManifest(const Manifest& manifest, std::ostream& out) {
  for (const ImageRecord& r : manifest.records()) {
    out << r.image_id << '\t' << r.source_uri << '\t';
    for (std::size_t i = 0; i < r.tags.size(); ++i) {
      if (i > 0) out << ',';
      out << Value(r.tags[i].cat) << ':' << FormatTrimmed(r.tags[i].confidence, 6);
    }
    if (r.features) {
      out << '\t';
      for (std::size_t i = 0; i < r.features->size(); ++i) {
        if (i > 0) out << ',';
        out << FormatShortest((*r.features)[i]);
      }
    }
    out << '\n';
  }
}

void WriteManifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("curation", "io", "cannot write " + path.string());
  WriteManifest(manifest, out);
}

std::string ManifestToString(const Manifest& manifest) {
  std::ostringstream out;
  WriteManifest(manifest, out);
  return out.str();
}

FilterResult FilterVocabulary(const Manifest& manifest, std::size_t min_count,
                              const CatSet& drop_list) {
  FilterResult result;
  for (const auto& [cat, count] : manifest.ImagesPerCategory()) {
    if (count < min_count || drop_list.contains(cat)) result.removed.insert(cat);
  }
  std::vector<ImageRecord> kept;
  kept.reserve(manifest.size());
  for (const ImageRecord& r : manifest.records()) {
    ImageRecord copy = r;
    std::erase_if(copy.tags,
                  [&](const Tag& t) { return result.removed.contains(t.cat); });
    if (!copy.tags.empty()) kept.push_back(std::move(copy));
  }
  result.manifest = Manifest::FromRecords(std::move(kept));
  return result;
}

SynonymMap ParseSynonymMap(std::istream& in) {
  SynonymMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = SplitString(line, '\t');
    auto from = fields.size() == 2 ? ParseUnsigned<std::uint32_t>(fields[0]) : std::nullopt;
    auto to = fields.size() == 2 ? ParseUnsigned<std::uint32_t>(fields[1]) : std::nullopt;
    if (!from || !to) throw ParseError(line_no, "expected 'from<TAB>to'");
    if (!map.emplace(CatId{*from}, CatId{*to}).second) {
      throw ParseError(line_no, "cat_id " + std::to_string(*from) + " mapped twice");
    }
  }
  return map;
}

SynonymMap ReadSynonymMap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("curation", "io", "cannot open " + path.string());
  return ParseSynonymMap(in);
}

Manifest MergeVocabularies(const Manifest& a, const Manifest& b,
                           const SynonymMap& synonyms) {
  for (const auto& [from, to] : synonyms) {
    auto it = synonyms.find(to);
    if (it != synonyms.end() && it->second != to) {
      throw DataError("curation", "chained-synonyms",
                      "synonym map chains " + std::to_string(Value(from)) +
                          " -> " + std::to_string(Value(to)) + " -> " +
                          std::to_string(Value(it->second)));
    }
  }
  std::vector<ImageRecord> records = a.records();
  std::unordered_set<std::string> ids;
  for (const ImageRecord& r : records) ids.insert(r.image_id);
  for (const ImageRecord& r : b.records()) {
    if (ids.contains(r.image_id)) {
      throw DataError("curation", "id-collision",
                      "image_id " + r.image_id + " present in both manifests");
    }
    ImageRecord copy = r;
    copy.tags.clear();
    for (const Tag& t : r.tags) {
      auto it = synonyms.find(t.cat);
      copy.AddTag(it == synonyms.end() ? t.cat : it->second, t.confidence);
    }
    records.push_back(std::move(copy));
  }
  return Manifest::FromRecords(std::move(records));
}

SplitResult SplitValidation(const Manifest& manifest, std::size_t target_size,
                            std::size_t per_category_cap, std::uint64_t seed) {
  if (target_size > manifest.size()) {
    throw UsageError("curation", "split-size",
                     "validation size " + std::to_string(target_size) +
                         " exceeds manifest size " +
                         std::to_string(manifest.size()));
  }
  Rng rng = Rng::Stream(seed, "curation.split");
  const auto order = Permutation(manifest.size(), rng);
  std::vector<char> in_val(manifest.size(), 0);
  std::map<CatId, std::size_t> used;
  std::size_t taken = 0;
  for (std::size_t idx : order) {
    if (taken == target_size) break;
    const ImageRecord& r = manifest.records()[idx];
    const bool fits = std::all_of(r.tags.begin(), r.tags.end(), [&](const Tag& t) {
      auto it = used.find(t.cat);
      return (it == used.end() ? 0 : it->second) < per_category_cap;
    });
    if (!fits) continue;
    for (const Tag& t : r.tags) ++used[t.cat];
    in_val[idx] = 1;
    ++taken;
  }
  std::vector<ImageRecord> train, val;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    (in_val[i] ? val : train).push_back(manifest.records()[i]);
  }
  SplitResult result;
  result.train = Manifest::FromRecords(std::move(train));
  result.val = Manifest::FromRecords(std::move(val));
  result.short_of_target = taken < target_size;
  return result;
}

std::size_t DatasetStats::TrainableCount(std::size_t threshold) const {
  return static_cast<std::size_t>(std::count_if(
      images_per_category.begin(), images_per_category.end(),
      [&](const auto& kv) { return kv.second > threshold; }));
}

double DatasetStats::MeanImagesPerCategory() const {
  if (images_per_category.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& [cat, n] : images_per_category) total += n;
  return static_cast<double>(total) /
         static_cast<double>(images_per_category.size());
}

DatasetStats ComputeDatasetStats(const Manifest& manifest) {
  DatasetStats s;
  s.record_count = manifest.size();
  s.images_per_category = manifest.ImagesPerCategory();
  if (manifest.empty()) return s;
  std::size_t total = 0;
  s.min_tags = manifest.records().front().tags.size();
  for (const ImageRecord& r : manifest.records()) {
    const std::size_t n = r.tags.size();
    ++s.tags_per_image[n];
    total += n;
    s.max_tags = std::max(s.max_tags, n);
    s.min_tags = std::min(s.min_tags, n);
  }
  s.mean_tags = static_cast<double>(total) / static_cast<double>(s.record_count);
  return s;
}

StatsReport RenderStatsReport(const DatasetStats& stats,
                              std::size_t trainable_threshold, bool log2_counts) {
  StatsReport report;
  std::ostringstream summary;
  std::size_t max_images = 0;
  std::size_t min_images = 0;
  if (!stats.images_per_category.empty()) {
    min_images = stats.images_per_category.begin()->second;
    for (const auto& [cat, n] : stats.images_per_category) {
      max_images = std::max(max_images, n);
      min_images = std::min(min_images, n);
    }
  }
  summary << "records=" << stats.record_count << "\n"
          << "categories=" << stats.images_per_category.size() << "\n"
          << "mean_images_per_category=" << FormatFixed(stats.MeanImagesPerCategory(), 2) << "\n"
          << "max_images_per_category=" << max_images << "\n"
          << "min_images_per_category=" << min_images << "\n"
          << "trainable_threshold=" << trainable_threshold << "\n"
          << "trainable_categories=" << stats.TrainableCount(trainable_threshold) << "\n"
          << "mean_tags_per_image=" << FormatFixed(stats.mean_tags, 2) << "\n"
          << "max_tags_per_image=" << stats.max_tags << "\n"
          << "min_tags_per_image=" << stats.min_tags << "\n";
  report.summary = summary.str();

  std::ostringstream per_cat;
  per_cat << (log2_counts ? "cat_id,images,log2_images\n" : "cat_id,images\n");
  for (const auto& [cat, n] : stats.images_per_category) {
    per_cat << Value(cat) << ',' << n;
    if (log2_counts) per_cat << ',' << FormatFixed(std::log2(static_cast<double>(n)), 4);
    per_cat << '\n';
  }
  report.per_category_csv = per_cat.str();

  std::ostringstream tags;
  tags << "tags,images\n";
  for (const auto& [n_tags, n_images] : stats.tags_per_image) {
    tags << n_tags << ',' << n_images << '\n';
  }
  report.tags_per_image_csv = tags.str();
  return report;
}

}  // namespace mlforge
