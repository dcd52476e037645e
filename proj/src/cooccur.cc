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

#include <fstream>
#include <thread>
#include <vector>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {

CatSet MachineAnnotate(const std::map<CatId, double>& scores, double threshold) {
  CatSet out;
  for (const auto& [cat, p] : scores) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DataError("cooccur", "score-range",
                      "score for cat_id " + std::to_string(Value(cat)) +
                          " outside [0,1]");
    }
    if (p > threshold) out.insert(cat);
  }
  return out;
}

TagStream MachineAnnotate(const Manifest& scores, double threshold) {
  TagStream out;
  for (const ImageRecord& r : scores.records()) {
    std::map<CatId, double> s;
    for (const Tag& t : r.tags) s.emplace(t.cat, t.confidence);
    out.emplace(r.image_id, MachineAnnotate(s, threshold));
  }
  return out;
}

TagStream ToTagStream(const Manifest& manifest) {
  TagStream out;
  for (const ImageRecord& r : manifest.records()) {
    out.emplace(r.image_id, r.TagSet());
  }
  return out;
}

std::size_t CoMatrix::Support(CatId i) const {
  auto it = support_.find(i);
  return it == support_.end() ? 0 : it->second;
}

std::size_t CoMatrix::Count(CatId i, CatId j) const {
  auto it = counts_.find({i, j});
  return it == counts_.end() ? 0 : it->second;
}

double CoMatrix::Ratio(CatId i, CatId j) const {
  const std::size_t n_i = Support(i);
  if (n_i == 0) return 0.0;
  return static_cast<double>(Count(i, j)) / static_cast<double>(n_i);
}

void CoMatrix::Merge(const CoMatrix& other) {
  for (const auto& [i, n] : other.support_) support_[i] += n;
  for (const auto& [key, n] : other.counts_) counts_[key] += n;
}

void CoMatrix::AddImage(const CatSet& source_tags, const CatSet& machine_tags) {
  for (CatId i : source_tags) {
    ++support_[i];
    for (CatId j : machine_tags) ++counts_[{i, j}];
  }
}

CoMatrix CoMatrix::FromCounts(std::map<CatId, std::size_t> support,
                              std::map<Key, std::size_t> counts) {
  for (const auto& [key, n] : counts) {
    auto it = support.find(key.first);
    if (n == 0 || it == support.end() || n > it->second) {
      throw DataError("cooccur", "counts",
                      "inconsistent count for pair (" +
                          std::to_string(Value(key.first)) + "," +
                          std::to_string(Value(key.second)) + ")");
    }
  }
  CoMatrix co;
  co.support_ = std::move(support);
  co.counts_ = std::move(counts);
  return co;
}

CoMatrix ComputeCooccurrence(const TagStream& source, const TagStream& machine,
                             std::size_t shards) {
  if (source.size() != machine.size()) {
    throw DataError("cooccur", "image-mismatch",
                    "source and machine streams cover different images");
  }
  std::vector<std::pair<const CatSet*, const CatSet*>> images;
  images.reserve(source.size());
  for (auto s = source.begin(), m = machine.begin(); s != source.end(); ++s, ++m) {
    if (s->first != m->first) {
      throw DataError("cooccur", "image-mismatch",
                      "image " + s->first + " missing from one stream");
    }
    images.emplace_back(&s->second, &m->second);
  }

  shards = std::max<std::size_t>(1, std::min(shards, images.size()));
  std::vector<CoMatrix> partial(shards);
  {
    std::vector<std::jthread> workers;
    const std::size_t per = (images.size() + shards - 1) / std::max<std::size_t>(shards, 1);
    for (std::size_t s = 0; s < shards; ++s) {
      const std::size_t lo = std::min(images.size(), s * per);
      const std::size_t hi = std::min(images.size(), lo + per);
      workers.emplace_back([&, s, lo, hi] {
        for (std::size_t k = lo; k < hi; ++k) {
          partial[s].AddImage(*images[k].first, *images[k].second);
        }
      });
    }
  }
  CoMatrix total;
  for (const CoMatrix& p : partial) total.Merge(p);
  return total;
}

PairSet StrongPairs(const CoMatrix& co, const LabelGraph& graph,
                    double threshold) {
  PairSet out;
  for (const auto& [key, n] : co.counts()) {
    const auto [i, j] = key;
    if (co.Ratio(i, j) <= threshold) continue;
    if (graph.Related(i, j)) continue;
    out.insert(key);
  }
  return out;
}

Manifest AugmentByCooccurrence(const Manifest& manifest, const PairSet& pairs,
                               const LabelGraph& vocabulary) {
  std::map<CatId, std::vector<CatId>> targets;
  for (const auto& [i, j] : pairs) {
    for (CatId c : {i, j}) {
      if (!vocabulary.Contains(c)) {
        throw DataError("cooccur", "unknown-category",
                        "pair category " + std::to_string(Value(c)) +
                            " not in vocabulary");
      }
    }
    targets[i].push_back(j);
  }
  std::vector<ImageRecord> records = manifest.records();
  for (ImageRecord& r : records) {
    const CatSet original = r.TagSet();
    for (CatId i : original) {
      auto it = targets.find(i);
      if (it == targets.end()) continue;
      for (CatId j : it->second) {
        if (!r.HasTag(j)) r.AddTag(j, 1.0);
      }
    }
  }
  return Manifest::FromRecords(std::move(records));
}

Manifest PropagateManifest(const Manifest& manifest, const LabelGraph& graph) {
  std::vector<ImageRecord> records = manifest.records();
  for (ImageRecord& r : records) {
    for (CatId c : graph.PropagateTags(r.TagSet())) {
      if (!r.HasTag(c)) r.AddTag(c, 1.0);
    }
  }
  return Manifest::FromRecords(std::move(records));
}

void WriteCoMatrix(const CoMatrix& co, std::ostream& out) {
  for (const auto& [key, n] : co.counts()) {
    out << Value(key.first) << '\t' << Value(key.second) << '\t' << n << '\t'
        << co.Support(key.first) << '\t'
        << FormatFixed(co.Ratio(key.first, key.second), 6) << '\n';
  }
}

CoMatrix ParseCoMatrix(std::istream& in) {
  std::map<CatId, std::size_t> support;
  std::map<CoMatrix::Key, std::size_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = SplitString(line, '\t');
    auto fail = [&](const std::string& why) {
      return DataError("cooccur", "parse",
                       "line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 5) throw fail("expected 5 tab-separated fields");
    auto i = ParseUnsigned<std::uint32_t>(f[0]);
    auto j = ParseUnsigned<std::uint32_t>(f[1]);
    auto n_ij = ParseUnsigned<std::size_t>(f[2]);
    auto n_i = ParseUnsigned<std::size_t>(f[3]);
    if (!i || !j || !n_ij || !n_i || !ParseReal(f[4])) throw fail("bad field");
    auto [it, fresh] = support.emplace(CatId{*i}, *n_i);
    if (!fresh && it->second != *n_i) throw fail("inconsistent n_i");
    if (!counts.emplace(CoMatrix::Key{CatId{*i}, CatId{*j}}, *n_ij).second) {
      throw fail("repeated pair");
    }
  }
  return CoMatrix::FromCounts(std::move(support), std::move(counts));
}

void WritePairs(const PairSet& pairs, std::ostream& out) {
  for (const auto& [i, j] : pairs) out << Value(i) << '\t' << Value(j) << '\n';
}

PairSet ParsePairs(std::istream& in) {
  PairSet pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = SplitString(line, '\t');
    auto i = f.size() == 2 ? ParseUnsigned<std::uint32_t>(f[0]) : std::nullopt;
    auto j = f.size() == 2 ? ParseUnsigned<std::uint32_t>(f[1]) : std::nullopt;
    if (!i || !j) {
      throw DataError("cooccur", "parse",
                      "line " + std::to_string(line_no) + ": expected 'i<TAB>j'");
    }
    pairs.emplace(CatId{*i}, CatId{*j});
  }
  return pairs;
}

PairSet ReadPairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cooccur", "io", "cannot open " + path.string());
  return ParsePairs(in);
}

}  // namespace mlforge
