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

// Helpers and independent brute-force oracles shared by the test binaries.
// Oracles work on plain containers and never call the code they check.

#ifndef MLFORGE_TESTS_TESTING_H_
#define MLFORGE_TESTS_TESTING_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mlforge/curation.h"
#include "mlforge/error.h"
#include "mlforge/rng.h"
#include "mlforge/taxonomy.h"

namespace mlforge::testing {

// Returns the error code thrown by `f`, or "" when nothing was thrown.
template <class F>
std::string ErrorCode(F&& f, ErrorKind* kind = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (kind != nullptr) *kind = e.kind();
    return e.module() + ":" + e.code();
  }
  return "";
}

inline LabelGraph TaxonomyFromText(const std::string& text) {
  std::istringstream in(text);
  return ParseTaxonomy(in);
}

inline Manifest ManifestFromText(const std::string& text) {
  std::istringstream in(text);
  return ParseManifest(in);
}

inline CatId C(std::uint32_t v) { return MakeCatId(v); }

inline CatSet Cats(std::initializer_list<std::uint32_t> ids) {
  CatSet out;
  for (auto v : ids) out.insert(MakeCatId(v));
  return out;
}

// Random forest over ids 0..n-1 as a parent array (-1 for roots). Parents
// always have smaller ids, so the forest is acyclic; ids are then relabeled
// through a random permutation.
inline std::vector<long> RandomForest(std::size_t n, Rng& rng, double root_prob = 0.1) {
  std::vector<long> parent(n, -1);
  for (std::size_t i = 1; i < n; ++i) {
    if (!rng.Bernoulli(root_prob)) parent[i] = static_cast<long>(rng.Below(i));
  }
  const auto perm = Permutation(n, rng);
  std::vector<long> relabeled(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    relabeled[perm[i]] = parent[i] < 0 ? -1 : static_cast<long>(perm[parent[i]]);
  }
  return relabeled;
}

inline LabelGraph GraphFromParents(const std::vector<long>& parent) {
  std::vector<LabelGraph::Entry> entries;
  for (std::size_t i = 0; i < parent.size(); ++i) {
    LabelGraph::Entry e;
    e.category.id = MakeCatId(static_cast<std::uint32_t>(i));
    e.category.name = "c" + std::to_string(i);
    if (parent[i] >= 0) e.parent = MakeCatId(static_cast<std::uint32_t>(parent[i]));
    entries.push_back(e);
  }
  return LabelGraph::Build(std::move(entries));
}

// Oracle: iterative walk up the parent array.
inline std::set<long> WalkAncestors(const std::vector<long>& parent, long c) {
  std::set<long> out;
  for (long p = parent[static_cast<std::size_t>(c)]; p >= 0;
       p = parent[static_cast<std::size_t>(p)]) {
    out.insert(p);
  }
  return out;
}

// Plain tag table: image_id -> (cat -> confidence), in manifest order.
using TagTable = std::vector<std::pair<std::string, std::map<std::uint32_t, double>>>;

inline TagTable TableOf(const Manifest& m) {
  TagTable t;
  for (const ImageRecord& r : m.records()) {
    std::map<std::uint32_t, double> tags;
    for (const Tag& tag : r.tags) tags[Value(tag.cat)] = tag.confidence;
    t.emplace_back(r.image_id, tags);
  }
  return t;
}

// Oracle: rewrite every tag set to its closure under `parent`, repeating
// single-step parent insertion until nothing changes. New tags get 1.0.
inline TagTable RewriteHierarchy(TagTable t, const std::vector<long>& parent) {
  for (auto& [id, tags] : t) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& [cat, conf] : std::map<std::uint32_t, double>(tags)) {
        const long p = parent[cat];
        if (p >= 0 && !tags.contains(static_cast<std::uint32_t>(p))) {
          tags[static_cast<std::uint32_t>(p)] = 1.0;
          changed = true;
        }
      }
    }
  }
  return t;
}

// Oracle: one co-occurrence round; a record tagged i before the round gains
// j for every pair (i, j). New tags get 1.0.
inline TagTable RewriteCooccurrence(
    TagTable t, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  for (auto& [id, tags] : t) {
    const auto before = tags;
    for (const auto& [i, j] : pairs) {
      if (before.contains(i) && !tags.contains(j)) tags[j] = 1.0;
    }
  }
  return t;
}

// Oracle: instance-level P/R/F1 with nested loops. Top-k picks the k largest
// scores, lower column first on ties. Rows with no positive label are
// skipped when `exclude_empty`.
struct BruteMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t counted = 0;
};

inline BruteMetrics BruteInstanceMetrics(const std::vector<std::vector<int>>& y,
                                         const std::vector<std::vector<double>>& s,
                                         std::size_t k, bool exclude_empty) {
  BruteMetrics out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t m = y[i].size();
    std::vector<int> picked(m, 0);
    for (std::size_t round = 0; round < k; ++round) {
      std::size_t best = m;
      for (std::size_t j = 0; j < m; ++j) {
        if (picked[j]) continue;
        if (best == m || s[i][j] > s[i][best]) best = j;
      }
      picked[best] = 1;
    }
    std::size_t positives = 0, hits = 0;
    for (std::size_t j = 0; j < m; ++j) {
      positives += static_cast<std::size_t>(y[i][j]);
      hits += static_cast<std::size_t>(y[i][j] && picked[j]);
    }
    if (positives == 0 && exclude_empty) continue;
    const double p = static_cast<double>(hits) / static_cast<double>(k);
    const double r = positives == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(positives);
    const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    out.precision += p;
    out.recall += r;
    out.f1 += f;
    ++out.counted;
  }
  if (out.counted > 0) {
    const double n = static_cast<double>(out.counted);
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
  }
  return out;
}

// Oracle: the ring all-reduce result for element e of chunk c is
// v[c+1][e] + v[c+2][e] + ... + v[c+k][e] (indices mod k), left to right,
// with chunks of ceil(d/k) elements.
inline std::vector<double> RingOrderSum(const std::vector<std::vector<double>>& v) {
  const std::size_t k = v.size();
  const std::size_t d = v.front().size();
  const std::size_t chunk = (d + k - 1) / k;
  std::vector<double> out(d);
  for (std::size_t e = 0; e < d; ++e) {
    const std::size_t c = e / chunk;
    double acc = v[(c + 1) % k][e];
    for (std::size_t t = 2; t <= k; ++t) acc = acc + v[(c + t) % k][e];
    out[e] = acc;
  }
  return out;
}

}  // namespace mlforge::testing

#endif  // MLFORGE_TESTS_TESTING_H_
