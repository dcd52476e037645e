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

#include "mlforge/taxonomy.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {

LabelGraph LabelGraph::Build(std::vector<Entry> entries) {
  LabelGraph g;
  g.categories_.reserve(entries.size());
  for (const Entry& e : entries) {
    if (!g.index_.emplace(e.category.id, g.categories_.size()).second) {
      throw DataError("taxonomy", "duplicate",
                      "duplicate cat_id " + std::to_string(Value(e.category.id)));
    }
    g.categories_.push_back(e.category);
  }
  g.parent_.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].parent) continue;
    auto it = g.index_.find(*entries[i].parent);
    if (it == g.index_.end()) {
      throw DataError("taxonomy", "dangling-parent",
                      "cat_id " + std::to_string(Value(entries[i].category.id)) +
                          " references missing parent " +
                          std::to_string(Value(*entries[i].parent)));
    }
    g.parent_[i] = it->second;
  }

  // Depths by walking parent chains; state 1 marks nodes on the current walk.
  constexpr std::size_t kUnset = 0;
  g.depth_.assign(entries.size(), kUnset);
  std::vector<char> on_walk(entries.size(), 0);
  std::vector<std::size_t> walk;
  for (std::size_t start = 0; start < entries.size(); ++start) {
    if (g.depth_[start] != kUnset) continue;
    walk.clear();
    std::size_t node = start;
    std::size_t base = 0;
    while (true) {
      if (g.depth_[node] != kUnset) {
        base = g.depth_[node];
        break;
      }
      if (on_walk[node]) {
        throw DataError("taxonomy", "cycle",
                        "parent cycle through cat_id " +
                            std::to_string(Value(g.categories_[node].id)));
      }
      on_walk[node] = 1;
      walk.push_back(node);
      if (!g.parent_[node]) break;
      node = *g.parent_[node];
    }
    for (auto it = walk.rbegin(); it != walk.rend(); ++it) {
      g.depth_[*it] = ++base;
      on_walk[*it] = 0;
    }
  }
  return g;
}

std::size_t LabelGraph::IndexOf(CatId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw DataError("taxonomy", "unknown-category",
                    "unknown cat_id " + std::to_string(Value(id)));
  }
  return it->second;
}

const Category& LabelGraph::category(CatId id) const {
  return categories_[IndexOf(id)];
}

std::optional<CatId> LabelGraph::parent(CatId id) const {
  const auto& p = parent_[IndexOf(id)];
  if (!p) return std::nullopt;
  return categories_[*p].id;
}

CatSet LabelGraph::Vocabulary() const {
  CatSet out;
  for (const Category& c : categories_) out.insert(c.id);
  return out;
}

CatSet LabelGraph::Ancestors(CatId id) const {
  CatSet out;
  for (auto p = parent_[IndexOf(id)]; p; p = parent_[*p]) {
    out.insert(categories_[*p].id);
  }
  return out;
}

CatSet LabelGraph::PropagateTags(const CatSet& tags) const {
  CatSet out;
  for (CatId tag : tags) {
    std::optional<std::size_t> node = IndexOf(tag);
    // Stop early once we hit a node already in the closure: its ancestors
    // are there too.
    while (node && out.insert(categories_[*node].id).second) {
      node = parent_[*node];
    }
  }
  return out;
}

bool LabelGraph::IsAncestorOrSelf(CatId ancestor, CatId descendant) const {
  const std::size_t target = IndexOf(ancestor);
  for (std::optional<std::size_t> n = IndexOf(descendant); n; n = parent_[*n]) {
    if (*n == target) return true;
  }
  return false;
}

HierarchyStats LabelGraph::Stats() const {
  HierarchyStats s;
  std::vector<char> has_child(categories_.size(), 0);
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (parent_[i]) {
      has_child[*parent_[i]] = 1;
    } else {
      ++s.tree_count;
    }
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (has_child[i]) continue;
    ++s.leaf_count;
    total += depth_[i];
    s.longest_path = std::max(s.longest_path, depth_[i]);
  }
  if (s.leaf_count > 0) {
    s.mean_path = static_cast<double>(total) / static_cast<double>(s.leaf_count);
  }
  return s;
}

LabelGraph ParseTaxonomy(std::istream& in) {
  std::vector<LabelGraph::Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = SplitString(line, '\t');
    auto fail = [&](const std::string& why) {
      return DataError("taxonomy", "parse",
                       "line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 4) throw fail("expected 4 tab-separated fields");
    LabelGraph::Entry e;
    auto id = ParseUnsigned<std::uint32_t>(fields[0]);
    if (!id) throw fail("bad cat_id '" + std::string(fields[0]) + "'");
    e.category.id = CatId{*id};
    if (fields[1] != "-1") {
      auto parent = ParseUnsigned<std::uint32_t>(fields[1]);
      if (!parent) throw fail("bad parent_id '" + std::string(fields[1]) + "'");
      if (*parent == *id) {
        throw DataError("taxonomy", "cycle",
                        "line " + std::to_string(line_no) + ": cat_id " +
                            std::to_string(*id) + " is its own parent");
      }
      e.parent = CatId{*parent};
    }
    if (fields[2] != "-") e.category.concept_id = std::string(fields[2]);
    if (fields[3].empty()) throw fail("empty name");
    e.category.name = std::string(fields[3]);
    entries.push_back(std::move(e));
  }
  return LabelGraph::Build(std::move(entries));
}

LabelGraph LoadTaxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("taxonomy", "io", "cannot open " + path.string());
  }
  return ParseTaxonomy(in);
}

std::string RenderHierarchyStats(const HierarchyStats& stats) {
  std::ostringstream out;
  out << "# path lengths count nodes on root-to-leaf paths\n";
  out << "tree_count=" << stats.tree_count << "\n";
  out << "leaf_count=" << stats.leaf_count << "\n";
  out << "longest_path=" << stats.longest_path << "\n";
  out << "mean_path=" << FormatFixed(stats.mean_path, 4) << "\n";
  return out.str();
}

}  // namespace mlforge
