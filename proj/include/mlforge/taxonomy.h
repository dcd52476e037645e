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

#ifndef MLFORGE_TAXONOMY_H_
#define MLFORGE_TAXONOMY_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace mlforge {

// Category identifier shared by the taxonomy, manifests and co-occurrence
// tables.
enum class CatId : std::uint32_t {};

constexpr CatId MakeCatId(std::uint32_t v) { return CatId{v}; }
constexpr std::uint32_t Value(CatId id) { return static_cast<std::uint32_t>(id); }

using CatSet = std::set<CatId>;

struct Category {
  CatId id;
  std::string name;
  std::optional<std::string> concept_id;
};

struct HierarchyStats {
  std::size_t tree_count = 0;
  // Root-to-leaf path lengths, counted in nodes.
  std::size_t longest_path = 0;
  double mean_path = 0.0;
  std::size_t leaf_count = 0;
};

// A forest of categories. Every category has at most one parent and the
// parent relation is acyclic. Immutable once built.
class LabelGraph {
 public:
  struct Entry {
    Category category;
    std::optional<CatId> parent;
  };

  // Validates and builds. Throws mlforge::Error on duplicate ids, dangling
  // parents or cycles.
  static LabelGraph Build(std::vector<Entry> entries);

  std::size_t size() const { return categories_.size(); }
  bool Contains(CatId id) const { return index_.contains(id); }
  const Category& category(CatId id) const;
  std::optional<CatId> parent(CatId id) const;
  const std::vector<Category>& categories() const { return categories_; }
  CatSet Vocabulary() const;

  // Strict ancestors of `id`.
  CatSet Ancestors(CatId id) const;

  // `tags` plus every ancestor of every tag.
  CatSet PropagateTags(const CatSet& tags) const;

  // True when `descendant` == `ancestor` or `ancestor` lies on the parent
  // chain of `descendant`.
  bool IsAncestorOrSelf(CatId ancestor, CatId descendant) const;

  // Any path between a and b, in either direction.
  bool Related(CatId a, CatId b) const {
    return IsAncestorOrSelf(a, b) || IsAncestorOrSelf(b, a);
  }

  HierarchyStats Stats() const;

 private:
  std::size_t IndexOf(CatId id) const;

  std::vector<Category> categories_;
  std::vector<std::optional<std::size_t>> parent_;  // index into categories_
  std::vector<std::size_t> depth_;                  // root has depth 1
  std::unordered_map<CatId, std::size_t> index_;
};

// Parses the tab-separated taxonomy format:
//   cat_id <TAB> parent_id|-1 <TAB> concept_id|- <TAB> name
// Blank lines and lines starting with '#' are skipped.
LabelGraph ParseTaxonomy(std::istream& in);
LabelGraph LoadTaxonomy(const std::filesystem::path& path);

// Plain-text report of HierarchyStats.
std::string RenderHierarchyStats(const HierarchyStats& stats);

}  // namespace mlforge

#endif  // MLFORGE_TAXONOMY_H_
