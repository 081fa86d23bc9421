#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nhl/errors.hpp"

namespace nhl {

using CategoryId = int;

// One node of the category hierarchy. Nodes live in a flat arena inside
// Taxonomy (document order); `parent`/`children` are arena indices.
struct TaxNode {
  std::string id;    // "/" for the synthetic root, else slash-joined name path
  std::string name;
  int level = 0;     // root 0, its children 1, ...
  int parent = -1;
  std::vector<int> children;
  std::optional<CategoryId> class_index;

  bool is_leaf() const { return children.empty(); }
};

// Immutable after construction; safe for unrestricted concurrent reads.
class Taxonomy {
 public:
  // Parses and validates the taxonomy JSON document (see README for the
  // format). Throws ValidationError with codes MalformedDocument,
  // EmptyTaxonomy, MissingClassIndex, DuplicateClassIndex, DepthExceeded,
  // DuplicateSiblingName.
  static Taxonomy parse(const std::string& document_text);
  static Taxonomy load(const std::filesystem::path& path);

  int num_categories() const { return num_categories_; }
  int max_levels() const { return max_levels_; }
  int max_leaf_level() const { return max_leaf_level_; }
  // Deepest level that owns a branch in an NHL graph.
  int max_internal_level() const { return max_internal_level_; }

  const TaxNode& root() const { return nodes_[0]; }
  const TaxNode& node(int arena_index) const { return nodes_.at(arena_index); }
  int size() const { return static_cast<int>(nodes_.size()); }

  const TaxNode* find(std::string_view node_id) const;

  // Internal nodes from level 1 down to the leaf's parent, in path order.
  // Excludes the root and the leaf itself.
  std::vector<std::string> ancestor_path(CategoryId c) const;

  // Union of ancestor_path over the subset: exactly the branch nodes an
  // expert for `subset` must retain.
  std::set<std::string> cover_set(const std::vector<CategoryId>& subset) const;

  // All leaf class indices in the subtree, in document order.
  std::vector<CategoryId> leaves_under(std::string_view node_id) const;

  // Arena indices of internal (non-root, non-leaf) nodes in document order.
  const std::vector<int>& internal_nodes() const { return internal_; }
  // Arena index of the leaf carrying class index c.
  int leaf_of(CategoryId c) const;

 private:
  Taxonomy() = default;

  std::vector<TaxNode> nodes_;  // [0] = synthetic root
  std::vector<int> leaf_of_category_;
  std::vector<int> internal_;
  int num_categories_ = 0;
  int max_levels_ = 3;
  int max_leaf_level_ = 0;
  int max_internal_level_ = 0;
};

}  // namespace nhl
