#include "nhl/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace nhl {

namespace {

using json = nlohmann::json;

void parse_node(const json& j, Taxonomy& tax, std::vector<TaxNode>& nodes,
                int parent_index, int level, int max_levels) {
  if (!j.is_object() || !j.contains("name") || !j.at("name").is_string()) {
    throw ValidationError("MalformedDocument", "taxonomy node must be an object with a string \"name\"");
  }
  const std::string name = j.at("name").get<std::string>();
  if (name.empty()) {
    throw ValidationError("MalformedDocument", "taxonomy node name must be nonempty");
  }

  TaxNode node;
  node.name = name;
  node.level = level;
  node.parent = parent_index;
  node.id = (parent_index == 0) ? name : nodes[parent_index].id + "/" + name;

  const bool has_children = j.contains("children");
  const bool has_index = j.contains("class_index");
  if (has_children && has_index) {
    throw ValidationError("MalformedDocument",
                          "node \"" + node.id + "\" has both children and class_index");
  }

  const int my_index = static_cast<int>(nodes.size());
  nodes.push_back(std::move(node));
  nodes[parent_index].children.push_back(my_index);

  if (has_children) {
    const json& kids = j.at("children");
    if (!kids.is_array() || kids.empty()) {
      throw ValidationError("MalformedDocument",
                            "internal node \"" + nodes[my_index].id + "\" must have a nonempty children array");
    }
    for (const json& kid : kids) {
      parse_node(kid, tax, nodes, my_index, level + 1, max_levels);
    }
    return;
  }

  // Leaf.
  if (!has_index) {
    throw ValidationError("MissingClassIndex", "leaf \"" + nodes[my_index].id + "\" carries no class_index");
  }
  const json& idx = j.at("class_index");
  if (!idx.is_number_integer() || idx.get<long long>() < 0) {
    throw ValidationError("MalformedDocument",
                          "class_index of leaf \"" + nodes[my_index].id + "\" must be a nonnegative integer");
  }
  if (level > max_levels) {
    throw ValidationError("DepthExceeded", "leaf \"" + nodes[my_index].id + "\" is at level " +
                                               std::to_string(level) + " > max_levels " +
                                               std::to_string(max_levels));
  }
  nodes[my_index].class_index = static_cast<CategoryId>(idx.get<long long>());
}

}  // namespace

Taxonomy Taxonomy::parse(const std::string& document_text) {
  json doc;
  try {
    doc = json::parse(document_text);
  } catch (const json::exception& e) {
    throw ValidationError("MalformedDocument", e.what());
  }
  if (!doc.is_object() || !doc.contains("root")) {
    throw ValidationError("MalformedDocument", "taxonomy document must be an object with a \"root\" node");
  }

  Taxonomy tax;
  tax.max_levels_ = 3;
  if (doc.contains("max_levels")) {
    if (!doc.at("max_levels").is_number_integer() || doc.at("max_levels").get<int>() < 1) {
      throw ValidationError("MalformedDocument", "max_levels must be a positive integer");
    }
    tax.max_levels_ = doc.at("max_levels").get<int>();
  }

  const json& root = doc.at("root");
  TaxNode root_node;
  root_node.id = "/";
  root_node.name = root.is_object() && root.contains("name") && root.at("name").is_string()
                       ? root.at("name").get<std::string>()
                       : "root";
  root_node.level = 0;
  tax.nodes_.push_back(std::move(root_node));

  if (!root.is_object() || !root.contains("children") || !root.at("children").is_array() ||
      root.at("children").empty()) {
    throw ValidationError("EmptyTaxonomy", "root has no children");
  }
  for (const json& kid : root.at("children")) {
    parse_node(kid, tax, tax.nodes_, 0, 1, tax.max_levels_);
  }

  // Sibling names must be unique (node ids are name paths).
  for (const TaxNode& n : tax.nodes_) {
    std::unordered_set<std::string> seen;
    for (int ci : n.children) {
      if (!seen.insert(tax.nodes_[ci].name).second) {
        throw ValidationError("DuplicateSiblingName",
                              "name \"" + tax.nodes_[ci].name + "\" repeats under \"" + n.id + "\"");
      }
    }
  }

  // Leaf class indices must be a bijection with [0, N).
  std::vector<int> leaves;
  for (int i = 1; i < static_cast<int>(tax.nodes_.size()); ++i) {
    const TaxNode& n = tax.nodes_[i];
    if (n.is_leaf()) {
      leaves.push_back(i);
      tax.max_leaf_level_ = std::max(tax.max_leaf_level_, n.level);
    } else {
      tax.internal_.push_back(i);
      tax.max_internal_level_ = std::max(tax.max_internal_level_, n.level);
    }
  }
  const int n_cat = static_cast<int>(leaves.size());
  tax.num_categories_ = n_cat;
  tax.leaf_of_category_.assign(n_cat, -1);
  std::unordered_map<CategoryId, int> first_holder;
  for (int li : leaves) {
    const CategoryId c = *tax.nodes_[li].class_index;
    if (!first_holder.emplace(c, li).second) {
      throw ValidationError("DuplicateClassIndex", "class index " + std::to_string(c) + " appears twice");
    }
  }
  for (const auto& [c, li] : first_holder) {
    if (c >= n_cat) {
      throw ValidationError("MissingClassIndex",
                            "leaf indices must cover [0," + std::to_string(n_cat) + ") without gaps; got index " +
                                std::to_string(c));
    }
    tax.leaf_of_category_[c] = li;
  }
  return tax;
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("FileOpenFailed", "cannot open taxonomy file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const TaxNode* Taxonomy::find(std::string_view node_id) const {
  for (const TaxNode& n : nodes_) {
    if (n.id == node_id) return &n;
  }
  return nullptr;
}

int Taxonomy::leaf_of(CategoryId c) const {
  if (c < 0 || c >= num_categories_) {
    throw ValidationError("UnknownCategory", "category " + std::to_string(c) + " out of range [0," +
                                                 std::to_string(num_categories_) + ")");
  }
  return leaf_of_category_[c];
}

std::vector<std::string> Taxonomy::ancestor_path(CategoryId c) const {
  int idx = nodes_[leaf_of(c)].parent;
  std::vector<std::string> path;
  while (idx > 0) {
    path.push_back(nodes_[idx].id);
    idx = nodes_[idx].parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::set<std::string> Taxonomy::cover_set(const std::vector<CategoryId>& subset) const {
  if (subset.empty()) {
    throw ValidationError("EmptySubset", "category subset must be nonempty");
  }
  std::set<std::string> cover;
  for (CategoryId c : subset) {
    for (std::string& id : ancestor_path(c)) {
      cover.insert(std::move(id));
    }
  }
  return cover;
}

std::vector<CategoryId> Taxonomy::leaves_under(std::string_view node_id) const {
  const TaxNode* start = find(node_id);
  if (start == nullptr) {
    throw ValidationError("UnknownNode", "no taxonomy node with id \"" + std::string(node_id) + "\"");
  }
  std::vector<CategoryId> out;
  // Arena order is document order, so a DFS that pushes children in order
  // yields leaves in document order.
  std::vector<int> stack{static_cast<int>(start - nodes_.data())};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const TaxNode& n = nodes_[i];
    if (n.is_leaf() && n.class_index) {
      out.push_back(*n.class_index);
      continue;
    }
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      stack.push_back(*it);
    }
  }
  return out;
}

}  // namespace nhl
