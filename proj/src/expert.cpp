#include "nhl/expert.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace nhl {

namespace {

void validate_spec(const ExpertSpec& spec, int num_categories) {
  if (spec.categories.empty()) {
    throw ValidationError("EmptySubset", "expert needs at least one category");
  }
  std::unordered_set<CategoryId> seen;
  for (CategoryId c : spec.categories) {
    if (c < 0 || c >= num_categories) {
      throw ValidationError("UnknownCategory", "category " + std::to_string(c) + " out of range [0," +
                                                   std::to_string(num_categories) + ")");
    }
    if (!seen.insert(c).second) {
      throw ValidationError("UnknownCategory", "category " + std::to_string(c) + " listed twice");
    }
  }
}

}  // namespace

ComputeGraph extract_expert(const ComputeGraph& full, const Taxonomy& tax, const ExpertSpec& spec,
                            bool keep_whole_heads) {
  validate_spec(spec, tax.num_categories());
  const bool any_tagged =
      std::any_of(full.nodes().begin(), full.nodes().end(), [](const GraphNode& n) { return !n.tag.empty(); });
  if (!any_tagged || full.logit_layout.empty()) {
    throw ValidationError("NotAnNhlGraph", "graph has no tagged branch regions");
  }

  const std::set<std::string> cover = tax.cover_set(spec.categories);
  const std::unordered_set<CategoryId> wanted(spec.categories.begin(), spec.categories.end());

  // Which head FC produces each category, per the full graph's layout.
  std::unordered_map<std::string, std::vector<LogitSlot>> slots_by_node;
  for (const LogitSlot& s : full.logit_layout) {
    slots_by_node[s.node].push_back(s);
  }

  // Heads to keep: FC nodes serving at least one requested category.
  // For each, the offsets that stay, in stored-row order.
  std::unordered_map<std::string, std::vector<int>> kept_rows;
  std::unordered_set<std::string> dropped_heads;  // gap/fc node ids of unused heads
  for (auto& [fc_id, slots] : slots_by_node) {
    std::vector<int> rows;
    for (const LogitSlot& s : slots) {
      if (wanted.count(s.category)) rows.push_back(s.offset);
    }
    if (rows.empty()) {
      dropped_heads.insert(fc_id);
      for (const std::string& p : full.node(fc_id).preds) {
        if (kind_of(full.node(p).layer) == LayerKind::global_avg_pool) dropped_heads.insert(p);
      }
      continue;
    }
    std::sort(rows.begin(), rows.end());
    kept_rows[fc_id] = std::move(rows);
  }

  ComputeGraph expert;
  expert.input_shape = full.input_shape;
  for (const GraphNode& n : full.nodes()) {
    if (!n.tag.empty()) {
      if (cover.find(n.tag) == cover.end()) continue;
      if (dropped_heads.count(n.id)) continue;
    }
    GraphNode copy = n;
    copy.out_shape.reset();
    if (!keep_whole_heads && kind_of(n.layer) == LayerKind::linear) {
      auto it = kept_rows.find(n.id);
      if (it != kept_rows.end()) {
        auto& l = std::get<LinearAttrs>(copy.layer);
        if (static_cast<int>(it->second.size()) < l.out_features) {
          l.row_select = it->second;
          l.out_features = static_cast<int>(it->second.size());
        }
      }
    }
    expert.add_node(std::move(copy));
  }

  // Layout re-indexed to spec order. Offsets address the (possibly sliced)
  // head output: position of the original row within the kept row list.
  for (CategoryId c : spec.categories) {
    const auto slot_it =
        std::find_if(full.logit_layout.begin(), full.logit_layout.end(),
                     [c](const LogitSlot& s) { return s.category == c; });
    if (slot_it == full.logit_layout.end()) {
      throw ValidationError("UnknownCategory", "category " + std::to_string(c) + " not served by the graph");
    }
    int offset = slot_it->offset;
    if (!keep_whole_heads) {
      const auto& rows = kept_rows.at(slot_it->node);
      if (static_cast<int>(rows.size()) < static_cast<int>(slots_by_node.at(slot_it->node).size())) {
        offset = static_cast<int>(std::lower_bound(rows.begin(), rows.end(), slot_it->offset) - rows.begin());
      }
    }
    expert.logit_layout.push_back({c, slot_it->node, offset});
  }
  return expert;
}

std::string expert_count(int n) {
  if (n < 1) {
    throw ValidationError("NonPositive", "category count must be >= 1, got " + std::to_string(n));
  }
  // 2^n - 1 by repeated doubling over base-10^9 limbs, little-endian.
  std::vector<unsigned long long> limbs{1};
  constexpr unsigned long long kBase = 1000000000ULL;
  for (int i = 0; i < n; ++i) {
    unsigned long long carry = 0;
    for (auto& limb : limbs) {
      limb = limb * 2 + carry;
      carry = limb / kBase;
      limb %= kBase;
    }
    if (carry) limbs.push_back(carry);
  }
  limbs[0] -= 1;  // 2^n ends in 2,4,6,8 for n>=1, so no borrow
  std::string out = std::to_string(limbs.back());
  char buf[16];
  for (auto it = limbs.rbegin() + 1; it != limbs.rend(); ++it) {
    std::snprintf(buf, sizeof(buf), "%09llu", *it);
    out += buf;
  }
  return out;
}

}  // namespace nhl
