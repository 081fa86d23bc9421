#pragma once

#include <string>
#include <vector>

#include "nhl/graph.hpp"
#include "nhl/taxonomy.hpp"

namespace nhl {

// A nonempty ordered subset of category indices. Order defines the expert's
// logit slot order; duplicates are rejected.
struct ExpertSpec {
  std::vector<CategoryId> categories;
};

// Returns the subgraph containing the whole trunk, every branch region in
// cover_set(tax, spec), and the heads serving at least one requested
// category. Heads whose leaf group is only partially requested are sliced to
// the needed rows via LinearAttrs::row_select (original weights untouched, so
// any checkpoint of `full` drives the expert). `keep_whole_heads` disables
// slicing. Retained node ids and attributes are identical to `full`.
ComputeGraph extract_expert(const ComputeGraph& full, const Taxonomy& tax, const ExpertSpec& spec,
                            bool keep_whole_heads = false);

// 2^n - 1 as an exact decimal string (arbitrary precision).
std::string expert_count(int n);

}  // namespace nhl
