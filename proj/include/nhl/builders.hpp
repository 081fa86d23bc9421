#pragma once

#include "nhl/graph.hpp"
#include "nhl/taxonomy.hpp"

namespace nhl {

enum class Backbone { resnet50 };

struct TrunkOptions {
  // 32x32-input variant: stem conv stride 1 and no stem maxpool. The cost
  // and reduction analyses always use the 224x224 trunk.
  bool small_image = false;
};

struct BranchConfig {
  std::vector<int> channel_schedule{128, 64, 32};  // block output width per level
  int blocks_per_node = 1;
  int level1_stride = 2;
  int bottleneck_reduction = 4;  // mid channels = width / reduction
};

// Standard ResNet50: stem, four bottleneck stages (3/4/6/3), global average
// pool, FC. Conv layers followed by a norm carry no bias.
ComputeGraph build_baseline_resnet50(int num_classes, TrunkOptions opts = {});

// Backbone with the fifth conv stage and the FC deleted; the terminal node is
// the split point where level-1 branches attach.
ComputeGraph build_trunk(Backbone backbone, TrunkOptions opts = {});

// Attaches one nested branch region per internal taxonomy node to the trunk's
// terminal tensor and a pool+FC head at the deepest internal node of every
// leaf path. All nodes created for taxonomy node t are tagged t.
ComputeGraph build_nhl(const ComputeGraph& trunk, const Taxonomy& tax, const BranchConfig& cfg = {});

}  // namespace nhl
