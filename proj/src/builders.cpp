#include "nhl/builders.hpp"

#include <algorithm>
#include <string>

namespace nhl {

namespace {

struct Emitter {
  ComputeGraph g;

  std::string add(std::string id, LayerDescriptor layer, std::vector<std::string> preds,
                  std::string tag = "") {
    GraphNode n;
    n.id = std::move(id);
    n.layer = std::move(layer);
    n.preds = std::move(preds);
    n.tag = std::move(tag);
    g.add_node(std::move(n));
    return g.nodes().back().id;
  }
};

// conv -> bn -> relu; convs followed by BN carry no bias.
std::string conv_bn_relu(Emitter& e, const std::string& prefix, const std::string& from, int in_ch,
                         int out_ch, int k, int stride, int pad, const std::string& tag,
                         bool with_relu = true) {
  std::string cur = e.add(prefix + ".conv", Conv2dAttrs{in_ch, out_ch, k, k, stride, pad, 1, false},
                          {from}, tag);
  cur = e.add(prefix + ".bn", BatchNorm2dAttrs{out_ch}, {cur}, tag);
  if (with_relu) {
    cur = e.add(prefix + ".relu", ActivationAttrs{ActFn::relu}, {cur}, tag);
  }
  return cur;
}

// Standard bottleneck residual unit: 1x1 reduce, 3x3 (carries the stride),
// 1x1 expand, projection shortcut when shape changes.
std::string bottleneck(Emitter& e, const std::string& prefix, const std::string& from, int in_ch,
                       int mid_ch, int out_ch, int stride, const std::string& tag = "") {
  std::string cur = e.add(prefix + ".conv1", Conv2dAttrs{in_ch, mid_ch, 1, 1, 1, 0, 1, false}, {from}, tag);
  cur = e.add(prefix + ".bn1", BatchNorm2dAttrs{mid_ch}, {cur}, tag);
  cur = e.add(prefix + ".relu1", ActivationAttrs{ActFn::relu}, {cur}, tag);
  cur = e.add(prefix + ".conv2", Conv2dAttrs{mid_ch, mid_ch, 3, 3, stride, 1, 1, false}, {cur}, tag);
  cur = e.add(prefix + ".bn2", BatchNorm2dAttrs{mid_ch}, {cur}, tag);
  cur = e.add(prefix + ".relu2", ActivationAttrs{ActFn::relu}, {cur}, tag);
  cur = e.add(prefix + ".conv3", Conv2dAttrs{mid_ch, out_ch, 1, 1, 1, 0, 1, false}, {cur}, tag);
  cur = e.add(prefix + ".bn3", BatchNorm2dAttrs{out_ch}, {cur}, tag);

  std::string shortcut = from;
  if (in_ch != out_ch || stride != 1) {
    shortcut = e.add(prefix + ".down.conv", Conv2dAttrs{in_ch, out_ch, 1, 1, stride, 0, 1, false}, {from}, tag);
    shortcut = e.add(prefix + ".down.bn", BatchNorm2dAttrs{out_ch}, {shortcut}, tag);
  }
  cur = e.add(prefix + ".add", AddAttrs{}, {cur, shortcut}, tag);
  return e.add(prefix + ".relu3", ActivationAttrs{ActFn::relu}, {cur}, tag);
}

std::string stage(Emitter& e, const std::string& name, int blocks, const std::string& from, int in_ch,
                  int mid_ch, int out_ch, int first_stride) {
  std::string cur = from;
  for (int b = 1; b <= blocks; ++b) {
    cur = bottleneck(e, name + "_" + std::to_string(b), cur, b == 1 ? in_ch : out_ch, mid_ch, out_ch,
                     b == 1 ? first_stride : 1);
  }
  return cur;
}

// Stem plus stages conv2_x..conv4_x. Returns the split-point node id.
std::string emit_trunk(Emitter& e, TrunkOptions opts) {
  e.g.input_shape = opts.small_image ? Shape3{3, 32, 32} : Shape3{3, 224, 224};
  std::string cur = e.add("input", InputAttrs{}, {});
  cur = conv_bn_relu(e, "stem", cur, 3, 64, 7, opts.small_image ? 1 : 2, 3, "");
  if (!opts.small_image) {
    cur = e.add("stem.pool", MaxPool2dAttrs{3, 3, 2, 1}, {cur});
  }
  cur = stage(e, "conv2", 3, cur, 64, 64, 256, 1);
  cur = stage(e, "conv3", 4, cur, 256, 128, 512, 2);
  cur = stage(e, "conv4", 6, cur, 512, 256, 1024, 2);
  return cur;
}

}  // namespace

ComputeGraph build_trunk(Backbone backbone, TrunkOptions opts) {
  if (backbone != Backbone::resnet50) {
    throw ValidationError("UnsupportedBackbone", "only resnet50 is supported");
  }
  Emitter e;
  emit_trunk(e, opts);
  return std::move(e.g);
}

ComputeGraph build_baseline_resnet50(int num_classes, TrunkOptions opts) {
  if (num_classes < 1) {
    throw ValidationError("InvalidClassCount", "num_classes must be >= 1, got " + std::to_string(num_classes));
  }
  Emitter e;
  std::string cur = emit_trunk(e, opts);
  cur = stage(e, "conv5", 3, cur, 1024, 512, 2048, 2);
  cur = e.add("head.gap", GlobalAvgPoolAttrs{}, {cur});
  cur = e.add("head.fc", LinearAttrs{2048, num_classes, true, {}}, {cur});
  for (int c = 0; c < num_classes; ++c) {
    e.g.logit_layout.push_back({c, "head.fc", c});
  }
  return std::move(e.g);
}

ComputeGraph build_nhl(const ComputeGraph& trunk, const Taxonomy& tax, const BranchConfig& cfg) {
  if (cfg.blocks_per_node < 1 || cfg.level1_stride < 1 || cfg.bottleneck_reduction < 1) {
    throw ValidationError("MalformedDocument", "branch config fields must be positive");
  }
  for (int w : cfg.channel_schedule) {
    if (w < 1) throw ValidationError("MalformedDocument", "channel_schedule entries must be positive");
  }
  if (static_cast<int>(cfg.channel_schedule.size()) < tax.max_internal_level()) {
    throw ValidationError("ScheduleTooShort",
                          "channel_schedule has " + std::to_string(cfg.channel_schedule.size()) +
                              " entries but the taxonomy has branch levels up to " +
                              std::to_string(tax.max_internal_level()));
  }
  const std::vector<std::string> exits = trunk.terminals();
  if (exits.size() != 1) {
    throw ValidationError("TrunkNotTerminal",
                          "trunk must have exactly one terminal node, found " + std::to_string(exits.size()));
  }
  for (int c = 0; c < tax.num_categories(); ++c) {
    if (tax.node(tax.leaf_of(c)).level == 1) {
      throw ValidationError("LeafUnderRoot",
                            "category " + std::to_string(c) +
                                " is attached directly under the root; it has no branch to serve it");
    }
  }
  const std::string split_point = exits[0];
  const ComputeGraph annotated = infer_shapes(trunk);  // validates the trunk too
  const int split_channels = annotated.node(split_point).out_shape->c;

  Emitter e;
  e.g = trunk;

  // Branch output node per taxonomy node id; children nest onto it.
  std::unordered_map<std::string, std::string> branch_out;

  for (int ti : tax.internal_nodes()) {
    const TaxNode& t = tax.node(ti);
    const int level = t.level;
    const int width = cfg.channel_schedule[level - 1];
    const int mid = std::max(width / cfg.bottleneck_reduction, 1);
    const TaxNode& parent = tax.node(t.parent);
    std::string cur = (level == 1) ? split_point : branch_out.at(parent.id);
    int in_ch = (level == 1) ? split_channels : cfg.channel_schedule[level - 2];
    const std::string prefix = "branch." + t.id;
    for (int u = 1; u <= cfg.blocks_per_node; ++u) {
      const int stride = (u == 1 && level == 1) ? cfg.level1_stride : 1;
      cur = bottleneck(e, prefix + ".u" + std::to_string(u), cur, in_ch, mid, width, stride, t.id);
      in_ch = width;
    }
    branch_out[t.id] = cur;

    // Head where this node is the last internal node on some leaf's path.
    std::vector<CategoryId> leaf_children;
    for (int ci : t.children) {
      if (tax.node(ci).is_leaf()) leaf_children.push_back(*tax.node(ci).class_index);
    }
    if (!leaf_children.empty()) {
      std::string pooled = e.add(prefix + ".head.gap", GlobalAvgPoolAttrs{}, {cur}, t.id);
      std::string fc = e.add(prefix + ".head.fc",
                             LinearAttrs{width, static_cast<int>(leaf_children.size()), true, {}},
                             {pooled}, t.id);
      for (size_t i = 0; i < leaf_children.size(); ++i) {
        e.g.logit_layout.push_back({leaf_children[i], fc, static_cast<int>(i)});
      }
    }
  }

  // Canonical layout: ascending category index; slot position == category.
  std::sort(e.g.logit_layout.begin(), e.g.logit_layout.end(),
            [](const LogitSlot& a, const LogitSlot& b) { return a.category < b.category; });
  return std::move(e.g);
}

}  // namespace nhl
