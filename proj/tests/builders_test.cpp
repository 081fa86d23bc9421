#include <random>
#include <set>
#include <unordered_set>

#include "doctest.h"
#include "nhl/builders.hpp"
#include "nhl/cost.hpp"
#include "support.hpp"

using namespace nhl;

namespace {

// Paper-style chain with three internal levels; the deepest internal node is
// the category's own group, its leaf carries the class index.
const char* kMarinePath =
    R"({"max_levels":4,"root":{"name":"root","children":[{"name":"marine animals","children":[
        {"name":"sharks","children":[{"name":"hammerhead shark","children":[
        {"name":"hammerhead shark","class_index":0}]}]}]}]}})";

long long tagged_params(const CostReport& r, const std::string& tag_prefix = "") {
  long long sum = 0;
  for (const CostRow& row : r.per_node) {
    if (!row.tag.empty() && (tag_prefix.empty() || row.tag.rfind(tag_prefix, 0) == 0)) sum += row.params;
  }
  return sum;
}

}  // namespace

TEST_CASE("baseline resnet50 parameter counts") {
  CHECK(count_params(infer_shapes(build_baseline_resnet50(1000))).total_params == 25'557'032);
  CHECK(count_params(infer_shapes(build_baseline_resnet50(20))).total_params == 23'549'012);
  CHECK(count_params(infer_shapes(build_baseline_resnet50(100))).total_params == 23'712'932);
  CHECK_THROWS_AS(build_baseline_resnet50(0), ValidationError);
}

TEST_CASE("trunk: terminal shape and parameter count") {
  const ComputeGraph trunk = build_trunk(Backbone::resnet50);
  const auto exits = trunk.terminals();
  REQUIRE(exits.size() == 1);

  const ComputeGraph at224 = infer_shapes(trunk);
  CHECK(*at224.node(exits[0]).out_shape == Shape3{1024, 14, 14});
  CHECK(count_params(at224).total_params == 8'543'296);

  const ComputeGraph at32 = infer_shapes(trunk, {3, 32, 32});
  CHECK(*at32.node(exits[0]).out_shape == Shape3{1024, 2, 2});
}

TEST_CASE("nhl: paper branch chain 128/64/32 with FC 32->1") {
  const Taxonomy tax = Taxonomy::parse(kMarinePath);
  const ComputeGraph g = infer_shapes(build_nhl(build_trunk(Backbone::resnet50), tax));

  CHECK(*g.node("branch.marine animals.u1.relu3").out_shape == Shape3{128, 7, 7});
  CHECK(*g.node("branch.marine animals/sharks.u1.relu3").out_shape == Shape3{64, 7, 7});
  const std::string deepest = "branch.marine animals/sharks/hammerhead shark";
  CHECK(*g.node(deepest + ".u1.relu3").out_shape == Shape3{32, 7, 7});
  const auto& fc = std::get<LinearAttrs>(g.node(deepest + ".head.fc").layer);
  CHECK(fc.in_features == 32);
  CHECK(fc.out_features == 1);
  REQUIRE(g.logit_layout.size() == 1);
  CHECK(g.logit_layout[0].node == deepest + ".head.fc");
}

TEST_CASE("nhl: level-1 branch block parameter count") {
  // 1024-ch split point, W=128, r=4, stride 2: convs 177,152 + affines 640.
  const Taxonomy tax = Taxonomy::parse(
      R"({"root":{"name":"root","children":[{"name":"g","children":[{"name":"x","class_index":0}]}]}})");
  const ComputeGraph g = infer_shapes(build_nhl(build_trunk(Backbone::resnet50), tax));
  const CostReport r = count_params(g);
  long long block = 0;
  for (const CostRow& row : r.per_node) {
    if (row.tag == "g" && row.node_id.find(".head.") == std::string::npos) block += row.params;
  }
  CHECK(block == 177'792);
}

TEST_CASE("nhl: flat taxonomy gives parallel branches with FC 128->1") {
  std::string doc = R"({"root":{"name":"root","children":[)";
  for (int i = 0; i < 10; ++i) {
    doc += (i ? "," : "");
    doc += R"({"name":"g)" + std::to_string(i) + R"(","children":[{"name":"leaf","class_index":)" +
           std::to_string(i) + "}]}";
  }
  doc += "]}}";
  const Taxonomy tax = Taxonomy::parse(doc);
  const ComputeGraph g = build_nhl(build_trunk(Backbone::resnet50), tax);

  std::set<std::string> tags;
  for (const GraphNode& n : g.nodes()) {
    if (!n.tag.empty()) tags.insert(n.tag);
  }
  CHECK(tags.size() == 10);
  CHECK(g.logit_layout.size() == 10);
  for (int i = 0; i < 10; ++i) {
    const auto& fc = std::get<LinearAttrs>(g.node("branch.g" + std::to_string(i) + ".head.fc").layer);
    CHECK(fc.in_features == 128);
    CHECK(fc.out_features == 1);
    // every level-1 branch nests directly on the split point
    CHECK(g.node("branch.g" + std::to_string(i) + ".u1.conv1").preds ==
          std::vector<std::string>{"conv4_6.relu3"});
  }
}

TEST_CASE("nhl: builder validation") {
  const ComputeGraph trunk = build_trunk(Backbone::resnet50);
  const Taxonomy deep = Taxonomy::parse(
      R"({"max_levels":5,"root":{"name":"r","children":[{"name":"a","children":[{"name":"b","children":[
          {"name":"c","children":[{"name":"d","children":[{"name":"x","class_index":0}]}]}]}]}]}})");
  try {
    build_nhl(trunk, deep);  // 4 internal levels vs default 3-entry schedule
    FAIL("expected ScheduleTooShort");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "ScheduleTooShort");
  }
  BranchConfig wide;
  wide.channel_schedule = {128, 64, 32, 16};
  CHECK_NOTHROW(build_nhl(trunk, deep, wide));

  const Taxonomy root_leaf =
      Taxonomy::parse(R"({"root":{"name":"r","children":[{"name":"x","class_index":0}]}})");
  try {
    build_nhl(trunk, root_leaf);
    FAIL("expected LeafUnderRoot");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "LeafUnderRoot");
  }

  ComputeGraph two_exits = trunk;
  GraphNode extra;
  extra.id = "side";
  extra.layer = ActivationAttrs{ActFn::relu};
  extra.preds = {"stem.relu"};
  two_exits.add_node(extra);
  try {
    build_nhl(two_exits, root_leaf);
    FAIL("expected TrunkNotTerminal");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "TrunkNotTerminal");
  }
}

TEST_CASE("nhl: structural invariants over random taxonomies") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    const Taxonomy tax = Taxonomy::parse(test::random_taxonomy_json(rng));
    BranchConfig cfg;
    cfg.channel_schedule = {16, 12, 8, 6};
    const ComputeGraph trunk = test::tiny_trunk(6, 10, 12);
    const ComputeGraph g = infer_shapes(build_nhl(trunk, tax, cfg));

    // tagged regions == internal taxonomy nodes
    std::set<std::string> tags;
    for (const GraphNode& n : g.nodes()) {
      if (!n.tag.empty()) tags.insert(n.tag);
    }
    CHECK(static_cast<int>(tags.size()) == static_cast<int>(tax.internal_nodes().size()));

    // heads at last-internal nodes; head widths sum to N
    long long width_sum = 0;
    int heads = 0, last_internal = 0;
    for (const GraphNode& n : g.nodes()) {
      if (kind_of(n.layer) == LayerKind::linear) {
        ++heads;
        width_sum += std::get<LinearAttrs>(n.layer).out_features;
      }
    }
    for (int ti : tax.internal_nodes()) {
      for (int ci : tax.node(ti).children) {
        if (tax.node(ci).is_leaf()) {
          ++last_internal;
          break;
        }
      }
    }
    CHECK(heads == last_internal);
    CHECK(width_sum == tax.num_categories());

    // layout covers each category exactly once, in ascending order
    REQUIRE(static_cast<int>(g.logit_layout.size()) == tax.num_categories());
    for (int c = 0; c < tax.num_categories(); ++c) {
      CHECK(g.logit_layout[static_cast<size_t>(c)].category == c);
    }

    // branch output channels follow the schedule at every level
    for (int ti : tax.internal_nodes()) {
      const TaxNode& t = tax.node(ti);
      const Shape3 out = *g.node("branch." + t.id + ".u1.relu3").out_shape;
      CHECK(out.c == cfg.channel_schedule[static_cast<size_t>(t.level - 1)]);
      if (t.level > 1) {
        // deeper levels preserve the parent's spatial size
        const Shape3 parent = *g.node("branch." + tax.node(t.parent).id + ".u1.relu3").out_shape;
        CHECK(out.h == parent.h);
        CHECK(out.w == parent.w);
      }
    }

    // trunk ids are a prefix shared with the source trunk (expert module
    // relies on this)
    for (const GraphNode& n : trunk.nodes()) {
      CHECK(g.has(n.id));
      CHECK(g.node(n.id).tag.empty());
    }
  }
}

TEST_CASE("nhl: level-1 branches are (128,7,7) at 224 input with stride 2") {
  const Taxonomy tax = Taxonomy::load(NHL_DATA_DIR "/taxonomy_cifar10.json");
  const ComputeGraph g = infer_shapes(build_nhl(build_trunk(Backbone::resnet50), tax));
  CHECK(*g.node("branch.vehicles.u1.relu3").out_shape == Shape3{128, 7, 7});
  CHECK(*g.node("branch.animals.u1.relu3").out_shape == Shape3{128, 7, 7});
}

TEST_CASE("nhl: blocks_per_node stacks units inside one branch region") {
  const Taxonomy tax = Taxonomy::parse(
      R"({"root":{"name":"root","children":[{"name":"g","children":[{"name":"x","class_index":0}]}]}})");
  BranchConfig cfg;
  cfg.blocks_per_node = 2;
  const ComputeGraph g = infer_shapes(build_nhl(build_trunk(Backbone::resnet50), tax, cfg));
  CHECK(g.has("branch.g.u1.conv1"));
  CHECK(g.has("branch.g.u2.conv1"));
  // second unit keeps width and spatial size, identity shortcut
  CHECK(*g.node("branch.g.u2.relu3").out_shape == Shape3{128, 7, 7});
  CHECK_FALSE(g.has("branch.g.u2.down.conv"));
}
