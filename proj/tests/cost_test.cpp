#include <random>

#include "doctest.h"
#include "nhl/builders.hpp"
#include "nhl/cost.hpp"
#include "support.hpp"

using namespace nhl;

namespace {

ComputeGraph single_node_graph(Shape3 input, LayerDescriptor layer) {
  ComputeGraph g;
  g.input_shape = input;
  GraphNode in;
  in.id = "input";
  in.layer = InputAttrs{};
  g.add_node(in);
  GraphNode n;
  n.id = "op";
  n.layer = std::move(layer);
  n.preds = {"input"};
  g.add_node(n);
  return g;
}

long long op_macs(Shape3 input, LayerDescriptor layer) {
  return count_macs(single_node_graph(input, std::move(layer)), input).total_macs;
}

}  // namespace

TEST_CASE("count_params: examples") {
  // linear 2048 -> 1000 with bias
  ComputeGraph g;
  g.input_shape = {2048, 1, 1};
  GraphNode in;
  in.id = "input";
  in.layer = InputAttrs{};
  g.add_node(in);
  GraphNode gap;
  gap.id = "gap";
  gap.layer = GlobalAvgPoolAttrs{};
  gap.preds = {"input"};
  g.add_node(gap);
  GraphNode fc;
  fc.id = "fc";
  fc.layer = LinearAttrs{2048, 1000, true, {}};
  fc.preds = {"gap"};
  g.add_node(fc);
  CHECK(count_params(infer_shapes(g)).total_params == 2'049'000);

  CHECK(count_params(infer_shapes(build_baseline_resnet50(1000))).total_params == 25'557'032);

  CHECK_THROWS_AS(count_params(build_baseline_resnet50(10)), ValidationError);  // shapes missing
}

TEST_CASE("count_params: level-2 branch block is 13,888") {
  // in 128, W=64, r=4: 128*16 + 16*16*9 + 16*64 + 128*64 weights + 320 affines
  const Taxonomy tax = Taxonomy::parse(
      R"({"root":{"name":"root","children":[{"name":"g","children":[{"name":"s","children":[
          {"name":"x","class_index":0}]}]}]}})");
  const ComputeGraph g = infer_shapes(build_nhl(build_trunk(Backbone::resnet50), tax));
  long long block = 0;
  for (const CostRow& row : count_params(g).per_node) {
    if (row.tag == "g/s" && row.node_id.find(".head.") == std::string::npos) block += row.params;
  }
  CHECK(block == 13'888);
}

TEST_CASE("count_macs: conv examples") {
  // 64->64 3x3 stride 1 same-pad producing 56x56
  CHECK(op_macs({64, 56, 56}, Conv2dAttrs{64, 64, 3, 3, 1, 1, 1, false}) == 115'605'504);
  // depthwise 96, 7x7 same-pad, 56x56 output
  CHECK(op_macs({96, 56, 56}, Conv2dAttrs{96, 96, 7, 7, 1, 3, 96, false}) == 14'751'744);
}

TEST_CASE("count_macs: resnet50 at 224 under both conventions") {
  const ComputeGraph g = build_baseline_resnet50(1000);
  const long long base = count_macs(g, {3, 224, 224}).total_macs;
  CHECK(base == 4'089'184'256LL);
  const long long with_elem = count_macs(g, {3, 224, 224}, Convention{true}).total_macs;
  CHECK(with_elem > base);
  CHECK(with_elem >= 4'050'000'000LL);
  CHECK(with_elem <= 4'170'000'000LL);
}

TEST_CASE("count_params is input-shape independent; count_macs scales with output size") {
  std::mt19937_64 rng(31);
  const ComputeGraph g = test::random_small_graph(rng);
  const ComputeGraph big = infer_shapes(g, {g.input_shape.c, g.input_shape.h + 6, g.input_shape.w + 6});
  CHECK(count_params(infer_shapes(g)).total_params == count_params(big).total_params);
}

TEST_CASE("reduction: table rows") {
  CostReport base, variant;
  base.total_params = 25'000'000;
  base.total_macs = 14'550'000'000LL;
  variant.total_params = 13'800'000;
  variant.total_macs = 3'870'000'000LL;
  const ReductionReport r = reduction(base, variant);
  CHECK(format_reduction(r.mac_reduction) == "-73.4%");
  CHECK(std::abs(r.param_reduction * 100.0 - 44.5) < 0.5);  // -44.5% within rounding
  CHECK(format_reduction(reduction(base, base).param_reduction) == "0.0%");

  CostReport elem = base;
  elem.convention.include_elementwise = true;
  CHECK_THROWS_AS(reduction(base, elem), ValidationError);  // ConventionMismatch
  CostReport zero;
  CHECK_THROWS_AS(reduction(zero, base), ValidationError);  // ZeroBase
}

TEST_CASE("reduction: antitone in variant totals and zero at identity") {
  const ComputeGraph g = infer_shapes(build_baseline_resnet50(10, TrunkOptions{true}), {3, 32, 32});
  const CostReport a = analyze_cost(g, {3, 32, 32});
  CostReport smaller = a;
  smaller.total_params /= 2;
  smaller.total_macs /= 2;
  CHECK(reduction(a, a).param_reduction == 0.0);
  CHECK(reduction(a, smaller).param_reduction > reduction(a, a).param_reduction);
}

TEST_CASE("oracle_mac_count: literal tallies") {
  CHECK(oracle_mac_count(single_node_graph({4, 5, 5}, Conv2dAttrs{4, 8, 1, 1, 1, 0, 1, false}),
                         {4, 5, 5}) == 800);
  CHECK(oracle_mac_count(single_node_graph({8, 9, 9}, Conv2dAttrs{8, 8, 3, 3, 2, 0, 2, false}),
                         {8, 9, 9}) == 4608);  // (8/2)*8*9*16
  CHECK_THROWS_AS(oracle_mac_count(single_node_graph({3, 70, 70}, Conv2dAttrs{3, 4, 1, 1, 1, 0, 1, false}),
                                   {3, 70, 70}),
                  ValidationError);  // InputTooLarge
}

TEST_CASE("oracle_mac_count equals count_macs on random small graphs") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    const ComputeGraph g = test::random_small_graph(rng);
    CHECK(oracle_mac_count(g, g.input_shape) == count_macs(g, g.input_shape).total_macs);
  }
}

TEST_CASE("export_report: CSV shape and JSON round trip") {
  CostReport empty;
  empty.input_shape = {1, 1, 1};
  const std::string csv = export_report(empty, ReportFormat::csv);
  CHECK(csv == "node_id,kind,tag,params,macs\nTOTAL,,,0,0\n");

  CostReport two;
  two.input_shape = {3, 8, 8};
  two.per_node.push_back({"a", "conv2d", "", 10, 20});
  two.per_node.push_back({"b, with comma", "linear", "t/ag", 30, 40});
  two.total_params = 40;
  two.total_macs = 60;
  const std::string csv2 = export_report(two, ReportFormat::csv);
  CHECK(std::count(csv2.begin(), csv2.end(), '\n') == 4);  // header + 2 rows + totals
  CHECK(csv2.find("\"b, with comma\"") != std::string::npos);

  const CostReport back = parse_cost_report(export_report(two, ReportFormat::json));
  CHECK(back.total_params == two.total_params);
  CHECK(back.total_macs == two.total_macs);
  CHECK(back.per_node.size() == two.per_node.size());
  CHECK(back.input_shape == two.input_shape);
}

TEST_CASE("formatting follows the table conventions") {
  CHECK(format_params_m(23'549'012) == "23.5M");
  CHECK(format_params_m(23'712'932) == "23.7M");
  CHECK(format_gmacs(4'089'184'256LL) == "4.09");
  CHECK(format_reduction(0.887) == "-88.7%");
  CHECK(format_reduction(-0.28) == "+28.0%");
}
