// Python bindings for the core operations: taxonomy parsing, graph
// construction, expert extraction, cost analysis and the dense runtime.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nhl/builders.hpp"
#include "nhl/checkpoint.hpp"
#include "nhl/cost.hpp"
#include "nhl/executor.hpp"
#include "nhl/expert.hpp"
#include "nhl/verify.hpp"

namespace py = pybind11;
using namespace nhl;

namespace {

Tensor<float> tensor_from_numpy(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() != 4) {
    throw ValidationError("ShapeMismatch", "expected an (N,C,H,W) float32 array");
  }
  Tensor<float> t({arr.shape(0), arr.shape(1), arr.shape(2), arr.shape(3)});
  std::copy(arr.data(), arr.data() + arr.size(), t.data.begin());
  return t;
}

py::array_t<float> numpy_from_logits(const Tensor<float>& t) {
  py::array_t<float> out({t.dim(0), t.dim(1)});
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

py::dict cost_to_dict(const CostReport& r) {
  py::dict d;
  d["total_params"] = r.total_params;
  d["total_macs"] = r.total_macs;
  d["params_m"] = format_params_m(r.total_params);
  d["gmacs"] = format_gmacs(r.total_macs);
  d["include_elementwise"] = r.convention.include_elementwise;
  return d;
}

}  // namespace

PYBIND11_MODULE(_nhl, m) {
  m.doc() = "Taxonomy-branched classification networks with extractable experts";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  py::class_<Taxonomy>(m, "Taxonomy")
      .def_static("parse", &Taxonomy::parse, py::arg("document_text"))
      .def_static("load", [](const std::string& p) { return Taxonomy::load(p); }, py::arg("path"))
      .def_property_readonly("num_categories", &Taxonomy::num_categories)
      .def_property_readonly("max_levels", &Taxonomy::max_levels)
      .def_property_readonly("max_leaf_level", &Taxonomy::max_leaf_level)
      .def("ancestor_path", &Taxonomy::ancestor_path, py::arg("category"))
      .def("cover_set",
           [](const Taxonomy& t, const std::vector<int>& subset) {
             const auto cover = t.cover_set(subset);
             return std::vector<std::string>(cover.begin(), cover.end());
           },
           py::arg("subset"))
      .def("leaves_under", [](const Taxonomy& t, const std::string& id) { return t.leaves_under(id); },
           py::arg("node_id"));

  py::class_<BranchConfig>(m, "BranchConfig")
      .def(py::init<>())
      .def_readwrite("channel_schedule", &BranchConfig::channel_schedule)
      .def_readwrite("blocks_per_node", &BranchConfig::blocks_per_node)
      .def_readwrite("level1_stride", &BranchConfig::level1_stride)
      .def_readwrite("bottleneck_reduction", &BranchConfig::bottleneck_reduction);

  py::class_<ComputeGraph>(m, "ComputeGraph")
      .def_property_readonly("num_nodes", [](const ComputeGraph& g) { return g.nodes().size(); })
      .def_property_readonly("input_shape",
                             [](const ComputeGraph& g) {
                               return py::make_tuple(g.input_shape.c, g.input_shape.h, g.input_shape.w);
                             })
      .def_property_readonly("num_logits", [](const ComputeGraph& g) { return g.logit_layout.size(); })
      .def("to_json", &ComputeGraph::to_json, py::arg("indent") = -1)
      .def_static("from_json", &ComputeGraph::from_json, py::arg("text"))
      .def("hash_hex", [](const ComputeGraph& g) { return hex(g.hash()); })
      .def("save", [](const ComputeGraph& g, const std::string& p) { g.save(p); }, py::arg("path"))
      .def_static("load", [](const std::string& p) { return ComputeGraph::load(p); }, py::arg("path"));

  m.def("build_baseline_resnet50",
        [](int num_classes, bool small_image) {
          return build_baseline_resnet50(num_classes, TrunkOptions{small_image});
        },
        py::arg("num_classes"), py::arg("small_image") = false);
  m.def("build_trunk",
        [](bool small_image) { return build_trunk(Backbone::resnet50, TrunkOptions{small_image}); },
        py::arg("small_image") = false);
  m.def("build_nhl", &build_nhl, py::arg("trunk"), py::arg("taxonomy"),
        py::arg("config") = BranchConfig{});
  m.def("infer_shapes", py::overload_cast<const ComputeGraph&>(&infer_shapes), py::arg("graph"));
  m.def("topo_order", &topo_order, py::arg("graph"));

  m.def("extract_expert",
        [](const ComputeGraph& full, const Taxonomy& tax, const std::vector<int>& categories,
           bool keep_whole_heads) {
          return extract_expert(full, tax, ExpertSpec{categories}, keep_whole_heads);
        },
        py::arg("full"), py::arg("taxonomy"), py::arg("categories"), py::arg("keep_whole_heads") = false);
  m.def("expert_count", &expert_count, py::arg("n"), "Exact 2^n - 1 as a decimal string");

  m.def("count_params",
        [](const ComputeGraph& g) { return cost_to_dict(count_params(infer_shapes(g))); },
        py::arg("graph"));
  m.def("count_macs",
        [](const ComputeGraph& g, std::tuple<int, int, int> input, bool include_elementwise) {
          const auto [c, h, w] = input;
          return cost_to_dict(count_macs(g, Shape3{c, h, w}, Convention{include_elementwise}));
        },
        py::arg("graph"), py::arg("input_shape"), py::arg("include_elementwise") = false);
  m.def("oracle_mac_count",
        [](const ComputeGraph& g, std::tuple<int, int, int> input) {
          const auto [c, h, w] = input;
          return oracle_mac_count(g, Shape3{c, h, w});
        },
        py::arg("graph"), py::arg("input_shape"));
  m.def("export_report",
        [](const ComputeGraph& g, std::tuple<int, int, int> input, bool include_elementwise,
           const std::string& format) {
          const auto [c, h, w] = input;
          const CostReport r = analyze_cost(g, Shape3{c, h, w}, Convention{include_elementwise});
          return export_report(r, format == "csv" ? ReportFormat::csv : ReportFormat::json);
        },
        py::arg("graph"), py::arg("input_shape"), py::arg("include_elementwise") = false,
        py::arg("format") = "json");

  py::class_<ParameterStore<float>>(m, "ParameterStore")
      .def_property_readonly("names", [](const ParameterStore<float>& s) {
        std::vector<std::string> names;
        for (const auto& [k, v] : s.tensors) names.push_back(k);
        return names;
      });
  m.def("init_parameters",
        [](const ComputeGraph& g, std::uint64_t seed) { return init_parameters<float>(g, seed); },
        py::arg("graph"), py::arg("seed") = 0);

  m.def("forward",
        [](const ComputeGraph& g, ParameterStore<float>& params, py::array_t<float> x, bool train) {
          const ComputeGraph graph = g.shapes_inferred() ? g : infer_shapes(g);
          Tensor<float> input = tensor_from_numpy(x);
          return numpy_from_logits(
              forward(graph, params, input, train ? ExecMode::train : ExecMode::eval));
        },
        py::arg("graph"), py::arg("params"), py::arg("x"), py::arg("train") = false);

  py::class_<EquivalenceReport>(m, "EquivalenceReport")
      .def_readonly("samples", &EquivalenceReport::samples)
      .def_readonly("max_abs_diff", &EquivalenceReport::max_abs_diff)
      .def_readonly("argmax_agreement", &EquivalenceReport::argmax_agreement)
      .def("passed", &EquivalenceReport::passed, py::arg("tol") = 1e-6);
  m.def("verify_logit_equivalence",
        [](const ComputeGraph& full, const ComputeGraph& expert, ParameterStore<float>& params,
           py::array_t<float> inputs, double tol) {
          Tensor<float> batch = tensor_from_numpy(inputs);
          std::vector<Tensor<float>> xs;
          xs.push_back(std::move(batch));
          return verify_logit_equivalence(infer_shapes(full), infer_shapes(expert), params, xs, tol);
        },
        py::arg("full"), py::arg("expert"), py::arg("params"), py::arg("inputs"), py::arg("tol") = 1e-6);

  m.def("load_checkpoint_into",
        [](const std::string& path, const ComputeGraph& g, bool force) {
          Checkpoint ck = load_checkpoint(path);
          require_graph_match(ck, g, force);
          return std::move(ck.store);
        },
        py::arg("path"), py::arg("graph"), py::arg("force") = false);
}
