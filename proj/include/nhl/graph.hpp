#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "nhl/errors.hpp"
#include "nhl/taxonomy.hpp"

namespace nhl {

struct Shape3 {
  int c = 0;
  int h = 0;
  int w = 0;
  bool operator==(const Shape3&) const = default;
  long long numel() const { return 1LL * c * h * w; }
};

enum class LayerKind {
  input,
  conv2d,
  batchnorm2d,
  layernorm_channels,
  activation,
  maxpool2d,
  global_avg_pool,
  linear,
  add,
};

enum class ActFn { relu, gelu };

struct InputAttrs {
  bool operator==(const InputAttrs&) const = default;
};
struct Conv2dAttrs {
  int in_ch = 0;
  int out_ch = 0;
  int kh = 1;
  int kw = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  bool has_bias = false;
  bool operator==(const Conv2dAttrs&) const = default;
};
struct BatchNorm2dAttrs {
  int num_features = 0;
  bool operator==(const BatchNorm2dAttrs&) const = default;
};
struct LayerNormChannelsAttrs {
  int num_features = 0;
  bool operator==(const LayerNormChannelsAttrs&) const = default;
};
struct ActivationAttrs {
  ActFn fn = ActFn::relu;
  bool operator==(const ActivationAttrs&) const = default;
};
struct MaxPool2dAttrs {
  int kh = 1;
  int kw = 1;
  int stride = 1;
  int padding = 0;
  bool operator==(const MaxPool2dAttrs&) const = default;
};
struct GlobalAvgPoolAttrs {
  bool operator==(const GlobalAvgPoolAttrs&) const = default;
};
struct LinearAttrs {
  int in_features = 0;
  int out_features = 0;
  bool has_bias = true;
  // Nonempty on expert-sliced heads: out_features rows gathered from the
  // original weight/bias tensors, so one checkpoint serves every expert.
  std::vector<int> row_select;
  bool operator==(const LinearAttrs&) const = default;
};
struct AddAttrs {
  bool operator==(const AddAttrs&) const = default;
};

using LayerDescriptor =
    std::variant<InputAttrs, Conv2dAttrs, BatchNorm2dAttrs, LayerNormChannelsAttrs, ActivationAttrs,
                 MaxPool2dAttrs, GlobalAvgPoolAttrs, LinearAttrs, AddAttrs>;

LayerKind kind_of(const LayerDescriptor& d);
const char* kind_name(LayerKind k);

struct GraphNode {
  std::string id;
  LayerDescriptor layer;
  std::vector<std::string> preds;
  std::string tag;  // taxonomy node id for branch-region nodes, else empty
  std::optional<Shape3> out_shape;
};

// Category -> producing node and offset within that node's output vector.
// Position in the layout list is the category's slot in the logit tensor.
struct LogitSlot {
  CategoryId category = 0;
  std::string node;
  int offset = 0;
  bool operator==(const LogitSlot&) const = default;
};

// DAG of layer descriptors. Nodes are stored in insertion (document) order.
// Immutable once built and shape-inferred; builders are pure functions.
class ComputeGraph {
 public:
  Shape3 input_shape;
  std::vector<LogitSlot> logit_layout;

  void add_node(GraphNode node);

  bool has(std::string_view id) const { return index_.count(std::string(id)) > 0; }
  const GraphNode& node(std::string_view id) const;
  GraphNode& node_mut(std::string_view id);
  int index_of(std::string_view id) const;
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  std::vector<GraphNode>& nodes_mut() { return nodes_; }

  // Node ids with no successors.
  std::vector<std::string> terminals() const;
  bool shapes_inferred() const;

  // Structural equality: everything serialized (out_shape excluded).
  bool operator==(const ComputeGraph& other) const;

  // Canonical JSON. `indent < 0` emits the compact canonical form whose bytes
  // feed the graph hash; `from_json(to_json(g)) == g` and canonical bytes
  // round-trip byte-identically.
  std::string to_json(int indent = -1) const;
  static ComputeGraph from_json(const std::string& text);
  static ComputeGraph load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path, int indent = 1) const;

  std::array<std::uint8_t, 32> hash() const;

 private:
  std::vector<GraphNode> nodes_;
  std::unordered_map<std::string, int> index_;
};

std::string hex(const std::array<std::uint8_t, 32>& digest);
std::array<std::uint8_t, 32> sha256(std::string_view bytes);

// Deterministic topological order: Kahn's algorithm, ready set ordered by id,
// input node first. Throws CycleDetected.
std::vector<std::string> topo_order(const ComputeGraph& g);

// Returns a copy with every node's out_shape annotated via standard
// conv/pool arithmetic (floor division). Throws ShapeMismatch,
// NonPositiveSpatial, GroupMismatch.
ComputeGraph infer_shapes(const ComputeGraph& g);
ComputeGraph infer_shapes(const ComputeGraph& g, Shape3 input_shape);

}  // namespace nhl
