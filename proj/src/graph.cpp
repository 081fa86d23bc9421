#include "nhl/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace nhl {

using ordered_json = nlohmann::ordered_json;

LayerKind kind_of(const LayerDescriptor& d) {
  return static_cast<LayerKind>(d.index());
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::input: return "input";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm2d: return "batchnorm2d";
    case LayerKind::layernorm_channels: return "layernorm_channels";
    case LayerKind::activation: return "activation";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::linear: return "linear";
    case LayerKind::add: return "add";
  }
  return "?";
}

void ComputeGraph::add_node(GraphNode node) {
  if (node.id.empty()) {
    throw ValidationError("MalformedDocument", "node id must be nonempty");
  }
  if (has(node.id)) {
    throw ValidationError("DuplicateNodeId", "node id \"" + node.id + "\" already present");
  }
  const bool is_input = kind_of(node.layer) == LayerKind::input;
  if (node.preds.empty() && !is_input) {
    throw ValidationError("MalformedDocument", "non-input node \"" + node.id + "\" has no predecessors");
  }
  if (is_input && !node.preds.empty()) {
    throw ValidationError("MalformedDocument", "input node cannot have predecessors");
  }
  for (const std::string& p : node.preds) {
    if (!has(p)) {
      throw ValidationError("UnknownPredecessor", "node \"" + node.id + "\" references unknown node \"" + p + "\"");
    }
  }
  index_.emplace(node.id, static_cast<int>(nodes_.size()));
  nodes_.push_back(std::move(node));
}

const GraphNode& ComputeGraph::node(std::string_view id) const {
  return nodes_[index_of(id)];
}

GraphNode& ComputeGraph::node_mut(std::string_view id) {
  return nodes_[index_of(id)];
}

int ComputeGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw ValidationError("UnknownNode", "no graph node with id \"" + std::string(id) + "\"");
  }
  return it->second;
}

std::vector<std::string> ComputeGraph::terminals() const {
  std::unordered_map<std::string, int> succ;
  for (const GraphNode& n : nodes_) {
    for (const std::string& p : n.preds) succ[p]++;
  }
  std::vector<std::string> out;
  for (const GraphNode& n : nodes_) {
    if (succ[n.id] == 0) out.push_back(n.id);
  }
  return out;
}

bool ComputeGraph::shapes_inferred() const {
  return !nodes_.empty() &&
         std::all_of(nodes_.begin(), nodes_.end(), [](const GraphNode& n) { return n.out_shape.has_value(); });
}

bool ComputeGraph::operator==(const ComputeGraph& other) const {
  if (input_shape != other.input_shape || logit_layout != other.logit_layout ||
      nodes_.size() != other.nodes_.size()) {
    return false;
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const GraphNode& a = nodes_[i];
    const GraphNode& b = other.nodes_[i];
    if (a.id != b.id || a.layer != b.layer || a.preds != b.preds || a.tag != b.tag) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json attrs_to_json(const LayerDescriptor& d) {
  ordered_json a = ordered_json::object();
  switch (kind_of(d)) {
    case LayerKind::conv2d: {
      const auto& c = std::get<Conv2dAttrs>(d);
      a["in_ch"] = c.in_ch;
      a["out_ch"] = c.out_ch;
      a["kernel"] = {c.kh, c.kw};
      a["stride"] = c.stride;
      a["padding"] = c.padding;
      a["groups"] = c.groups;
      a["has_bias"] = c.has_bias;
      break;
    }
    case LayerKind::batchnorm2d:
      a["num_features"] = std::get<BatchNorm2dAttrs>(d).num_features;
      break;
    case LayerKind::layernorm_channels:
      a["num_features"] = std::get<LayerNormChannelsAttrs>(d).num_features;
      break;
    case LayerKind::activation:
      a["fn"] = std::get<ActivationAttrs>(d).fn == ActFn::relu ? "relu" : "gelu";
      break;
    case LayerKind::maxpool2d: {
      const auto& m = std::get<MaxPool2dAttrs>(d);
      a["kernel"] = {m.kh, m.kw};
      a["stride"] = m.stride;
      a["padding"] = m.padding;
      break;
    }
    case LayerKind::linear: {
      const auto& l = std::get<LinearAttrs>(d);
      a["in_features"] = l.in_features;
      a["out_features"] = l.out_features;
      a["has_bias"] = l.has_bias;
      if (!l.row_select.empty()) a["row_select"] = l.row_select;
      break;
    }
    default:
      break;
  }
  return a;
}

int attr_int(const ordered_json& a, const char* key, const std::string& node_id) {
  if (!a.contains(key) || !a.at(key).is_number_integer()) {
    throw ValidationError("MalformedDocument", "node \"" + node_id + "\": missing integer attr \"" + key + "\"");
  }
  return a.at(key).get<int>();
}

std::pair<int, int> attr_kernel(const ordered_json& a, const std::string& node_id) {
  if (!a.contains("kernel") || !a.at("kernel").is_array() || a.at("kernel").size() != 2) {
    throw ValidationError("MalformedDocument", "node \"" + node_id + "\": kernel must be [kh,kw]");
  }
  return {a.at("kernel")[0].get<int>(), a.at("kernel")[1].get<int>()};
}

LayerDescriptor attrs_from_json(const std::string& kind, const ordered_json& a, const std::string& node_id) {
  if (kind == "input") return InputAttrs{};
  if (kind == "conv2d") {
    Conv2dAttrs c;
    c.in_ch = attr_int(a, "in_ch", node_id);
    c.out_ch = attr_int(a, "out_ch", node_id);
    std::tie(c.kh, c.kw) = attr_kernel(a, node_id);
    c.stride = attr_int(a, "stride", node_id);
    c.padding = attr_int(a, "padding", node_id);
    c.groups = a.contains("groups") ? a.at("groups").get<int>() : 1;
    c.has_bias = a.contains("has_bias") && a.at("has_bias").get<bool>();
    return c;
  }
  if (kind == "batchnorm2d") return BatchNorm2dAttrs{attr_int(a, "num_features", node_id)};
  if (kind == "layernorm_channels") return LayerNormChannelsAttrs{attr_int(a, "num_features", node_id)};
  if (kind == "activation") {
    const std::string fn = a.contains("fn") ? a.at("fn").get<std::string>() : "";
    if (fn == "relu") return ActivationAttrs{ActFn::relu};
    if (fn == "gelu") return ActivationAttrs{ActFn::gelu};
    throw ValidationError("MalformedDocument", "node \"" + node_id + "\": activation fn must be relu|gelu");
  }
  if (kind == "maxpool2d") {
    MaxPool2dAttrs m;
    std::tie(m.kh, m.kw) = attr_kernel(a, node_id);
    m.stride = attr_int(a, "stride", node_id);
    m.padding = attr_int(a, "padding", node_id);
    return m;
  }
  if (kind == "global_avg_pool") return GlobalAvgPoolAttrs{};
  if (kind == "linear") {
    LinearAttrs l;
    l.in_features = attr_int(a, "in_features", node_id);
    l.out_features = attr_int(a, "out_features", node_id);
    l.has_bias = !a.contains("has_bias") || a.at("has_bias").get<bool>();
    if (a.contains("row_select")) l.row_select = a.at("row_select").get<std::vector<int>>();
    return l;
  }
  if (kind == "add") return AddAttrs{};
  throw ValidationError("MalformedDocument", "node \"" + node_id + "\": unknown kind \"" + kind + "\"");
}

}  // namespace

std::string ComputeGraph::to_json(int indent) const {
  ordered_json doc;
  doc["input_shape"] = {input_shape.c, input_shape.h, input_shape.w};
  ordered_json nodes = ordered_json::array();
  for (const GraphNode& n : nodes_) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = kind_name(kind_of(n.layer));
    jn["attrs"] = attrs_to_json(n.layer);
    jn["preds"] = n.preds;
    if (!n.tag.empty()) jn["tag"] = n.tag;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  ordered_json layout = ordered_json::array();
  for (const LogitSlot& s : logit_layout) {
    layout.push_back({{"category", s.category}, {"node", s.node}, {"offset", s.offset}});
  }
  doc["logit_layout"] = std::move(layout);
  return indent < 0 ? doc.dump() : doc.dump(indent);
}

ComputeGraph ComputeGraph::from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("MalformedDocument", e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("input_shape")) {
    throw ValidationError("MalformedDocument", "graph document needs \"input_shape\" and \"nodes\"");
  }
  ComputeGraph g;
  const auto& shp = doc.at("input_shape");
  if (!shp.is_array() || shp.size() != 3) {
    throw ValidationError("MalformedDocument", "input_shape must be [C,H,W]");
  }
  g.input_shape = {shp[0].get<int>(), shp[1].get<int>(), shp[2].get<int>()};
  for (const auto& jn : doc.at("nodes")) {
    GraphNode n;
    if (!jn.contains("id") || !jn.contains("kind")) {
      throw ValidationError("MalformedDocument", "every node needs \"id\" and \"kind\"");
    }
    n.id = jn.at("id").get<std::string>();
    const ordered_json attrs = jn.contains("attrs") ? jn.at("attrs") : ordered_json::object();
    n.layer = attrs_from_json(jn.at("kind").get<std::string>(), attrs, n.id);
    if (jn.contains("preds")) n.preds = jn.at("preds").get<std::vector<std::string>>();
    if (jn.contains("tag")) n.tag = jn.at("tag").get<std::string>();
    g.add_node(std::move(n));
  }
  if (doc.contains("logit_layout")) {
    for (const auto& js : doc.at("logit_layout")) {
      LogitSlot s;
      s.category = js.at("category").get<int>();
      s.node = js.at("node").get<std::string>();
      s.offset = js.at("offset").get<int>();
      if (!g.has(s.node)) {
        throw ValidationError("UnknownNode", "logit_layout references unknown node \"" + s.node + "\"");
      }
      g.logit_layout.push_back(std::move(s));
    }
  }
  return g;
}

ComputeGraph ComputeGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("FileOpenFailed", "cannot open graph file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void ComputeGraph::save(const std::filesystem::path& path, int indent) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("FileOpenFailed", "cannot write graph file " + path.string());
  }
  out << to_json(indent);
  if (!out) {
    throw IoError("WriteFailed", "short write to " + path.string());
  }
}

std::array<std::uint8_t, 32> sha256(std::string_view bytes) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw IoError("HashFailed", "SHA-256 computation failed");
  }
  return digest;
}

std::array<std::uint8_t, 32> ComputeGraph::hash() const {
  return sha256(to_json(-1));
}

std::string hex(const std::array<std::uint8_t, 32>& digest) {
  static const char* k = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : digest) {
    s.push_back(k[b >> 4]);
    s.push_back(k[b & 0xf]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Topological order and shape inference

std::vector<std::string> topo_order(const ComputeGraph& g) {
  std::unordered_map<std::string, int> indegree;
  std::unordered_map<std::string, std::vector<std::string>> succs;
  for (const GraphNode& n : g.nodes()) {
    indegree[n.id] = static_cast<int>(n.preds.size());
    for (const std::string& p : n.preds) succs[p].push_back(n.id);
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const GraphNode& n : g.nodes()) {
    if (indegree[n.id] == 0) ready.push(n.id);
  }
  std::vector<std::string> order;
  order.reserve(g.nodes().size());
  while (!ready.empty()) {
    std::string id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const std::string& s : succs[id]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (order.size() != g.nodes().size()) {
    throw ValidationError("CycleDetected", "graph contains a cycle");
  }
  return order;
}

namespace {

int conv_out_extent(int in, int pad, int k, int stride, const std::string& node_id) {
  const int padded = in + 2 * pad;
  if (padded < k) {
    throw ValidationError("NonPositiveSpatial",
                          "node \"" + node_id + "\": kernel " + std::to_string(k) + " larger than padded input " +
                              std::to_string(padded));
  }
  return (padded - k) / stride + 1;
}

Shape3 infer_node_shape(const GraphNode& n, const std::vector<Shape3>& pred_shapes, Shape3 input_shape) {
  switch (kind_of(n.layer)) {
    case LayerKind::input:
      return input_shape;
    case LayerKind::conv2d: {
      const auto& c = std::get<Conv2dAttrs>(n.layer);
      const Shape3& in = pred_shapes[0];
      if (c.groups < 1 || c.in_ch % c.groups != 0 || c.out_ch % c.groups != 0) {
        throw ValidationError("GroupMismatch", "node \"" + n.id + "\": channels not divisible by groups");
      }
      if (in.c != c.in_ch) {
        throw ValidationError("ShapeMismatch", "node \"" + n.id + "\": in_ch " + std::to_string(c.in_ch) +
                                                   " != predecessor channels " + std::to_string(in.c));
      }
      return {c.out_ch, conv_out_extent(in.h, c.padding, c.kh, c.stride, n.id),
              conv_out_extent(in.w, c.padding, c.kw, c.stride, n.id)};
    }
    case LayerKind::batchnorm2d: {
      const auto& b = std::get<BatchNorm2dAttrs>(n.layer);
      if (pred_shapes[0].c != b.num_features) {
        throw ValidationError("ShapeMismatch", "node \"" + n.id + "\": num_features != input channels");
      }
      return pred_shapes[0];
    }
    case LayerKind::layernorm_channels: {
      const auto& b = std::get<LayerNormChannelsAttrs>(n.layer);
      if (pred_shapes[0].c != b.num_features) {
        throw ValidationError("ShapeMismatch", "node \"" + n.id + "\": num_features != input channels");
      }
      return pred_shapes[0];
    }
    case LayerKind::activation:
      return pred_shapes[0];
    case LayerKind::maxpool2d: {
      const auto& m = std::get<MaxPool2dAttrs>(n.layer);
      const Shape3& in = pred_shapes[0];
      return {in.c, conv_out_extent(in.h, m.padding, m.kh, m.stride, n.id),
              conv_out_extent(in.w, m.padding, m.kw, m.stride, n.id)};
    }
    case LayerKind::global_avg_pool:
      return {pred_shapes[0].c, 1, 1};
    case LayerKind::linear: {
      const auto& l = std::get<LinearAttrs>(n.layer);
      const Shape3& in = pred_shapes[0];
      if (in.numel() != l.in_features) {
        throw ValidationError("ShapeMismatch", "node \"" + n.id + "\": in_features " +
                                                   std::to_string(l.in_features) + " != input size " +
                                                   std::to_string(in.numel()));
      }
      return {l.out_features, 1, 1};
    }
    case LayerKind::add: {
      if (pred_shapes.size() != 2) {
        throw ValidationError("ShapeMismatch", "node \"" + n.id + "\": add needs exactly two predecessors");
      }
      if (!(pred_shapes[0] == pred_shapes[1])) {
        throw ValidationError("ShapeMismatch", "node \"" + n.id + "\": add operand shapes differ");
      }
      return pred_shapes[0];
    }
  }
  throw ValidationError("MalformedDocument", "node \"" + n.id + "\": unknown layer kind");
}

}  // namespace

ComputeGraph infer_shapes(const ComputeGraph& g, Shape3 input_shape) {
  ComputeGraph out = g;
  out.input_shape = input_shape;
  for (const std::string& id : topo_order(out)) {
    GraphNode& n = out.node_mut(id);
    std::vector<Shape3> pred_shapes;
    pred_shapes.reserve(n.preds.size());
    for (const std::string& p : n.preds) {
      pred_shapes.push_back(*out.node(p).out_shape);
    }
    if (pred_shapes.empty() && kind_of(n.layer) != LayerKind::input) {
      throw ValidationError("MalformedDocument", "non-input node \"" + n.id + "\" has no predecessors");
    }
    n.out_shape = infer_node_shape(n, pred_shapes, input_shape);
  }
  return out;
}

ComputeGraph infer_shapes(const ComputeGraph& g) {
  return infer_shapes(g, g.input_shape);
}

}  // namespace nhl
