#pragma once

#include <unordered_map>
#include <unordered_set>

#include "nhl/graph.hpp"
#include "nhl/ops.hpp"
#include "nhl/params.hpp"

namespace nhl {

enum class ExecMode { train, eval };

template <typename T>
struct NodeState {
  Tensor<T> out;
  BatchNormCache<T> bn;
  MaxPoolCache pool;
};

// Activations (and per-op scratch) recorded by a training-mode forward pass;
// backward() consumes them.
template <typename T>
struct ForwardCache {
  std::vector<std::string> order;
  std::unordered_map<std::string, NodeState<T>> states;
};

namespace detail {

// Reshape (N,C,1,1) conv-side tensors to (N,F) linear-side views and back.
template <typename T>
Tensor<T> as_rows(const Tensor<T>& t) {
  if (t.rank() == 2) return t;
  Tensor<T> v = t;
  v.dims = {t.dim(0), t.dim(1) * t.dim(2) * t.dim(3)};
  return v;
}

}  // namespace detail

// Evaluates the graph in deterministic topological order and assembles the
// logit tensor per logit_layout (N x num_slots). Train mode updates BN
// running statistics in `params`. When `cache` is null, intermediate
// activations are released as soon as their consumers have run.
template <typename T>
Tensor<T> forward(const ComputeGraph& g, ParameterStore<T>& params, const Tensor<T>& x, ExecMode mode,
                  ForwardCache<T>* cache = nullptr) {
  if (!g.shapes_inferred()) {
    throw ValidationError("ShapesMissing", "run infer_shapes before forward");
  }
  require_rank(x, 4, "forward input");
  if (x.dim(1) != g.input_shape.c || x.dim(2) != g.input_shape.h || x.dim(3) != g.input_shape.w) {
    throw ValidationError("ShapeMismatch", "forward: input tensor does not match graph input_shape");
  }
  if (g.logit_layout.empty()) {
    throw ValidationError("ShapeMismatch", "graph has no logit layout");
  }
  validate_parameters(params, g);

  const std::vector<std::string> order = topo_order(g);
  std::unordered_map<std::string, int> remaining_uses;
  for (const GraphNode& n : g.nodes()) {
    for (const std::string& p : n.preds) remaining_uses[p]++;
  }
  for (const LogitSlot& s : g.logit_layout) remaining_uses[s.node]++;

  std::unordered_map<std::string, NodeState<T>> states;
  states.reserve(order.size());

  auto consume = [&](const std::string& id) -> const Tensor<T>& {
    auto it = states.find(id);
    if (it == states.end()) {
      throw ValidationError("ShapeMismatch", "forward: predecessor \"" + id + "\" not yet evaluated");
    }
    return it->second.out;
  };
  auto release = [&](const std::string& id) {
    if (cache != nullptr) return;
    if (--remaining_uses[id] == 0) states.erase(id);
  };

  for (const std::string& id : order) {
    const GraphNode& n = g.node(id);
    NodeState<T> st;
    switch (kind_of(n.layer)) {
      case LayerKind::input:
        st.out = x;
        break;
      case LayerKind::conv2d: {
        const auto& c = std::get<Conv2dAttrs>(n.layer);
        const Tensor<T>& w = params.get(id + ".weight");
        const Tensor<T>* b = c.has_bias ? &params.get(id + ".bias") : nullptr;
        st.out = conv2d_forward(consume(n.preds[0]), w, b, c.stride, c.padding, c.groups);
        break;
      }
      case LayerKind::batchnorm2d: {
        st.out = batchnorm2d_forward(consume(n.preds[0]), params.get(id + ".gamma"),
                                     params.get(id + ".beta"), params.get(id + ".running_mean"),
                                     params.get(id + ".running_var"), mode == ExecMode::train,
                                     T(0.1), T(1e-5), cache != nullptr ? &st.bn : nullptr);
        break;
      }
      case LayerKind::activation:
        st.out = activation_forward(consume(n.preds[0]), std::get<ActivationAttrs>(n.layer).fn);
        break;
      case LayerKind::maxpool2d: {
        const auto& m = std::get<MaxPool2dAttrs>(n.layer);
        st.out = maxpool2d_forward(consume(n.preds[0]), m.kh, m.kw, m.stride, m.padding,
                                   cache != nullptr ? &st.pool : nullptr);
        break;
      }
      case LayerKind::global_avg_pool:
        st.out = global_avg_pool_forward(consume(n.preds[0]));
        break;
      case LayerKind::linear: {
        const auto& l = std::get<LinearAttrs>(n.layer);
        const Tensor<T>& w = params.get(id + ".weight");
        const Tensor<T>* b = l.has_bias ? &params.get(id + ".bias") : nullptr;
        st.out = linear_forward(detail::as_rows(consume(n.preds[0])), w, b, l.row_select);
        break;
      }
      case LayerKind::add: {
        const Tensor<T>& a = consume(n.preds[0]);
        const Tensor<T>& b = consume(n.preds[1]);
        if (!a.same_dims(b)) {
          throw ValidationError("ShapeMismatch", "add: operand shapes differ at \"" + id + "\"");
        }
        Tensor<T> sum(a.dims);
        for (long long i = 0; i < a.size(); ++i) sum.ptr()[i] = a.ptr()[i] + b.ptr()[i];
        st.out = std::move(sum);
        break;
      }
      case LayerKind::layernorm_channels:
        throw ValidationError("UnsupportedLayer",
                              "layernorm_channels has no runtime kernel (cost analysis only)");
    }
    states.emplace(id, std::move(st));
    for (const std::string& p : n.preds) release(p);
  }

  const long long N = x.dim(0);
  Tensor<T> logits({N, static_cast<long long>(g.logit_layout.size())});
  for (size_t j = 0; j < g.logit_layout.size(); ++j) {
    const LogitSlot& s = g.logit_layout[j];
    const Tensor<T>& head = states.at(s.node).out;
    if (s.offset < 0 || s.offset >= head.dim(1)) {
      throw ValidationError("ShapeMismatch", "logit_layout offset out of range for \"" + s.node + "\"");
    }
    for (long long n = 0; n < N; ++n) logits.at2(n, static_cast<long long>(j)) = head.at2(n, s.offset);
  }
  if (cache != nullptr) {
    cache->order = order;
    cache->states = std::move(states);
  }
  return logits;
}

// Reverse traversal accumulating parameter gradients. `cache` must come from
// a forward() call with the same graph, parameters and mode=train.
template <typename T>
GradientStore<T> backward(const ComputeGraph& g, const ParameterStore<T>& params,
                          const ForwardCache<T>& cache, const Tensor<T>& dlogits) {
  GradientStore<T> grads;
  std::unordered_map<std::string, Tensor<T>> dout;

  auto accumulate = [&](const std::string& id, Tensor<T>&& delta) {
    auto it = dout.find(id);
    if (it == dout.end()) {
      dout.emplace(id, std::move(delta));
      return;
    }
    Tensor<T>& acc = it->second;
    for (long long i = 0; i < acc.size(); ++i) acc.ptr()[i] += delta.ptr()[i];
  };

  // Scatter logit gradients onto the producing head outputs.
  const long long N = dlogits.dim(0);
  if (dlogits.dim(1) != static_cast<long long>(g.logit_layout.size())) {
    throw ValidationError("ShapeMismatch", "backward: dlogits width != logit layout size");
  }
  for (size_t j = 0; j < g.logit_layout.size(); ++j) {
    const LogitSlot& s = g.logit_layout[j];
    const Tensor<T>& head_out = cache.states.at(s.node).out;
    Tensor<T> delta(head_out.dims);
    for (long long n = 0; n < N; ++n) delta.at2(n, s.offset) = dlogits.at2(n, static_cast<long long>(j));
    accumulate(s.node, std::move(delta));
  }

  for (auto rit = cache.order.rbegin(); rit != cache.order.rend(); ++rit) {
    const std::string& id = *rit;
    auto dit = dout.find(id);
    if (dit == dout.end()) continue;  // dead end: no gradient flows here
    Tensor<T> dy = std::move(dit->second);
    dout.erase(dit);
    const GraphNode& n = g.node(id);
    const NodeState<T>& st = cache.states.at(id);
    switch (kind_of(n.layer)) {
      case LayerKind::input:
        break;
      case LayerKind::conv2d: {
        const auto& c = std::get<Conv2dAttrs>(n.layer);
        const Tensor<T>& xin = cache.states.at(n.preds[0]).out;
        const bool input_needs_grad = kind_of(g.node(n.preds[0]).layer) != LayerKind::input;
        ConvGrads<T> cg = conv2d_backward(xin, params.get(id + ".weight"), c.has_bias, c.stride,
                                          c.padding, c.groups, dy, input_needs_grad);
        grads.emplace(id + ".weight", std::move(cg.dw));
        if (c.has_bias) grads.emplace(id + ".bias", std::move(cg.db));
        if (input_needs_grad) accumulate(n.preds[0], std::move(cg.dx));
        break;
      }
      case LayerKind::batchnorm2d: {
        const Tensor<T>& xin = cache.states.at(n.preds[0]).out;
        BatchNormGrads<T> bg = batchnorm2d_backward(xin, params.get(id + ".gamma"), st.bn, dy);
        grads.emplace(id + ".gamma", std::move(bg.dgamma));
        grads.emplace(id + ".beta", std::move(bg.dbeta));
        accumulate(n.preds[0], std::move(bg.dx));
        break;
      }
      case LayerKind::activation: {
        const Tensor<T>& xin = cache.states.at(n.preds[0]).out;
        accumulate(n.preds[0], activation_backward(xin, std::get<ActivationAttrs>(n.layer).fn, dy));
        break;
      }
      case LayerKind::maxpool2d: {
        const Tensor<T>& xin = cache.states.at(n.preds[0]).out;
        accumulate(n.preds[0], maxpool2d_backward(xin.dims, st.pool, dy));
        break;
      }
      case LayerKind::global_avg_pool: {
        const Tensor<T>& xin = cache.states.at(n.preds[0]).out;
        accumulate(n.preds[0], global_avg_pool_backward(xin.dims, detail::as_rows(dy)));
        break;
      }
      case LayerKind::linear: {
        const auto& l = std::get<LinearAttrs>(n.layer);
        const Tensor<T>& xin = cache.states.at(n.preds[0]).out;
        LinearGrads<T> lg =
            linear_backward(detail::as_rows(xin), params.get(id + ".weight"), l.has_bias, l.row_select, dy);
        grads.emplace(id + ".weight", std::move(lg.dw));
        if (l.has_bias) grads.emplace(id + ".bias", std::move(lg.db));
        lg.dx.dims = xin.dims;  // undo the row view
        accumulate(n.preds[0], std::move(lg.dx));
        break;
      }
      case LayerKind::add: {
        Tensor<T> copy = dy;
        accumulate(n.preds[0], std::move(copy));
        accumulate(n.preds[1], std::move(dy));
        break;
      }
      case LayerKind::layernorm_channels:
        throw ValidationError("UnsupportedLayer",
                              "layernorm_channels has no runtime kernel (cost analysis only)");
    }
  }
  return grads;
}

}  // namespace nhl
