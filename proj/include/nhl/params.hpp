#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "nhl/graph.hpp"
#include "nhl/tensor.hpp"

namespace nhl {

// Named tensors for a graph: trainable parameters plus per-norm running
// statistics, keyed "<node_id>.<role>" with role in
// weight|bias|gamma|beta|running_mean|running_var. Optimizer slots live in
// `opt_state` ("momentum.*", "adam_m.*", "adam_v.*") so a checkpoint captures
// them.
template <typename T>
struct ParameterStore {
  std::map<std::string, Tensor<T>> tensors;
  std::map<std::string, Tensor<T>> opt_state;
  long long step = 0;  // Adam bias-correction counter
  std::vector<T> norm_mean, norm_std;  // dataset normalization, recorded at train time

  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  Tensor<T>& get(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw ValidationError("ParameterMismatch", "missing parameter \"" + name + "\"");
    }
    return it->second;
  }
  const Tensor<T>& get(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->get(name);
  }
};

template <typename T>
using GradientStore = std::map<std::string, Tensor<T>>;

struct ParamInfo {
  std::string name;
  std::vector<long long> dims;
  bool trainable = true;
  // Sliced expert heads address a subset of rows; stored tensors may hold
  // more rows than the expert's descriptor implies.
  bool rows_lower_bound = false;
};

// Every parameter and running statistic the graph's nodes reference, in
// graph order. This is the name manifest an expert uses to subset a full
// checkpoint.
std::vector<ParamInfo> parameter_manifest(const ComputeGraph& g);

// Throws ParameterMismatch when a required tensor is absent or misshaped.
template <typename T>
void validate_parameters(const ParameterStore<T>& store, const ComputeGraph& g) {
  for (const ParamInfo& info : parameter_manifest(g)) {
    const Tensor<T>& t = store.get(info.name);
    bool ok = t.rank() == static_cast<int>(info.dims.size());
    if (ok) {
      for (size_t i = 0; i < info.dims.size(); ++i) {
        const long long have = t.dims[i];
        const long long want = info.dims[i];
        const bool bad = (i == 0 && info.rows_lower_bound) ? (have < want) : (have != want);
        if (bad) ok = false;
      }
    }
    if (!ok) {
      throw ValidationError("ParameterMismatch", "parameter \"" + info.name + "\" has unexpected shape");
    }
  }
}

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

// He-normal for conv weights, uniform(+-1/sqrt(fan_in)) for FC weight and
// bias, identity statistics for norms. Each tensor draws from its own
// name-seeded engine, so results do not depend on iteration order.
template <typename T>
ParameterStore<T> init_parameters(const ComputeGraph& g, std::uint64_t seed) {
  ParameterStore<T> store;
  for (const GraphNode& n : g.nodes()) {
    switch (kind_of(n.layer)) {
      case LayerKind::conv2d: {
        const auto& c = std::get<Conv2dAttrs>(n.layer);
        Tensor<T> w({c.out_ch, c.in_ch / c.groups, c.kh, c.kw});
        const double fan_in = static_cast<double>(c.in_ch / c.groups) * c.kh * c.kw;
        std::mt19937_64 rng(seed ^ detail::fnv1a64(n.id + ".weight"));
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (T& v : w.data) v = static_cast<T>(dist(rng));
        store.tensors.emplace(n.id + ".weight", std::move(w));
        if (c.has_bias) {
          store.tensors.emplace(n.id + ".bias", Tensor<T>({c.out_ch}));
        }
        break;
      }
      case LayerKind::linear: {
        const auto& l = std::get<LinearAttrs>(n.layer);
        const long long rows = l.row_select.empty()
                                   ? l.out_features
                                   : 1 + *std::max_element(l.row_select.begin(), l.row_select.end());
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_features));
        Tensor<T> w({rows, l.in_features});
        std::mt19937_64 rng(seed ^ detail::fnv1a64(n.id + ".weight"));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (T& v : w.data) v = static_cast<T>(dist(rng));
        store.tensors.emplace(n.id + ".weight", std::move(w));
        if (l.has_bias) {
          Tensor<T> b({rows});
          std::mt19937_64 rng_b(seed ^ detail::fnv1a64(n.id + ".bias"));
          for (T& v : b.data) v = static_cast<T>(dist(rng_b));
          store.tensors.emplace(n.id + ".bias", std::move(b));
        }
        break;
      }
      case LayerKind::batchnorm2d:
      case LayerKind::layernorm_channels: {
        const int c = kind_of(n.layer) == LayerKind::batchnorm2d
                          ? std::get<BatchNorm2dAttrs>(n.layer).num_features
                          : std::get<LayerNormChannelsAttrs>(n.layer).num_features;
        store.tensors.emplace(n.id + ".gamma", Tensor<T>({c}, T(1)));
        store.tensors.emplace(n.id + ".beta", Tensor<T>({c}));
        if (kind_of(n.layer) == LayerKind::batchnorm2d) {
          store.tensors.emplace(n.id + ".running_mean", Tensor<T>({c}));
          store.tensors.emplace(n.id + ".running_var", Tensor<T>({c}, T(1)));
        }
        break;
      }
      default:
        break;
    }
  }
  return store;
}

}  // namespace nhl
