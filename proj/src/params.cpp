#include "nhl/params.hpp"

namespace nhl {

std::vector<ParamInfo> parameter_manifest(const ComputeGraph& g) {
  std::vector<ParamInfo> out;
  for (const GraphNode& n : g.nodes()) {
    switch (kind_of(n.layer)) {
      case LayerKind::conv2d: {
        const auto& c = std::get<Conv2dAttrs>(n.layer);
        out.push_back({n.id + ".weight", {c.out_ch, c.in_ch / c.groups, c.kh, c.kw}, true, false});
        if (c.has_bias) out.push_back({n.id + ".bias", {c.out_ch}, true, false});
        break;
      }
      case LayerKind::linear: {
        const auto& l = std::get<LinearAttrs>(n.layer);
        const bool sliced = !l.row_select.empty();
        const long long rows =
            sliced ? 1 + *std::max_element(l.row_select.begin(), l.row_select.end()) : l.out_features;
        out.push_back({n.id + ".weight", {rows, l.in_features}, true, sliced});
        if (l.has_bias) out.push_back({n.id + ".bias", {rows}, true, sliced});
        break;
      }
      case LayerKind::batchnorm2d: {
        const int c = std::get<BatchNorm2dAttrs>(n.layer).num_features;
        out.push_back({n.id + ".gamma", {c}, true, false});
        out.push_back({n.id + ".beta", {c}, true, false});
        out.push_back({n.id + ".running_mean", {c}, false, false});
        out.push_back({n.id + ".running_var", {c}, false, false});
        break;
      }
      case LayerKind::layernorm_channels: {
        const int c = std::get<LayerNormChannelsAttrs>(n.layer).num_features;
        out.push_back({n.id + ".gamma", {c}, true, false});
        out.push_back({n.id + ".beta", {c}, true, false});
        break;
      }
      default:
        break;
    }
  }
  return out;
}

}  // namespace nhl
