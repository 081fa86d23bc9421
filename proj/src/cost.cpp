#include "nhl/cost.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

namespace nhl {

namespace {

using ordered_json = nlohmann::ordered_json;

long long node_params(const GraphNode& n) {
  switch (kind_of(n.layer)) {
    case LayerKind::conv2d: {
      const auto& c = std::get<Conv2dAttrs>(n.layer);
      long long p = 1LL * c.out_ch * (c.in_ch / c.groups) * c.kh * c.kw;
      if (c.has_bias) p += c.out_ch;
      return p;
    }
    case LayerKind::linear: {
      const auto& l = std::get<LinearAttrs>(n.layer);
      long long p = 1LL * l.in_features * l.out_features;
      if (l.has_bias) p += l.out_features;
      return p;
    }
    case LayerKind::batchnorm2d:
      return 2LL * std::get<BatchNorm2dAttrs>(n.layer).num_features;
    case LayerKind::layernorm_channels:
      return 2LL * std::get<LayerNormChannelsAttrs>(n.layer).num_features;
    default:
      return 0;
  }
}

long long node_macs(const GraphNode& n, Convention conv) {
  const Shape3& out = *n.out_shape;
  switch (kind_of(n.layer)) {
    case LayerKind::conv2d: {
      const auto& c = std::get<Conv2dAttrs>(n.layer);
      return 1LL * (c.in_ch / c.groups) * c.out_ch * c.kh * c.kw * out.h * out.w;
    }
    case LayerKind::linear: {
      const auto& l = std::get<LinearAttrs>(n.layer);
      return 1LL * l.in_features * l.out_features;
    }
    case LayerKind::input:
      return 0;
    default:
      return conv.include_elementwise ? out.numel() : 0;
  }
}

CostReport make_report(const ComputeGraph& g, Shape3 input_shape, Convention convention, bool params,
                       bool macs) {
  const ComputeGraph annotated = g.shapes_inferred() && g.input_shape == input_shape
                                     ? g
                                     : infer_shapes(g, input_shape);
  CostReport r;
  r.input_shape = input_shape;
  r.convention = convention;
  for (const GraphNode& n : annotated.nodes()) {
    CostRow row;
    row.node_id = n.id;
    row.kind = kind_name(kind_of(n.layer));
    row.tag = n.tag;
    if (params) row.params = node_params(n);
    if (macs) row.macs = node_macs(n, convention);
    r.total_params += row.params;
    r.total_macs += row.macs;
    r.per_node.push_back(std::move(row));
  }
  return r;
}

}  // namespace

CostReport count_params(const ComputeGraph& g) {
  if (!g.shapes_inferred()) {
    throw ValidationError("ShapesMissing", "run infer_shapes before counting");
  }
  return make_report(g, g.input_shape, Convention{}, true, false);
}

CostReport count_macs(const ComputeGraph& g, Shape3 input_shape, Convention convention) {
  return make_report(g, input_shape, convention, false, true);
}

CostReport analyze_cost(const ComputeGraph& g, Shape3 input_shape, Convention convention) {
  return make_report(g, input_shape, convention, true, true);
}

ReductionReport reduction(const CostReport& base, const CostReport& variant) {
  if (!(base.convention == variant.convention)) {
    throw ValidationError("ConventionMismatch", "reports use different counting conventions");
  }
  if (base.total_params == 0 && base.total_macs == 0) {
    throw ValidationError("ZeroBase", "base report has zero totals");
  }
  ReductionReport r;
  r.base = base;
  r.variant = variant;
  r.param_reduction =
      base.total_params == 0 ? 0.0 : 1.0 - static_cast<double>(variant.total_params) / base.total_params;
  r.mac_reduction =
      base.total_macs == 0 ? 0.0 : 1.0 - static_cast<double>(variant.total_macs) / base.total_macs;
  return r;
}

// ---------------------------------------------------------------------------
// Instrumented oracle

long long oracle_mac_count(const ComputeGraph& g, Shape3 input_shape, int max_hw) {
  if (input_shape.h > max_hw || input_shape.w > max_hw) {
    throw ValidationError("InputTooLarge", "oracle input capped at " + std::to_string(max_hw) + "x" +
                                               std::to_string(max_hw));
  }
  const ComputeGraph a = infer_shapes(g, input_shape);
  std::unordered_map<std::string, std::vector<float>> buffers;
  long long macs = 0;

  for (const std::string& id : topo_order(a)) {
    const GraphNode& n = a.node(id);
    const Shape3 out = *n.out_shape;
    std::vector<float> y(static_cast<size_t>(out.numel()), 0.0f);
    switch (kind_of(n.layer)) {
      case LayerKind::conv2d: {
        const auto& c = std::get<Conv2dAttrs>(n.layer);
        const Shape3 in = *a.node(n.preds[0]).out_shape;
        const std::vector<float>& x = buffers.at(n.preds[0]);
        const int cg = c.in_ch / c.groups;
        const int ocg = c.out_ch / c.groups;
        for (int gi = 0; gi < c.groups; ++gi) {
          for (int o = 0; o < ocg; ++o) {
            const int oc = gi * ocg + o;
            for (int oh = 0; oh < out.h; ++oh) {
              for (int ow = 0; ow < out.w; ++ow) {
                float acc = 0.0f;
                for (int ic = 0; ic < cg; ++ic) {
                  for (int kh = 0; kh < c.kh; ++kh) {
                    for (int kw = 0; kw < c.kw; ++kw) {
                      const int ih = oh * c.stride - c.padding + kh;
                      const int iw = ow * c.stride - c.padding + kw;
                      const float xv = (ih >= 0 && ih < in.h && iw >= 0 && iw < in.w)
                                           ? x[(static_cast<size_t>(gi * cg + ic) * in.h + ih) * in.w + iw]
                                           : 0.0f;
                      acc += xv;  // weights irrelevant for the count
                      ++macs;
                    }
                  }
                }
                y[(static_cast<size_t>(oc) * out.h + oh) * out.w + ow] = acc;
              }
            }
          }
        }
        break;
      }
      case LayerKind::linear: {
        const auto& l = std::get<LinearAttrs>(n.layer);
        for (int o = 0; o < l.out_features; ++o) {
          for (int i = 0; i < l.in_features; ++i) {
            ++macs;
          }
        }
        break;
      }
      default:
        break;  // shape bookkeeping only
    }
    buffers[id] = std::move(y);
  }
  return macs;
}

// ---------------------------------------------------------------------------
// Export / formatting

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += "\"\"";
    else quoted += ch;
  }
  quoted += "\"";
  return quoted;
}

ordered_json cost_to_json(const CostReport& r) {
  ordered_json doc;
  doc["type"] = "cost_report";
  doc["input_shape"] = {r.input_shape.c, r.input_shape.h, r.input_shape.w};
  doc["convention"] = {{"include_elementwise", r.convention.include_elementwise}};
  ordered_json rows = ordered_json::array();
  for (const CostRow& row : r.per_node) {
    rows.push_back({{"node_id", row.node_id},
                    {"kind", row.kind},
                    {"tag", row.tag},
                    {"params", row.params},
                    {"macs", row.macs}});
  }
  doc["per_node"] = std::move(rows);
  doc["total_params"] = r.total_params;
  doc["total_macs"] = r.total_macs;
  doc["summary"] = {{"params", format_params_m(r.total_params)}, {"gmacs", format_gmacs(r.total_macs)}};
  return doc;
}

}  // namespace

std::string export_report(const CostReport& r, ReportFormat format) {
  if (format == ReportFormat::json) {
    return cost_to_json(r).dump(1) + "\n";
  }
  std::string out = "node_id,kind,tag,params,macs\n";
  for (const CostRow& row : r.per_node) {
    out += csv_field(row.node_id) + "," + row.kind + "," + csv_field(row.tag) + "," +
           std::to_string(row.params) + "," + std::to_string(row.macs) + "\n";
  }
  out += "TOTAL,,," + std::to_string(r.total_params) + "," + std::to_string(r.total_macs) + "\n";
  return out;
}

std::string export_report(const ReductionReport& r, ReportFormat format) {
  if (format == ReportFormat::json) {
    ordered_json doc;
    doc["type"] = "reduction_report";
    doc["base"] = cost_to_json(r.base);
    doc["variant"] = cost_to_json(r.variant);
    doc["param_reduction"] = r.param_reduction;
    doc["mac_reduction"] = r.mac_reduction;
    doc["rendered"] = {{"gmacs", format_gmacs(r.base.total_macs) + " -> " + format_gmacs(r.variant.total_macs)},
                       {"gmacs_reduction", format_reduction(r.mac_reduction)},
                       {"params", format_params_m(r.base.total_params) + " -> " +
                                      format_params_m(r.variant.total_params)},
                       {"param_reduction", format_reduction(r.param_reduction)}};
    return doc.dump(1) + "\n";
  }
  std::string out = "metric,base,variant,reduction\n";
  out += "GMACs," + format_gmacs(r.base.total_macs) + "," + format_gmacs(r.variant.total_macs) + "," +
         format_reduction(r.mac_reduction) + "\n";
  out += "Parameters," + format_params_m(r.base.total_params) + "," +
         format_params_m(r.variant.total_params) + "," + format_reduction(r.param_reduction) + "\n";
  return out;
}

CostReport parse_cost_report(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("MalformedDocument", e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "cost_report") {
    throw ValidationError("MalformedDocument", "not a cost_report document");
  }
  CostReport r;
  const auto& shp = doc.at("input_shape");
  r.input_shape = {shp[0].get<int>(), shp[1].get<int>(), shp[2].get<int>()};
  r.convention.include_elementwise = doc.at("convention").at("include_elementwise").get<bool>();
  for (const auto& row : doc.at("per_node")) {
    r.per_node.push_back({row.at("node_id").get<std::string>(), row.at("kind").get<std::string>(),
                          row.value("tag", ""), row.at("params").get<long long>(),
                          row.at("macs").get<long long>()});
  }
  r.total_params = doc.at("total_params").get<long long>();
  r.total_macs = doc.at("total_macs").get<long long>();
  return r;
}

std::string format_params_m(long long params) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1fM", static_cast<double>(params) / 1e6);
  return buf;
}

std::string format_gmacs(long long macs) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", static_cast<double>(macs) / 1e9);
  return buf;
}

std::string format_reduction(double fraction) {
  // Table style: negative sign marks a cost decrease, "+" an increase.
  const double pct = fraction * 100.0;
  char buf[32];
  if (std::abs(pct) < 0.05) {
    return "0.0%";
  }
  std::snprintf(buf, sizeof(buf), "%s%.1f%%", fraction > 0 ? "-" : "+", std::abs(pct));
  return buf;
}

}  // namespace nhl
