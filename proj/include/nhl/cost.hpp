#pragma once

#include <string>
#include <vector>

#include "nhl/graph.hpp"

namespace nhl {

struct Convention {
  // With false (default) only conv and linear nodes cost MACs; with true,
  // norms/activations/pools/adds cost one MAC-equivalent per output element.
  bool include_elementwise = false;
  bool operator==(const Convention&) const = default;
};

struct CostRow {
  std::string node_id;
  std::string kind;
  std::string tag;
  long long params = 0;
  long long macs = 0;
};

struct CostReport {
  std::vector<CostRow> per_node;  // graph document order
  long long total_params = 0;
  long long total_macs = 0;
  Shape3 input_shape;
  Convention convention;
};

struct ReductionReport {
  CostReport base;
  CostReport variant;
  double param_reduction = 0.0;  // 1 - variant/base
  double mac_reduction = 0.0;
};

enum class ReportFormat { json, csv };

// Learnable parameters per node: conv out*(in/groups)*kh*kw (+out if bias),
// linear in*out (+out), norm affine 2*C; running statistics excluded;
// pool/activation/add cost nothing. Requires inferred shapes.
CostReport count_params(const ComputeGraph& g);

// Multiply-accumulates per node at the given input shape; conv
// (in/groups)*out*kh*kw*Hout*Wout, linear in*out.
CostReport count_macs(const ComputeGraph& g, Shape3 input_shape, Convention convention = {});

// Both columns in one report (what `nhl analyze` emits).
CostReport analyze_cost(const ComputeGraph& g, Shape3 input_shape, Convention convention = {});

ReductionReport reduction(const CostReport& base, const CostReport& variant);

// Instrumented dense forward pass that literally counts one tick per
// multiply-accumulate inside the conv/linear inner loops. Independent of the
// analytic formulas above. `max_hw` guards against oversized dense runs.
long long oracle_mac_count(const ComputeGraph& g, Shape3 input_shape, int max_hw = 64);

std::string export_report(const CostReport& r, ReportFormat format);
std::string export_report(const ReductionReport& r, ReportFormat format);
CostReport parse_cost_report(const std::string& json_text);

// Rendering conventions: parameters in millions to one decimal ("23.5M"),
// GMACs to two decimals ("4.09"), reductions signed to one decimal ("-44.5%").
std::string format_params_m(long long params);
std::string format_gmacs(long long macs);
std::string format_reduction(double fraction);

}  // namespace nhl
