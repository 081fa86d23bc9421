#pragma once

#include <vector>

#include "nhl/executor.hpp"
#include "nhl/expert.hpp"

namespace nhl {

struct EquivalenceReport {
  long long samples = 0;
  double max_abs_diff = 0.0;
  double argmax_agreement = 0.0;  // over the expert's restricted category set

  bool passed(double tol) const { return max_abs_diff <= tol && argmax_agreement == 1.0; }
};

// Runs both graphs in eval mode on every input and compares pre-softmax
// logits of the expert's categories, plus restricted-argmax agreement.
// Branches only meet at softmax, so with the deterministic evaluation order
// the diff is exactly zero.
EquivalenceReport verify_logit_equivalence(const ComputeGraph& full, const ComputeGraph& expert,
                                           ParameterStore<float>& params,
                                           const std::vector<Tensor<float>>& inputs, double tol);

std::string equivalence_report_json(const EquivalenceReport& r);

}  // namespace nhl
