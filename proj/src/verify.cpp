#include "nhl/verify.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace nhl {

EquivalenceReport verify_logit_equivalence(const ComputeGraph& full, const ComputeGraph& expert,
                                           ParameterStore<float>& params,
                                           const std::vector<Tensor<float>>& inputs, double tol) {
  const ComputeGraph f = full.shapes_inferred() ? full : infer_shapes(full);
  const ComputeGraph e = expert.shapes_inferred() ? expert : infer_shapes(expert);
  validate_parameters(params, f);
  validate_parameters(params, e);

  std::unordered_map<CategoryId, int> full_slot;
  for (size_t j = 0; j < f.logit_layout.size(); ++j) {
    full_slot[f.logit_layout[j].category] = static_cast<int>(j);
  }
  for (const LogitSlot& s : e.logit_layout) {
    if (!full_slot.count(s.category)) {
      throw ValidationError("UnknownCategory",
                            "expert serves category " + std::to_string(s.category) + " unknown to the full graph");
    }
  }

  EquivalenceReport report;
  long long agree = 0;
  for (const Tensor<float>& x : inputs) {
    const Tensor<float> zf = forward(f, params, x, ExecMode::eval);
    const Tensor<float> ze = forward(e, params, x, ExecMode::eval);
    const long long batch = x.dim(0);
    for (long long n = 0; n < batch; ++n) {
      report.samples += 1;
      float best_full = -std::numeric_limits<float>::infinity();
      float best_exp = -std::numeric_limits<float>::infinity();
      CategoryId arg_full = -1, arg_exp = -1;
      for (size_t j = 0; j < e.logit_layout.size(); ++j) {
        const CategoryId c = e.logit_layout[j].category;
        const float lf = zf.at2(n, full_slot.at(c));
        const float le = ze.at2(n, static_cast<long long>(j));
        report.max_abs_diff = std::max(report.max_abs_diff,
                                       static_cast<double>(std::abs(static_cast<double>(lf) - le)));
        if (lf > best_full) {
          best_full = lf;
          arg_full = c;
        }
        if (le > best_exp) {
          best_exp = le;
          arg_exp = c;
        }
      }
      if (arg_full == arg_exp) ++agree;
    }
  }
  report.argmax_agreement =
      report.samples == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(report.samples);
  return report;
}

std::string equivalence_report_json(const EquivalenceReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "{\"samples\": %lld, \"max_abs_diff\": %.9g, \"argmax_agreement\": %.9g}", r.samples,
                r.max_abs_diff, r.argmax_agreement);
  return buf;
}

}  // namespace nhl
