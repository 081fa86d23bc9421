#include "nhl/train.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "nhl/optim.hpp"

namespace nhl {

namespace {

Tensor<float> gather_batch(const Dataset& data, const std::vector<long long>& idx, size_t begin,
                           size_t end) {
  const long long C = data.images.dim(1), H = data.images.dim(2), W = data.images.dim(3);
  const long long per = C * H * W;
  Tensor<float> x({static_cast<long long>(end - begin), C, H, W});
  for (size_t i = begin; i < end; ++i) {
    std::copy_n(data.images.ptr() + idx[i] * per, per, x.ptr() + static_cast<long long>(i - begin) * per);
  }
  return x;
}

std::unordered_map<CategoryId, int> slot_of_category(const ComputeGraph& g) {
  std::unordered_map<CategoryId, int> slots;
  for (size_t j = 0; j < g.logit_layout.size(); ++j) {
    slots[g.logit_layout[j].category] = static_cast<int>(j);
  }
  return slots;
}

}  // namespace

TrainResult train(const ComputeGraph& g, const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr <= 0.0) {
    throw ValidationError("MalformedDocument", "epochs/batch_size must be >= 1 and lr > 0");
  }
  const ComputeGraph graph = g.shapes_inferred() ? g : infer_shapes(g);
  const auto slots = slot_of_category(graph);
  for (long long i = 0; i < data.size(); ++i) {
    if (!slots.count(data.labels[static_cast<size_t>(i)])) {
      throw ValidationError("ClassCoverageMismatch",
                            "dataset label " + std::to_string(data.labels[static_cast<size_t>(i)]) +
                                " is not served by the graph's logit layout");
    }
  }
  if (data.train_count < 1) {
    throw ValidationError("EmptyEvalSet", "dataset has no training split");
  }

  TrainResult result;
  result.params = init_parameters<float>(graph, cfg.seed);
  result.params.norm_mean = data.norm_mean;
  result.params.norm_std = data.norm_std;

  std::vector<long long> order(static_cast<size_t>(data.train_count));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    long long seen = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      Tensor<float> x = gather_batch(data, order, start, stop);
      std::vector<int> targets;
      targets.reserve(stop - start);
      for (size_t i = start; i < stop; ++i) {
        targets.push_back(slots.at(data.labels[static_cast<size_t>(order[i])]));
      }

      ForwardCache<float> cache;
      Tensor<float> logits = forward(graph, result.params, x, ExecMode::train, &cache);
      SoftmaxLoss<float> loss = softmax_cross_entropy(logits, targets);
      GradientStore<float> grads = backward(graph, result.params, cache, loss.dlogits);
      if (cfg.optimizer == OptimizerKind::sgd) {
        sgd_step<float>(result.params, grads, static_cast<float>(cfg.lr),
                        static_cast<float>(cfg.momentum), static_cast<float>(cfg.weight_decay));
      } else {
        adam_step<float>(result.params, grads, static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
                         static_cast<float>(cfg.beta2), static_cast<float>(cfg.adam_eps),
                         static_cast<float>(cfg.weight_decay));
      }
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(stop - start);
      seen += static_cast<long long>(stop - start);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(seen);
    // Validation top-1 on the held-out split; falls back to the train split
    // when the dataset has none.
    const long long vb = data.val_count() > 0 ? data.train_count : 0;
    m.val_top1 = evaluate(graph, result.params, data, vb, data.size());
    result.log.push_back(m);
    if (!cfg.checkpoint_path.empty()) {
      save_checkpoint(cfg.checkpoint_path,
                      make_checkpoint(graph, result.params, static_cast<std::uint32_t>(epoch)));
    }
    if (on_epoch) on_epoch(m);
  }
  return result;
}

std::vector<CategoryId> predict(const ComputeGraph& g, ParameterStore<float>& params, const Dataset& data,
                                long long begin, long long end,
                                const std::optional<ExpertSpec>& subset) {
  const ComputeGraph graph = g.shapes_inferred() ? g : infer_shapes(g);
  const auto slots = slot_of_category(graph);

  std::unordered_set<CategoryId> keep;
  std::vector<std::pair<int, CategoryId>> scored_slots;  // (slot, category) to scan
  if (subset) {
    if (subset->categories.empty()) {
      throw ValidationError("EmptySubset", "category subset must be nonempty");
    }
    for (CategoryId c : subset->categories) {
      auto it = slots.find(c);
      if (it == slots.end()) {
        throw ValidationError("UnknownCategory",
                              "category " + std::to_string(c) + " is not served by the graph");
      }
      keep.insert(c);
      scored_slots.emplace_back(it->second, c);
    }
  } else {
    for (const auto& [c, slot] : slots) scored_slots.emplace_back(slot, c);
  }
  std::sort(scored_slots.begin(), scored_slots.end());

  std::vector<long long> rows;
  for (long long i = begin; i < end; ++i) {
    if (!subset || keep.count(data.labels[static_cast<size_t>(i)])) rows.push_back(i);
  }
  if (rows.empty()) {
    throw ValidationError("EmptyEvalSet", "no samples to evaluate");
  }

  std::vector<CategoryId> out;
  out.reserve(rows.size());
  constexpr size_t kEvalBatch = 32;
  for (size_t start = 0; start < rows.size(); start += kEvalBatch) {
    const size_t stop = std::min(rows.size(), start + kEvalBatch);
    Tensor<float> x = gather_batch(data, rows, start, stop);
    Tensor<float> logits = forward(graph, params, x, ExecMode::eval);
    for (size_t i = start; i < stop; ++i) {
      float best = -std::numeric_limits<float>::infinity();
      CategoryId arg = -1;
      for (const auto& [slot, c] : scored_slots) {
        const float v = logits.at2(static_cast<long long>(i - start), slot);
        if (v > best) {
          best = v;
          arg = c;
        }
      }
      out.push_back(arg);
    }
  }
  return out;
}

double evaluate(const ComputeGraph& g, ParameterStore<float>& params, const Dataset& data,
                long long begin, long long end, const std::optional<ExpertSpec>& subset) {
  std::vector<long long> rows;
  std::unordered_set<CategoryId> keep;
  if (subset) {
    keep.insert(subset->categories.begin(), subset->categories.end());
  }
  for (long long i = begin; i < end; ++i) {
    if (!subset || keep.count(data.labels[static_cast<size_t>(i)])) rows.push_back(i);
  }
  const std::vector<CategoryId> preds = predict(g, params, data, begin, end, subset);
  long long hits = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (preds[i] == data.labels[static_cast<size_t>(rows[i])]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::string out = "epoch,train_loss,val_top1\n";
  char buf[96];
  for (const EpochMetrics& m : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", m.epoch, m.train_loss, m.val_top1);
    out += buf;
  }
  return out;
}

}  // namespace nhl
