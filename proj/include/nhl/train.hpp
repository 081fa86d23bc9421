#pragma once

#include <functional>
#include <optional>
#include <string>

#include "nhl/checkpoint.hpp"
#include "nhl/dataset.hpp"
#include "nhl/executor.hpp"
#include "nhl/expert.hpp"

namespace nhl {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  int epochs = 1;
  int batch_size = 8;
  double lr = 0.01;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // written every epoch when nonempty
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
};

struct TrainResult {
  ParameterStore<float> params;
  std::vector<EpochMetrics> log;
};

// Seeded shuffling per epoch; forward -> softmax-log-loss -> backward ->
// optimizer step. Bit-for-bit reproducible for a fixed seed.
TrainResult train(const ComputeGraph& g, const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

// Eval-mode top-1 accuracy over [begin, end) of the dataset. With a subset,
// samples are filtered to subset labels and argmax restricted to the subset.
double evaluate(const ComputeGraph& g, ParameterStore<float>& params, const Dataset& data,
                long long begin, long long end, const std::optional<ExpertSpec>& subset = std::nullopt);

// Predicted category per filtered sample (same restriction rules as
// evaluate); used to compare a full model against an extracted expert.
std::vector<CategoryId> predict(const ComputeGraph& g, ParameterStore<float>& params, const Dataset& data,
                                long long begin, long long end,
                                const std::optional<ExpertSpec>& subset = std::nullopt);

std::string metrics_csv(const std::vector<EpochMetrics>& log);

}  // namespace nhl
