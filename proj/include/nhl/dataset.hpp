#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nhl/tensor.hpp"

namespace nhl {

// Images arrive as u8, are scaled to [0,1] and per-channel standardized with
// constants fixed per source format (recorded into checkpoints at train
// time). The first `train_count` samples are the train split, the rest val.
struct Dataset {
  Tensor<float> images;  // (N,C,H,W)
  std::vector<int> labels;
  long long train_count = 0;
  std::vector<float> norm_mean, norm_std;
  std::string source;

  long long size() const { return images.rank() > 0 ? images.dim(0) : 0; }
  long long val_count() const { return size() - train_count; }
};

// IDX pair (big-endian headers, magic 0x00000803 images / 0x00000801 labels).
// The whole pair lands in the train split.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// CIFAR-10 binary batches: data_batch_*.bin as train, test_batch.bin as val.
// Record = 1 label byte + 3x1024 channel planes.
Dataset load_cifar10_binary(const std::filesystem::path& dir_path);

// Deterministic synthetic 10-class-style RGB set (class-coded colors and
// patterns plus noise) written as raw CIFAR records. Desk-scale stand-in for
// the paper-scale datasets.
struct SynthConfig {
  int classes = 10;
  int train_per_class = 64;
  int val_per_class = 16;
  int hw = 32;
  std::uint64_t seed = 1;
  float noise = 18.0f;  // u8 scale
};
// Returns (labels, pixels) as CIFAR-style records of 1+3*hw*hw bytes each.
std::vector<std::uint8_t> synth_records(const SynthConfig& cfg, bool val_split);
void write_cifar10_dir(const SynthConfig& cfg, const std::filesystem::path& dir);
Dataset make_synthetic(const SynthConfig& cfg);

}  // namespace nhl
