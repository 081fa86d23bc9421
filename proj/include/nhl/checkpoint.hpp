#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "nhl/graph.hpp"
#include "nhl/params.hpp"

namespace nhl {

// File layout (all little-endian): magic "NHLX", u32 version, 32-byte SHA-256
// of the graph's canonical JSON, then one record per tensor until EOF:
// u16 name length, name, u8 dtype, u8 ndim, u32 dims[ndim], raw payload.
// Optimizer slots are stored under "opt.", bookkeeping under "__".
struct Checkpoint {
  std::uint32_t version = 1;
  std::array<std::uint8_t, 32> graph_hash{};
  std::uint32_t epoch = 0;
  ParameterStore<float> store;
};

Checkpoint make_checkpoint(const ComputeGraph& g, ParameterStore<float> store, std::uint32_t epoch);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// HashMismatch unless the checkpoint was written for `g` (or force is set).
void require_graph_match(const Checkpoint& ck, const ComputeGraph& g, bool force = false);

}  // namespace nhl
