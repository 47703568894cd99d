#pragma once

#include <string>
#include <vector>

#include "commkit/model.hpp"

namespace commkit {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Flat little-endian binary container, versioned via the magic string:
//   magic "CKPT0001"
//   model config: 5 x u64 (attr_dim, hidden_dim, n_heads, readout_hidden,
//                 k_max) + 2 x f64 (dropout, negative_slope)
//   u64 tensor count, then per tensor:
//     u32 name length, name bytes, u64 rows, u64 cols, raw f64 data
// Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const std::vector<NamedTensor>& tensors);

struct LoadedCheckpoint {
  ModelConfig config;
  std::vector<NamedTensor> tensors;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

std::vector<NamedTensor> snapshot(const ParameterStore& store);
void restore(ParameterStore& store, const std::vector<NamedTensor>& tensors);

// Rebuilds the full parameter structure from a loaded checkpoint.
ModelParameters model_from_checkpoint(const LoadedCheckpoint& ckpt);

}  // namespace commkit
