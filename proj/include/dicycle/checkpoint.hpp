#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dicycle/tensor.hpp"

namespace dicycle {

// Binary checkpoint: "DCYK" magic + u32 version, u64 entry count, then per
// entry u32 name length, UTF-8 name, u32 rank, u64 extents, and the payload
// as little-endian IEEE-754 doubles. Round-trips bit-exactly.
struct NamedTensor {
  std::string name;
  TensorPtr tensor;
};

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Copies checkpoint payloads into existing tensors, matched by name.
// Missing names or shape mismatches are errors.
void restore_into(const std::vector<NamedTensor>& loaded, std::vector<NamedTensor>& target);

}  // namespace dicycle
