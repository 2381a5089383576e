#pragma once

#include <vector>

#include "dicycle/tensor.hpp"

namespace dicycle {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one pair per parameter tensor.
struct AdamState {
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
  long step = 0;

  static AdamState init(const std::vector<TensorPtr>& params);
};

// Standard bias-corrected Adam update. Parameters without an allocated
// gradient are treated as a contract violation.
void adam_step(const std::vector<TensorPtr>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace dicycle
