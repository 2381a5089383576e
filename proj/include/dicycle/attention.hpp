#pragma once

#include <Eigen/Dense>

#include <vector>

#include "dicycle/tensor.hpp"

namespace dicycle {

struct GatedFilterConfig {
  double delta_thred = 0.6;  // similarity threshold in [0, 1]
  bool strict_mask = false;  // drop filtered positions from the softmax too
};

struct GateResult {
  Eigen::VectorXd weights;  // f_k per behavior row; 0 means filtered out
  int zero_norm_count = 0;  // rows where a zero-norm embedding was substituted
};

// Gated weight f_k of Eq.-style piecewise thresholding: the shifted cosine
// similarity (1 + cos)/2 if it reaches delta_thred, else 0. Operates on raw
// values: the gate is a constant during backpropagation. Zero-norm embeddings
// get the uninformative similarity 0.5 and are counted.
GateResult gated_weights(const Eigen::VectorXd& target_embedding,
                         const Eigen::MatrixXd& behavior_embeddings, double delta_thred);

// Row-wise scaling of the time embeddings by the gate weights. Rows with
// f_k == 0 become exact zero vectors.
TensorPtr apply_filter(const Eigen::VectorXd& weights, const TensorPtr& q);

// Learned projections of the time cycle attention.
struct TimeCycleAttention {
  TensorPtr wq;
  TensorPtr wk;
  TensorPtr wv;

  static TimeCycleAttention init(Index d, Rng& rng);
};

// Scaled dot-product attention over the denoised time embeddings:
// softmax over (q_a Wq)(q~_j Wk)^T / sqrt(d), output sum alpha_j (q~_j Wv).
// valid[i]==false removes position i from the softmax; filtered-but-valid
// positions stay in with zero key/value rows.
TensorPtr time_cycle_attention(const TimeCycleAttention& att, const TensorPtr& q_a,
                               const TensorPtr& q_tilde, const std::vector<bool>& valid);

// Target attention of the user interest module: plain scaled dot-product
// between the target representation and the behavior representations, no
// learned projections.
TensorPtr interest_attention(const TensorPtr& r_a, const TensorPtr& r,
                             const std::vector<bool>& valid);

}  // namespace dicycle
