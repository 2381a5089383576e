#include "dicycle/attention.hpp"

#include <cmath>

namespace dicycle {

GateResult gated_weights(const Eigen::VectorXd& target_embedding,
                         const Eigen::MatrixXd& behavior_embeddings, double delta_thred) {
  if (delta_thred < 0.0 || delta_thred > 1.0) {
    throw ConfigError("gated_weights: delta_thred must be in [0, 1], got " +
                      std::to_string(delta_thred));
  }
  if (behavior_embeddings.cols() != target_embedding.size()) {
    throw DimensionError("gated_weights: behaviors have dimension " +
                         std::to_string(behavior_embeddings.cols()) + ", target has " +
                         std::to_string(target_embedding.size()));
  }
  GateResult res;
  res.weights.resize(behavior_embeddings.rows());
  const double target_norm = target_embedding.norm();
  for (Eigen::Index k = 0; k < behavior_embeddings.rows(); ++k) {
    const double row_norm = behavior_embeddings.row(k).norm();
    double sim;
    if (target_norm == 0.0 || row_norm == 0.0) {
      sim = 0.5;
      res.zero_norm_count += 1;
    } else {
      const double c = target_embedding.dot(behavior_embeddings.row(k)) / (target_norm * row_norm);
      sim = (1.0 + c) / 2.0;
    }
    res.weights[k] = sim >= delta_thred ? sim : 0.0;
  }
  return res;
}

TensorPtr apply_filter(const Eigen::VectorXd& weights, const TensorPtr& q) {
  if (q->rank() != 2 || q->shape[0] != weights.size()) {
    throw DimensionError("apply_filter: " + std::to_string(weights.size()) +
                         " weights for time embeddings of shape " + shape_str(q->shape));
  }
  return row_scale(q, weights);
}

TimeCycleAttention TimeCycleAttention::init(Index d, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  return TimeCycleAttention{Tensor::random_uniform({d, d}, bound, rng, true),
                            Tensor::random_uniform({d, d}, bound, rng, true),
                            Tensor::random_uniform({d, d}, bound, rng, true)};
}

TensorPtr time_cycle_attention(const TimeCycleAttention& att, const TensorPtr& q_a,
                               const TensorPtr& q_tilde, const std::vector<bool>& valid) {
  const Index d = att.wq->shape[0];
  if (q_a->rank() != 1 || q_a->shape[0] != d || q_tilde->rank() != 2 || q_tilde->shape[1] != d) {
    throw DimensionError("time_cycle_attention: incompatible shapes " + shape_str(q_a->shape) +
                         " / " + shape_str(q_tilde->shape));
  }
  auto query = matmul(reshape(q_a, {1, d}), att.wq);           // 1 x d
  auto keys = matmul(q_tilde, att.wk);                         // l x d
  auto logits = reshape(matmul(keys, reshape(query, {d, 1})), {q_tilde->shape[0]});
  auto alpha = softmax_masked(scale(logits, 1.0 / std::sqrt(static_cast<double>(d))), valid);
  auto values = matmul(q_tilde, att.wv);                       // l x d
  return weighted_sum_rows(alpha, values);
}

TensorPtr interest_attention(const TensorPtr& r_a, const TensorPtr& r,
                             const std::vector<bool>& valid) {
  if (r_a->rank() != 1 || r->rank() != 2 || r->shape[1] != r_a->shape[0]) {
    throw DimensionError("interest_attention: incompatible shapes " + shape_str(r_a->shape) +
                         " / " + shape_str(r->shape));
  }
  const Index d = r_a->shape[0];
  auto logits = reshape(matmul(r, reshape(r_a, {d, 1})), {r->shape[0]});
  auto alpha = softmax_masked(scale(logits, 1.0 / std::sqrt(static_cast<double>(d))), valid);
  return weighted_sum_rows(alpha, r);
}

}  // namespace dicycle
