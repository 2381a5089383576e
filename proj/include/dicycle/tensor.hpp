#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dicycle/errors.hpp"
#include "dicycle/rng.hpp"

namespace dicycle {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

// Row-major matrix view over a tensor's flat storage.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

std::string shape_str(const Shape& s);
Index numel(const Shape& s);

// Dense tensor of doubles in row-major order. Tensors double as nodes of the
// compute graph: an op's result keeps shared ownership of its inputs plus a
// closure that pushes gradients to them. Leaves have no parents.
class Tensor : public std::enable_shared_from_this<Tensor> {
 public:
  Shape shape;
  Eigen::ArrayXd data;
  bool requires_grad = false;
  Eigen::ArrayXd grad;  // empty until a gradient reaches this tensor

  std::vector<TensorPtr> parents;
  std::function<void()> backward_fn;  // null for leaves
  bool backward_ran = false;          // set on the node backward() was called on

  static TensorPtr zeros(Shape shape, bool requires_grad = false);
  static TensorPtr full(Shape shape, double value, bool requires_grad = false);
  static TensorPtr from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);
  // entries uniform in [-bound, bound]
  static TensorPtr random_uniform(Shape shape, double bound, Rng& rng, bool requires_grad = false);

  Index numel() const { return data.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }
  Index rows() const;
  Index cols() const;

  MatMap mat();
  ConstMatMap mat() const;

  void ensure_grad();  // allocate + zero if absent
  void zero_grad();

  double value() const;  // numel()==1 only

 protected:
  Tensor() = default;
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
};

// Topologically ordered view of the graph reachable from a root.
// Order is consistent with data dependencies: parents precede children.
struct ComputeGraph {
  std::vector<Tensor*> order;
  static ComputeGraph build(const TensorPtr& root);
};

// Reverse-mode sweep from a scalar loss. Each reachable requires_grad tensor
// ends up with an accumulated gradient. Calling it twice on the same node
// without resetting gradients is an error.
BackwardStats backward(const TensorPtr& loss);

void zero_grad(const std::vector<TensorPtr>& params);

// ---- ops -------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);

// Binary elementwise ops broadcast a numel()==1 operand against the other
// shape; otherwise shapes must match exactly.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);
TensorPtr relu(const TensorPtr& x);
TensorPtr sigmoid(const TensorPtr& x);
TensorPtr cos(const TensorPtr& x);
TensorPtr sin(const TensorPtr& x);

// Depthwise 1-D convolution along the length axis. x is L x d, kernel is
// n x d with n odd; zero padding of (n-1)/2 keeps the output L x d.
TensorPtr conv1d_depthwise(const TensorPtr& x, const TensorPtr& kernel);

// Column-wise max over the length axis, L x d -> d. Gradient goes to the
// first argmax row of each column.
TensorPtr maxpool_over_length(const TensorPtr& x);

// Stable masked softmax over a rank-1 logit vector. valid[i]==true means
// position i participates; masked positions get probability 0.
TensorPtr softmax_masked(const TensorPtr& logits, const std::vector<bool>& valid);

// out[r, :] = table[rows[r], :]; gradient scatters (and accumulates) back.
TensorPtr gather_rows(const TensorPtr& table, const std::vector<Index>& rows);

// Row-wise scaling by constants (no gradient into the factors).
TensorPtr row_scale(const TensorPtr& x, const Eigen::VectorXd& factors);

// [L x m], [L x m] -> [L x 2m] with columns a0 b0 a1 b1 ...
TensorPtr interleave_cols(const TensorPtr& a, const TensorPtr& b);

// Concatenate rank-1 tensors into one rank-1 tensor.
TensorPtr concat1d(const std::vector<TensorPtr>& parts);

// Stack rank-1 tensors of equal length d into a K x d matrix.
TensorPtr stack_rows(const std::vector<TensorPtr>& rows);

TensorPtr sum_rows(const TensorPtr& x);  // L x d -> d

// sum_k alpha[k] * x[k, :] with a fixed front-to-back accumulation order, so
// rows with weight exactly 0 cannot perturb the result.
TensorPtr weighted_sum_rows(const TensorPtr& alpha, const TensorPtr& x);
TensorPtr reshape(const TensorPtr& x, Shape new_shape);

// Summed binary cross-entropy over the batch; probabilities are clamped to
// [eps, 1-eps] before the logs. Labels must be 0 or 1.
TensorPtr bce_loss_sum(const TensorPtr& probs, const std::vector<double>& labels,
                       double eps = 1e-12);

}  // namespace dicycle
