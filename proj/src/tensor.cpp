#include "dicycle/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace dicycle {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Index numel(const Shape& s) {
  Index n = 1;
  for (Index e : s) n *= e;
  return n;
}

namespace {

TensorPtr make_tensor(Shape shape) {
  struct Access : Tensor {};
  auto t = std::make_shared<Access>();
  for (Index e : shape) {
    if (e <= 0) throw DimensionError("tensor extent must be positive, got " + shape_str(shape));
  }
  t->shape = std::move(shape);
  t->data.setZero(numel(t->shape));
  return t;
}

// Result node of an op: requires_grad iff any input does. Inputs are only
// retained (and the closure installed) when a gradient can flow.
TensorPtr make_op(Shape shape, std::vector<TensorPtr> inputs) {
  auto t = make_tensor(std::move(shape));
  bool needs = false;
  for (const auto& p : inputs) needs = needs || p->requires_grad;
  t->requires_grad = needs;
  if (needs) t->parents = std::move(inputs);
  return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
  }
}

}  // namespace

TensorPtr Tensor::zeros(Shape shape, bool requires_grad) {
  auto t = make_tensor(std::move(shape));
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::full(Shape shape, double value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  t->data.setConstant(value);
  return t;
}

TensorPtr Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  if (static_cast<Index>(values.size()) != t->numel()) {
    throw DimensionError("from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(t->shape));
  }
  std::copy(values.begin(), values.end(), t->data.data());
  return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

TensorPtr Tensor::random_uniform(Shape shape, double bound, Rng& rng, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (Index i = 0; i < t->numel(); ++i) t->data[i] = rng.uniform(-bound, bound);
  return t;
}

Index Tensor::rows() const { return rank() == 1 ? 1 : shape[0]; }
Index Tensor::cols() const { return rank() == 1 ? shape[0] : shape[1]; }

MatMap Tensor::mat() {
  if (rank() > 2) throw ContractError("mat(): tensor has rank " + std::to_string(rank()));
  return MatMap(data.data(), rows(), cols());
}

ConstMatMap Tensor::mat() const {
  if (rank() > 2) throw ContractError("mat(): tensor has rank " + std::to_string(rank()));
  return ConstMatMap(data.data(), rows(), cols());
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.setZero(data.size());
}

void Tensor::zero_grad() {
  grad.setZero(data.size());
  backward_ran = false;
}

double Tensor::value() const {
  if (numel() != 1) throw ContractError("value(): tensor is not scalar, shape " + shape_str(shape));
  return data[0];
}

ComputeGraph ComputeGraph::build(const TensorPtr& root) {
  ComputeGraph g;
  std::unordered_set<const Tensor*> seen;
  // iterative post-order DFS; parents land before children
  std::vector<std::pair<Tensor*, std::size_t>> stack;
  if (seen.insert(root.get()).second) stack.emplace_back(root.get(), 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      g.order.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

BackwardStats backward(const TensorPtr& loss) {
  if (loss->numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss->shape));
  }
  if (loss->backward_ran) {
    throw ContractError("backward: already run on this node; gradients would accumulate, "
                        "reset them and rebuild the graph first");
  }
  ComputeGraph g = ComputeGraph::build(loss);
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = g.order.rbegin(); it != g.order.rend(); ++it) {
    Tensor* node = *it;
    if (node->requires_grad && node->backward_fn) {
      node->ensure_grad();
      node->backward_fn();
    }
  }
  loss->backward_ran = true;
  BackwardStats stats;
  stats.nodes_visited = g.order.size();
  return stats;
}

void zero_grad(const std::vector<TensorPtr>& params) {
  for (const auto& p : params) p->zero_grad();
}

// ---- ops -------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->shape[1] != b->shape[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a->shape) + " and " +
                         shape_str(b->shape));
  }
  auto out = make_op({a->shape[0], b->shape[1]}, {a, b});
  out->mat().noalias() = a->mat() * b->mat();
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ta = a.get();
    Tensor* tb = b.get();
    out->backward_fn = [o, ta, tb]() {
      ConstMatMap dC(o->grad.data(), o->shape[0], o->shape[1]);
      if (ta->requires_grad) {
        ta->ensure_grad();
        MatMap(ta->grad.data(), ta->shape[0], ta->shape[1]).noalias() += dC * tb->mat().transpose();
      }
      if (tb->requires_grad) {
        tb->ensure_grad();
        MatMap(tb->grad.data(), tb->shape[0], tb->shape[1]).noalias() += ta->mat().transpose() * dC;
      }
    };
  }
  return out;
}

namespace {

enum class BinKind { Add, Mul };

TensorPtr binary_elementwise(const TensorPtr& a, const TensorPtr& b, BinKind kind,
                             const char* name) {
  const bool a_scalar = a->numel() == 1;
  const bool b_scalar = b->numel() == 1;
  if (!a_scalar && !b_scalar) check_same_shape(*a, *b, name);
  const Shape& out_shape = a_scalar ? b->shape : a->shape;
  auto out = make_op(out_shape, {a, b});
  const auto& av = a->data;
  const auto& bv = b->data;
  if (kind == BinKind::Add) {
    if (a_scalar && !b_scalar)
      out->data = av[0] + bv;
    else if (b_scalar && !a_scalar)
      out->data = av + bv[0];
    else
      out->data = av + bv;
  } else {
    if (a_scalar && !b_scalar)
      out->data = av[0] * bv;
    else if (b_scalar && !a_scalar)
      out->data = av * bv[0];
    else
      out->data = av * bv;
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ta = a.get();
    Tensor* tb = b.get();
    out->backward_fn = [o, ta, tb, kind, a_scalar, b_scalar]() {
      auto push = [&](Tensor* dst, Tensor* other, bool dst_scalar, bool other_scalar) {
        if (!dst->requires_grad) return;
        dst->ensure_grad();
        Eigen::ArrayXd contrib;
        if (kind == BinKind::Add) {
          contrib = o->grad;
        } else if (other_scalar && !dst_scalar) {
          contrib = o->grad * other->data[0];
        } else {
          contrib = o->grad * other->data;
        }
        if (dst_scalar && o->numel() != 1)
          dst->grad[0] += contrib.sum();
        else
          dst->grad += contrib;
      };
      push(ta, tb, a_scalar, b_scalar);
      push(tb, ta, b_scalar, a_scalar);
    };
  }
  return out;
}

TensorPtr unary_elementwise(const TensorPtr& x, const std::function<double(double)>& f,
                            const std::function<double(double, double)>& df_by_x_and_y) {
  auto out = make_op(x->shape, {x});
  for (Index i = 0; i < x->numel(); ++i) out->data[i] = f(x->data[i]);
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    auto df = df_by_x_and_y;
    out->backward_fn = [o, tx, df]() {
      tx->ensure_grad();
      for (Index i = 0; i < tx->numel(); ++i) tx->grad[i] += df(tx->data[i], o->data[i]) * o->grad[i];
    };
  }
  return out;
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  return binary_elementwise(a, b, BinKind::Add, "add");
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  return binary_elementwise(a, b, BinKind::Mul, "mul");
}

TensorPtr scale(const TensorPtr& x, double c) {
  auto out = make_op(x->shape, {x});
  out->data = x->data * c;
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    out->backward_fn = [o, tx, c]() {
      tx->ensure_grad();
      tx->grad += o->grad * c;
    };
  }
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

TensorPtr sigmoid(const TensorPtr& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

TensorPtr cos(const TensorPtr& x) {
  return unary_elementwise(
      x, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

TensorPtr sin(const TensorPtr& x) {
  return unary_elementwise(
      x, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

TensorPtr conv1d_depthwise(const TensorPtr& x, const TensorPtr& kernel) {
  if (x->rank() != 2 || kernel->rank() != 2 || x->shape[1] != kernel->shape[1]) {
    throw DimensionError("conv1d_depthwise: incompatible shapes " + shape_str(x->shape) +
                         " and " + shape_str(kernel->shape));
  }
  const Index n = kernel->shape[0];
  if (n % 2 == 0) throw ConfigError("conv1d_depthwise: kernel size must be odd, got " + std::to_string(n));
  const Index L = x->shape[0];
  const Index d = x->shape[1];
  const Index pad = (n - 1) / 2;
  auto out = make_op({L, d}, {x, kernel});
  auto X = x->mat();
  auto K = kernel->mat();
  auto O = out->mat();
  for (Index i = 0; i < L; ++i) {
    for (Index c = 0; c < d; ++c) {
      double s = 0.0;
      for (Index a = 0; a < n; ++a) {
        const Index r = i + a - pad;
        if (r >= 0 && r < L) s += X(r, c) * K(a, c);
      }
      O(i, c) = s;
    }
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    Tensor* tk = kernel.get();
    out->backward_fn = [o, tx, tk, L, d, n, pad]() {
      ConstMatMap dO(o->grad.data(), L, d);
      const bool want_x = tx->requires_grad;
      const bool want_k = tk->requires_grad;
      if (want_x) tx->ensure_grad();
      if (want_k) tk->ensure_grad();
      auto X = tx->mat();
      auto K = tk->mat();
      for (Index i = 0; i < L; ++i) {
        for (Index c = 0; c < d; ++c) {
          const double g = dO(i, c);
          if (g == 0.0) continue;
          for (Index a = 0; a < n; ++a) {
            const Index r = i + a - pad;
            if (r < 0 || r >= L) continue;
            if (want_x) tx->grad[r * d + c] += K(a, c) * g;
            if (want_k) tk->grad[a * d + c] += X(r, c) * g;
          }
        }
      }
    };
  }
  return out;
}

TensorPtr maxpool_over_length(const TensorPtr& x) {
  if (x->rank() != 2 || x->shape[0] < 1) {
    throw DimensionError("maxpool_over_length: need a non-empty L x d input, got " +
                         shape_str(x->shape));
  }
  const Index L = x->shape[0];
  const Index d = x->shape[1];
  auto out = make_op({d}, {x});
  auto X = x->mat();
  std::vector<Index> argmax(static_cast<std::size_t>(d), 0);
  for (Index c = 0; c < d; ++c) {
    Index best = 0;
    for (Index r = 1; r < L; ++r) {
      if (X(r, c) > X(best, c)) best = r;  // ties keep the first row
    }
    argmax[static_cast<std::size_t>(c)] = best;
    out->data[c] = X(best, c);
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    out->backward_fn = [o, tx, d, argmax = std::move(argmax)]() {
      tx->ensure_grad();
      MatMap dX(tx->grad.data(), tx->shape[0], d);
      for (Index c = 0; c < d; ++c) dX(argmax[static_cast<std::size_t>(c)], c) += o->grad[c];
    };
  }
  return out;
}

TensorPtr softmax_masked(const TensorPtr& logits, const std::vector<bool>& valid) {
  if (logits->rank() != 1) {
    throw DimensionError("softmax_masked: logits must be rank-1, got " + shape_str(logits->shape));
  }
  const Index L = logits->shape[0];
  if (static_cast<Index>(valid.size()) != L) {
    throw DimensionError("softmax_masked: mask length " + std::to_string(valid.size()) +
                         " vs logits length " + std::to_string(L));
  }
  double m = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < L; ++i) {
    if (valid[static_cast<std::size_t>(i)]) m = std::max(m, logits->data[i]);
  }
  if (!std::isfinite(m)) throw DegenerateInputError("softmax_masked: all positions masked");
  auto out = make_op({L}, {logits});
  double denom = 0.0;
  for (Index i = 0; i < L; ++i) {
    if (valid[static_cast<std::size_t>(i)]) {
      out->data[i] = std::exp(logits->data[i] - m);
      denom += out->data[i];
    } else {
      out->data[i] = 0.0;
    }
  }
  out->data /= denom;
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tl = logits.get();
    out->backward_fn = [o, tl, valid, L]() {
      tl->ensure_grad();
      double dot = 0.0;
      for (Index i = 0; i < L; ++i) dot += o->grad[i] * o->data[i];
      for (Index i = 0; i < L; ++i) {
        if (valid[static_cast<std::size_t>(i)]) tl->grad[i] += o->data[i] * (o->grad[i] - dot);
      }
    };
  }
  return out;
}

TensorPtr gather_rows(const TensorPtr& table, const std::vector<Index>& rows) {
  if (table->rank() != 2) {
    throw DimensionError("gather_rows: table must be rank-2, got " + shape_str(table->shape));
  }
  const Index R = table->shape[0];
  const Index d = table->shape[1];
  for (Index r : rows) {
    if (r < 0 || r >= R) {
      throw DataError("gather_rows: row " + std::to_string(r) + " out of range [0, " +
                      std::to_string(R) + ")");
    }
  }
  auto out = make_op({static_cast<Index>(rows.size()), d}, {table});
  auto T = table->mat();
  auto O = out->mat();
  for (std::size_t i = 0; i < rows.size(); ++i) O.row(static_cast<Index>(i)) = T.row(rows[i]);
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tt = table.get();
    out->backward_fn = [o, tt, rows, d]() {
      tt->ensure_grad();
      ConstMatMap dO(o->grad.data(), o->shape[0], d);
      MatMap dT(tt->grad.data(), tt->shape[0], d);
      for (std::size_t i = 0; i < rows.size(); ++i) dT.row(rows[i]) += dO.row(static_cast<Index>(i));
    };
  }
  return out;
}

TensorPtr row_scale(const TensorPtr& x, const Eigen::VectorXd& factors) {
  if (x->rank() != 2 || x->shape[0] != factors.size()) {
    throw DimensionError("row_scale: " + std::to_string(factors.size()) + " factors for shape " +
                         shape_str(x->shape));
  }
  auto out = make_op(x->shape, {x});
  out->mat() = factors.asDiagonal() * x->mat();
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    out->backward_fn = [o, tx, factors]() {
      tx->ensure_grad();
      MatMap(tx->grad.data(), tx->shape[0], tx->shape[1]).noalias() +=
          factors.asDiagonal() * ConstMatMap(o->grad.data(), o->shape[0], o->shape[1]);
    };
  }
  return out;
}

TensorPtr interleave_cols(const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2) {
    throw DimensionError("interleave_cols: need rank-2 inputs");
  }
  check_same_shape(*a, *b, "interleave_cols");
  const Index L = a->shape[0];
  const Index m = a->shape[1];
  auto out = make_op({L, 2 * m}, {a, b});
  auto A = a->mat();
  auto B = b->mat();
  auto O = out->mat();
  for (Index c = 0; c < m; ++c) {
    O.col(2 * c) = A.col(c);
    O.col(2 * c + 1) = B.col(c);
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ta = a.get();
    Tensor* tb = b.get();
    out->backward_fn = [o, ta, tb, L, m]() {
      ConstMatMap dO(o->grad.data(), L, 2 * m);
      if (ta->requires_grad) {
        ta->ensure_grad();
        MatMap dA(ta->grad.data(), L, m);
        for (Index c = 0; c < m; ++c) dA.col(c) += dO.col(2 * c);
      }
      if (tb->requires_grad) {
        tb->ensure_grad();
        MatMap dB(tb->grad.data(), L, m);
        for (Index c = 0; c < m; ++c) dB.col(c) += dO.col(2 * c + 1);
      }
    };
  }
  return out;
}

TensorPtr concat1d(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw DimensionError("concat1d: no inputs");
  Index total = 0;
  for (const auto& p : parts) {
    if (p->rank() != 1) throw DimensionError("concat1d: all inputs must be rank-1");
    total += p->shape[0];
  }
  auto out = make_op({total}, parts);
  Index off = 0;
  for (const auto& p : parts) {
    out->data.segment(off, p->shape[0]) = p->data;
    off += p->shape[0];
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    std::vector<Tensor*> raw;
    raw.reserve(parts.size());
    for (const auto& p : parts) raw.push_back(p.get());
    out->backward_fn = [o, raw]() {
      Index off = 0;
      for (Tensor* p : raw) {
        if (p->requires_grad) {
          p->ensure_grad();
          p->grad += o->grad.segment(off, p->shape[0]);
        }
        off += p->shape[0];
      }
    };
  }
  return out;
}

TensorPtr stack_rows(const std::vector<TensorPtr>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const Index d = rows.front()->shape.empty() ? 0 : rows.front()->shape[0];
  for (const auto& r : rows) {
    if (r->rank() != 1 || r->shape[0] != d) {
      throw DimensionError("stack_rows: all inputs must be rank-1 of equal length");
    }
  }
  auto out = make_op({static_cast<Index>(rows.size()), d}, rows);
  auto O = out->mat();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    O.row(static_cast<Index>(i)) = rows[i]->data.matrix().transpose();
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    std::vector<Tensor*> raw;
    raw.reserve(rows.size());
    for (const auto& r : rows) raw.push_back(r.get());
    out->backward_fn = [o, raw, d]() {
      ConstMatMap dO(o->grad.data(), o->shape[0], d);
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i]->requires_grad) {
          raw[i]->ensure_grad();
          raw[i]->grad += dO.row(static_cast<Index>(i)).transpose().array();
        }
      }
    };
  }
  return out;
}

TensorPtr sum_rows(const TensorPtr& x) {
  if (x->rank() != 2) throw DimensionError("sum_rows: need rank-2 input, got " + shape_str(x->shape));
  const Index d = x->shape[1];
  auto out = make_op({d}, {x});
  out->data = x->mat().colwise().sum().transpose().array();
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    out->backward_fn = [o, tx, d]() {
      tx->ensure_grad();
      MatMap dX(tx->grad.data(), tx->shape[0], d);
      dX.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(o->grad.data(), d);
    };
  }
  return out;
}

TensorPtr weighted_sum_rows(const TensorPtr& alpha, const TensorPtr& x) {
  if (alpha->rank() != 1 || x->rank() != 2 || alpha->shape[0] != x->shape[0]) {
    throw DimensionError("weighted_sum_rows: incompatible shapes " + shape_str(alpha->shape) +
                         " and " + shape_str(x->shape));
  }
  const Index L = x->shape[0];
  const Index d = x->shape[1];
  auto out = make_op({d}, {alpha, x});
  auto X = x->mat();
  for (Index k = 0; k < L; ++k) {
    const double w = alpha->data[k];
    if (w == 0.0) continue;
    for (Index c = 0; c < d; ++c) out->data[c] += w * X(k, c);
  }
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* ta = alpha.get();
    Tensor* tx = x.get();
    out->backward_fn = [o, ta, tx, L, d]() {
      auto X = tx->mat();
      if (ta->requires_grad) {
        ta->ensure_grad();
        for (Index k = 0; k < L; ++k) {
          double s = 0.0;
          for (Index c = 0; c < d; ++c) s += o->grad[c] * X(k, c);
          ta->grad[k] += s;
        }
      }
      if (tx->requires_grad) {
        tx->ensure_grad();
        for (Index k = 0; k < L; ++k) {
          const double w = ta->data[k];
          if (w == 0.0) continue;
          for (Index c = 0; c < d; ++c) tx->grad[k * d + c] += w * o->grad[c];
        }
      }
    };
  }
  return out;
}

TensorPtr reshape(const TensorPtr& x, Shape new_shape) {
  if (numel(new_shape) != x->numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x->shape) + " as " +
                         shape_str(new_shape));
  }
  auto out = make_op(std::move(new_shape), {x});
  out->data = x->data;
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tx = x.get();
    out->backward_fn = [o, tx]() {
      tx->ensure_grad();
      tx->grad += o->grad;
    };
  }
  return out;
}

TensorPtr bce_loss_sum(const TensorPtr& probs, const std::vector<double>& labels, double eps) {
  if (probs->rank() != 1 || static_cast<Index>(labels.size()) != probs->shape[0]) {
    throw DimensionError("bce_loss_sum: " + std::to_string(labels.size()) +
                         " labels for probabilities of shape " + shape_str(probs->shape));
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw DataError("bce_loss_sum: label must be 0 or 1, got " + std::to_string(y));
  }
  const Index n = probs->shape[0];
  auto out = make_op({1}, {probs});
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = std::clamp(probs->data[i], eps, 1.0 - eps);
    const double y = labels[static_cast<std::size_t>(i)];
    loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  out->data[0] = loss;
  if (out->requires_grad) {
    Tensor* o = out.get();
    Tensor* tp = probs.get();
    out->backward_fn = [o, tp, labels, eps, n]() {
      tp->ensure_grad();
      for (Index i = 0; i < n; ++i) {
        const double p = tp->data[i];
        if (p <= eps || p >= 1.0 - eps) continue;  // clamped region is flat
        const double y = labels[static_cast<std::size_t>(i)];
        tp->grad[i] += (-y / p + (1.0 - y) / (1.0 - p)) * o->grad[0];
      }
    };
  }
  return out;
}

}  // namespace dicycle
