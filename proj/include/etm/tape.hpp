#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "etm/tensor.hpp"

namespace etm {

// Reverse-mode gradient tape over Tensor values. Ops append nodes in
// evaluation order; backward() walks the node list in reverse, so the
// traversal is topological by construction and deterministic for a
// fixed tape. Every op checks its output for NaN/Inf and throws
// NonFinite.
class Tape {
public:
  struct Var {
    std::size_t idx = static_cast<std::size_t>(-1);
  };

  explicit Tape(int threads = 1) : threads_(threads) {}

  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.idx].value; }

  // --- elementwise / structural ops ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_const(Var a, double c);
  Var log(Var a);
  // log(max(x, floor)); zero gradient where the floor binds.
  Var log_clamped(Var a, double floor);
  Var exp(Var a);
  Var relu(Var a);

  // --- linear algebra ---
  Var matmul(Var a, Var b);
  // matrix (r x c) plus a length-c vector added to every row.
  Var add_rowvec(Var m, Var v);
  Var affine(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

  // --- reductions ---
  Var sum(Var a);
  Var mean(Var a);
  // sum(a * w) with constant weights w.
  Var weighted_sum(Var a, Tensor w);
  // sum over rows n of a[n, cols[n]].
  Var gather_rows_sum(Var a, std::vector<std::size_t> cols);

  // --- probabilistic building blocks ---
  // Row-wise softmax with max subtraction. Rank-1 input is one row.
  Var softmax(Var a);
  Var log_softmax(Var a);
  // 0.5 * sum_k(exp(lv) + mu^2 - 1 - lv) per row; scalar output for
  // rank-1 inputs, length-B vector for (B x K) inputs.
  Var gaussian_kl_diag(Var mu, Var log_var);
  // mu + exp(0.5 * lv) * eps with constant eps.
  Var reparam_sample(Var mu, Var log_var, Tensor eps);

  struct GradResult {
    std::vector<Tensor> grads;   // one per requested param, same shapes
    std::vector<bool> reached;   // false => gradient defined as zero
  };

  // Gradients of a scalar loss w.r.t. the given leaves. Parameters the
  // loss does not depend on get a zero gradient and reached = false.
  GradResult backward(Var loss, std::span<const Var> params);

  std::size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    // Accumulates into parent grads given this node's upstream grad.
    std::function<void(const Tensor& g, Tape& t)> back;
  };

  Var push(Tensor value, std::function<void(const Tensor&, Tape&)> back, const char* op);
  void accum(std::size_t idx, const Tensor& g);
  Tensor& grad_slot(std::size_t idx);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  int threads_ = 1;
};

}  // namespace etm
