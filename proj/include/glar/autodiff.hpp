#pragma once

#include <functional>
#include <span>
#include <vector>

#include "glar/tensor.hpp"

namespace glar::ad {

enum class OpKind {
  leaf,
  add,
  sub,
  mul,
  div,
  neg,
  abs,
  tanh,
  sigmoid,
  relu,
  log,
  softplus,
  scale,
  matmul,
  transpose,
  concat_rows,
  concat_cols,
  slice_rows,
  reshape,
  sum,
  solve_spd,
  detach,
};

class Tape;

// Lightweight handle to a node on a Tape.
class Value {
 public:
  Value() = default;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  const Tensor& tensor() const;
  const std::vector<int>& shape() const;
  bool requires_grad() const;
  double scalar() const { return tensor().scalar_value(); }

 private:
  friend class Tape;
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Define-by-run reverse-mode tape. Nodes are appended in topological order;
// backward() is a single reverse sweep seeding the loss adjoint with 1.
// One tape per training task; rebuilt every step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value constant(Tensor t);
  Value param(Tensor t);

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value div(Value a, Value b);
  Value neg(Value a);
  Value abs(Value a);
  Value tanh(Value a);
  Value sigmoid(Value a);
  Value relu(Value a);
  Value log(Value a);
  Value softplus(Value a);
  Value scale(Value a, double c);

  Value matmul(Value a, Value b);
  Value transpose(Value a);
  Value concat_rows(std::span<const Value> parts);
  Value concat_cols(std::span<const Value> parts);
  Value slice_rows(Value a, int row0, int nrows);
  Value reshape(Value a, std::vector<int> shape);
  Value sum(Value a);

  // Solves A x = b for symmetric positive definite A via Cholesky. A is
  // used as (A + A^T)/2; asymmetry beyond sym_tol (relative) is an error.
  // Adjoints: b_bar = A^-1 g, A_bar = -sym(b_bar x^T).
  Value solve_spd(Value a, Value b, double sym_tol = 1e-10);

  // Stop-gradient: same value, no parents.
  Value detach(Value a);

  void backward(Value loss);
  bool has_adjoint(Value v) const;
  const Tensor& adjoint(Value v) const;
  // Adjoint if present, else zeros of the node's shape.
  Tensor adjoint_or_zero(Value v) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  int count_ops(OpKind kind) const;
  OpKind op_kind(Value v) const;
  std::vector<int> parent_ids(Value v) const;
  const Tensor& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

 private:
  friend class Value;
  using PullFn = std::function<void(Tape&, const Tensor&)>;

  struct Node {
    OpKind kind;
    Tensor value;
    bool requires_grad = false;
    std::vector<int> parents;
    PullFn pull;  // accumulates this node's adjoint into its parents
  };

  Value push(OpKind kind, Tensor value, std::vector<int> parents, PullFn pull);
  void accumulate(int id, const Tensor& contribution);
  // Accumulate `contribution` shaped like `src` into parent `id`, reducing to
  // a scalar by summation when the parent is scalar-broadcast.
  void accumulate_broadcast(int id, const Tensor& contribution);
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Value elementwise_binary(OpKind kind, Value a, Value b);
  Value elementwise_unary(OpKind kind, Value a);

  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;  // parallel to nodes_; empty shape = unset
};

// Max over coordinates of |autodiff - central difference| / (|central difference| + 1e-8)
// for the scalar function built by `f` from a parameter vector.
double grad_check(const std::function<Value(Tape&, Value)>& f, const Tensor& theta, double eps);

}  // namespace glar::ad
