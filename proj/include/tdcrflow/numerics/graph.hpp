#pragma once

// Tape-based reverse-mode differentiation over rank-2 tensors.
//
// A Graph records every operation as a node in creation order, which is
// already a topological order. backward() walks the tape in reverse and
// accumulates gradients into differentiable leaves and into the grad tensor
// of every live Parameter that took part. A Graph is single-use: build,
// backward once, discard.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "tdcrflow/numerics/parameter.hpp"
#include "tdcrflow/numerics/tensor.hpp"

namespace tdcr::num {

class Graph;

class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Graph* graph() const { return graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  using BackwardFn =
      std::function<void(Graph&, const Tensor& out_value, const Tensor& out_grad)>;

  // With tracking off no gradient state is kept and backward() is illegal;
  // used for inference.
  explicit Graph(bool track_gradients = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  Var variable(Tensor t);
  Var parameter(Parameter& p, Weights which = Weights::live);
  // Read-only use: allowed for EMA weights or on a graph without tracking.
  Var parameter(const Parameter& p, Weights which);

  // Seeds d(loss)/d(loss) = 1 and propagates. Returns the loss value.
  double backward(Var loss);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  // Gradient of a differentiable node after backward(); zeros if untouched.
  const Tensor& grad(Var v);

  bool tracking() const { return tracking_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Op implementation interface.
  Var push(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var push(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  bool needs_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var add_node(Node node);

  std::vector<Node> nodes_;
  bool tracking_;
  bool consumed_ = false;
};

// ---- primitives --------------------------------------------------------

Var matmul(Var a, Var b);                 // [n x k] * [k x m]
Var add(Var a, Var b);                    // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                    // elementwise
Var add_row(Var a, Var bias);             // [n x m] + broadcast [1 x m]
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var scale_rows(Var a, std::span<const double> s);  // row i times constant s[i]
Var layer_norm(Var a, double eps);        // per row, no affine
Var sigmoid(Var a);
Var silu(Var a);
Var relu(Var a);
Var square(Var a);
Var sum(Var a);                           // -> [1 x 1]
Var mean(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

// out[r] = a[index[r]]. Backward scatters-adds.
Var gather_rows(Var a, std::span<const std::int32_t> index);

// out[b] = mean of rows i with bin[i] == b. Rows are accumulated in the order
// given by `order` (a permutation of row ids); pass a canonical order to make
// the result independent of input row order. Empty bins produce zeros.
Var scatter_mean(Var a, std::span<const std::int32_t> bin, std::size_t bins,
                 std::span<const std::uint32_t> order = {});

// out[r] = sum_j weight[r*K + j] * a[index[r*K + j]] with index -1 skipped.
Var weighted_gather(Var a, std::span<const std::int32_t> index, std::span<const double> weight,
                    std::size_t per_row);

// x * W + b
inline Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

}  // namespace tdcr::num
