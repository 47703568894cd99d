#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "commkit/rng.hpp"
#include "commkit/sparse.hpp"
#include "commkit/tensor.hpp"

namespace commkit::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool defined() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
};

// Reverse-mode tape. Rebuilt on every forward pass (define-by-run); nodes
// hold values and backward closures, gradients are allocated lazily.
class Tape {
public:
  Var leaf(Tensor value, bool requires_grad = false);

  // Runs reverse accumulation from a 1x1 output node.
  void backward(Var scalar_out);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward() wrt node v; zeros if v never received one.
  Tensor grad_value(Var v) const;

  using BackwardFn = std::function<void(Tape&, int self)>;
  Var emit(Tensor value, const std::vector<int>& parents, BackwardFn back);
  Tensor& grad_buf(int id);  // allocates zeros on first touch
  bool grad_defined(int id) const { return !nodes_[id].grad.empty(); }
  const Tensor& grad_ref(int id) const { return nodes_[id].grad; }

private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until needed
    bool requires_grad = false;
    BackwardFn back;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var spmm(const SparseMatrix& s, Var d);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var divide(Var a, Var b);
Var add_rowvec(Var a, Var row);       // broadcast a 1xC row over all rows of a
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var relu(Var a);
Var leaky_relu(Var a, double negative_slope);
Var sigmoid(Var a);
Var softplus(Var a);                  // ln(1 + e^x), stable both tails
Var sqrt_elem(Var a);                 // derivative at 0 taken as 0
Var gather_rows(Var a, std::vector<std::uint32_t> idx);
Var segment_sum(Var a, std::vector<std::size_t> seg_ptr);
Var segment_softmax(Var logits, std::vector<std::size_t> seg_ptr);  // logits Ex1
Var row_sum(Var a);                   // MxN -> Mx1
Var mul_rowscalar(Var a, Var s);      // scale row i of a by s(i,0)
Var concat_cols(const std::vector<Var>& parts);
Var average(const std::vector<Var>& parts);
Var row_replace(Var a, std::vector<std::uint32_t> rows, Var token);  // token 1xC
Var dropout(Var a, double rate, Rng& rng, bool training);
Var sum_all(Var a);
Var mean_all(Var a);
Var l21_colnorm_sum(Var w);           // sum of column L2 norms; zero column -> zero subgradient

double sigmoid_scalar(double x);
double softplus_scalar(double x);

// Kernels shared with non-autodiff callers.
Tensor matmul_nn(const Tensor& a, const Tensor& b);

}  // namespace commkit::ad
