#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace isilab {

// Reverse-mode autodiff over dense double tensors. A Tensor is a cheap handle
// to a graph node; operations build the graph eagerly and record a backward
// closure only when some input requires gradients.
struct TensorNode {
  std::vector<std::int64_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass needs it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
  }
};

struct Tensor {
  std::shared_ptr<TensorNode> node;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> n) : node(std::move(n)) {}

  const std::vector<std::int64_t>& shape() const { return node->shape; }
  std::vector<double>& values() { return node->values; }
  const std::vector<double>& values() const { return node->values; }
  std::vector<double>& grad() { return node->grad; }
  const std::vector<double>& grad() const { return node->grad; }
  bool requires_grad() const { return node->requires_grad; }
  std::int64_t numel() const { return node->numel(); }
  double scalar() const;  // value of a one-element tensor
  bool defined() const { return node != nullptr; }
};

Tensor make_tensor(std::vector<std::int64_t> shape, std::vector<double> values,
                   bool requires_grad = false);
Tensor make_zeros(std::vector<std::int64_t> shape, bool requires_grad = false);

// Graph-building helper for custom operations: the closure receives the new
// node and must scatter node.grad into the parents' grads.
Tensor make_op(const char* op, std::vector<std::int64_t> shape, std::vector<double> values,
               std::vector<Tensor> parents, std::function<void(TensorNode&)> backward_fn);

// Accumulates d(loss)/d(x) into every reachable node's grad; loss must hold
// exactly one element. Repeated calls accumulate.
void backward(const Tensor& loss);

// Depth-first visit of the graph rooted at t (each node once).
void visit_graph(const Tensor& t, const std::function<void(const TensorNode&)>& fn);

// elementwise; shapes must match exactly
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);

// [m,k]x[k,n], a^T b with a [k,m], and a b^T with b [n,k]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// x [n,k] plus a length-k bias broadcast over rows
Tensor add_bias(const Tensor& x, const Tensor& bias);

// stack rows of two matrices with equal column counts
Tensor concat_rows(const Tensor& a, const Tensor& b);

// same values under a new shape with identical element count
Tensor reshape(const Tensor& a, std::vector<std::int64_t> shape);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

}  // namespace isilab
