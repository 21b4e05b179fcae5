#include "isilab/tensor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "isilab/errors.hpp"
#include "isilab/kernels.hpp"

namespace isilab {

double Tensor::scalar() const {
  if (!node || node->numel() != 1) throw ShapeMismatch("scalar() needs a one-element tensor");
  return node->values[0];
}

Tensor make_tensor(std::vector<std::int64_t> shape, std::vector<double> values,
                   bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  std::int64_t n = 1;
  for (auto d : node->shape) {
    if (d <= 0) throw ShapeMismatch("tensor dimensions must be positive");
    n *= d;
  }
  if (n != static_cast<std::int64_t>(node->values.size()))
    throw ShapeMismatch("value count does not match the tensor shape");
  return Tensor(node);
}

Tensor make_zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return make_tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                     requires_grad);
}

Tensor make_op(const char* op, std::vector<std::int64_t> shape, std::vector<double> values,
               std::vector<Tensor> parents, std::function<void(TensorNode&)> backward_fn) {
  bool needs_grad = false;
  for (const auto& p : parents) needs_grad = needs_grad || p.node->requires_grad;
  Tensor t = make_tensor(std::move(shape), std::move(values), needs_grad);
  t.node->op = op;
  if (needs_grad) {
    t.node->parents.reserve(parents.size());
    for (auto& p : parents) t.node->parents.push_back(p.node);
    t.node->backward_fn = std::move(backward_fn);
  }
  return t;
}

namespace {

// iterative post-order over the graph; flags cycles defensively
std::vector<TensorNode*> topo_order(TensorNode* root) {
  std::vector<TensorNode*> order;
  std::unordered_map<TensorNode*, int> state;  // 0 new, 1 open, 2 done
  std::vector<std::pair<TensorNode*, std::size_t>> stack{{root, 0}};
  state[root] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      const int s = state[parent];
      if (s == 1) throw GraphCycle("computation graph contains a cycle");
      if (s == 0) {
        state[parent] = 1;
        stack.emplace_back(parent, 0);
      }
    } else {
      state[node] = 2;
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; reverse for backprop
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeMismatch("backward expects a scalar loss tensor");
  auto order = topo_order(loss.node.get());
  // leaf gradients accumulate across calls; interior nodes carry only the
  // current pass, else a second call would compound its own upstream values
  for (TensorNode* node : order)
    if (!node->parents.empty() && !node->grad.empty())
      std::fill(node->grad.begin(), node->grad.end(), 0.0);
  loss.node->ensure_grad();
  loss.node->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (!node->requires_grad || node->parents.empty()) continue;
    if (!node->backward_fn)
      throw UnsupportedOp(std::string("no backward rule for op '") + node->op + "'");
    node->ensure_grad();
    node->backward_fn(*node);
  }
}

void visit_graph(const Tensor& t, const std::function<void(const TensorNode&)>& fn) {
  if (!t.defined()) return;
  std::unordered_set<const TensorNode*> seen;
  std::vector<const TensorNode*> stack{t.node.get()};
  seen.insert(t.node.get());
  while (!stack.empty()) {
    const TensorNode* node = stack.back();
    stack.pop_back();
    fn(*node);
    for (const auto& p : node->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatch(std::string(op) + " requires identical shapes");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto pa = a.node, pb = b.node;
  return make_op("add", a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode& self) {
    for (auto* p : {pa.get(), pb.get()}) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto pa = a.node, pb = b.node;
  return make_op("sub", a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto pa = a.node, pb = b.node;
  return make_op("mul", a.shape(), std::move(out), {a, b}, [pa, pb](TensorNode& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i] * pb->values[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] += self.grad[i] * pa->values[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.values()[i];
  auto pa = a.node;
  return make_op("scale", a.shape(), std::move(out), {a}, [pa, c](TensorNode& self) {
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += c * self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  auto pa = a.node;
  return make_op("relu", a.shape(), std::move(out), {a}, [pa](TensorNode& self) {
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa->values[i] > 0.0) pa->grad[i] += self.grad[i];
  });
}

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) throw ShapeMismatch(std::string(op) + " requires rank-2 tensors");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) throw ShapeMismatch("matmul inner dimensions disagree");
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  kernels::gemm_nn(m, n, k, a.values().data(), b.values().data(), out.data());
  auto pa = a.node, pb = b.node;
  return make_op("matmul", {m, n}, std::move(out), {a, b},
                 [pa, pb, m, n, k](TensorNode& self) {
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     kernels::gemm_nt(m, k, n, self.grad.data(), pb->values.data(),
                                      pa->grad.data());
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     kernels::gemm_tn(k, n, m, pa->values.data(), self.grad.data(),
                                      pb->grad.data());
                   }
                 });
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const auto k = a.shape()[0], m = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) throw ShapeMismatch("matmul_tn leading dimensions disagree");
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  kernels::gemm_tn(m, n, k, a.values().data(), b.values().data(), out.data());
  auto pa = a.node, pb = b.node;
  return make_op("matmul_tn", {m, n}, std::move(out), {a, b},
                 [pa, pb, m, n, k](TensorNode& self) {
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     kernels::gemm_nt(k, m, n, pb->values.data(), self.grad.data(),
                                      pa->grad.data());
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     kernels::gemm_nn(k, n, m, pa->values.data(), self.grad.data(),
                                      pb->grad.data());
                   }
                 });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) throw ShapeMismatch("matmul_nt trailing dimensions disagree");
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  kernels::gemm_nt(m, n, k, a.values().data(), b.values().data(), out.data());
  auto pa = a.node, pb = b.node;
  return make_op("matmul_nt", {m, n}, std::move(out), {a, b},
                 [pa, pb, m, n, k](TensorNode& self) {
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     kernels::gemm_nn(m, k, n, self.grad.data(), pb->values.data(),
                                      pa->grad.data());
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     kernels::gemm_tn(n, k, m, self.grad.data(), pa->values.data(),
                                      pb->grad.data());
                   }
                 });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  if (bias.shape().size() != 1 || bias.shape()[0] != x.shape()[1])
    throw ShapeMismatch("bias length must equal the column count");
  const auto n = x.shape()[0], k = x.shape()[1];
  std::vector<double> out(x.values().size());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < k; ++j)
      out[static_cast<std::size_t>(i * k + j)] =
          x.values()[static_cast<std::size_t>(i * k + j)] + bias.values()[static_cast<std::size_t>(j)];
  auto px = x.node, pb = bias.node;
  return make_op("add_bias", x.shape(), std::move(out), {x, bias},
                 [px, pb, n, k](TensorNode& self) {
                   if (px->requires_grad) {
                     px->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       px->grad[i] += self.grad[i];
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i)
                       for (std::int64_t j = 0; j < k; ++j)
                         pb->grad[static_cast<std::size_t>(j)] +=
                             self.grad[static_cast<std::size_t>(i * k + j)];
                   }
                 });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_matrix(a, "concat_rows");
  require_matrix(b, "concat_rows");
  if (a.shape()[1] != b.shape()[1])
    throw ShapeMismatch("concat_rows requires equal column counts");
  const auto na = a.shape()[0], nb = b.shape()[0], k = a.shape()[1];
  std::vector<double> out;
  out.reserve(a.values().size() + b.values().size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  auto pa = a.node, pb = b.node;
  return make_op("concat_rows", {na + nb, k}, std::move(out), {a, b},
                 [pa, pb, na, k](TensorNode& self) {
                   const std::size_t split = static_cast<std::size_t>(na * k);
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     for (std::size_t i = 0; i < split; ++i) pa->grad[i] += self.grad[i];
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     for (std::size_t i = split; i < self.grad.size(); ++i)
                       pb->grad[i - split] += self.grad[i];
                   }
                 });
}

Tensor reshape(const Tensor& a, std::vector<std::int64_t> shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  if (n != a.numel()) throw ShapeMismatch("reshape must preserve the element count");
  auto pa = a.node;
  return make_op("reshape", std::move(shape), a.values(), {a}, [pa](TensorNode& self) {
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto pa = a.node;
  return make_op("sum_all", {1}, {s}, {a}, [pa](TensorNode& self) {
    pa->ensure_grad();
    for (auto& g : pa->grad) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.values().size());
  auto pa = a.node;
  return make_op("mean_all", {1}, {s * inv}, {a}, [pa, inv](TensorNode& self) {
    pa->ensure_grad();
    for (auto& g : pa->grad) g += self.grad[0] * inv;
  });
}

}  // namespace isilab
