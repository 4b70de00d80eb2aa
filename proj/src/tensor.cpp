#include "tvae/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <sstream>
#include <unordered_set>

#include "tvae/errors.hpp"
#include "tvae/kernels.hpp"
#include "tvae/special.hpp"

namespace tvae {

namespace detail {

struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this node's grad into its parents' grads.
  std::function<void(const Node&)> backward;
};

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::atomic<std::uint64_t> g_next_id{1};

struct MDims {
  std::size_t rows;
  std::size_t cols;
};

MDims mdims(const Shape& s) {
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, s[0]};
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) rows *= s[i];
  return {rows, s.back()};
}

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericFault(std::string(op) + ": produced a non-finite value");
    }
  }
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad, std::string name) {
  if (numel(shape) != data.size()) {
    throw ContractError("tensor: shape " + shape_str(shape) + " does not match " +
                        std::to_string(data.size()) + " values");
  }
  check_finite(data, "tensor");
  auto n = std::make_shared<Node>();
  n->id = g_next_id.fetch_add(1);
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

// Builds an op result. The backward closure is kept only when some parent
// requires a gradient.
Tensor make_result(MDims dims, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(const Node&)> backward, const char* op) {
  check_finite(value, op);
  auto n = std::make_shared<Node>();
  n->id = g_next_id.fetch_add(1);
  n->shape = {dims.rows, dims.cols};
  n->value = std::move(value);
  n->requires_grad =
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

void accumulate(Node& p, std::size_t i, double g) { p.grad[i] += g; }

// Unary elementwise op with derivative computed from (x, y).
template <class F, class D>
Tensor unary(const Tensor& a, const char* op, F f, D dfdx) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out(pa->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa->value[i]);
  return make_result(
      d, std::move(out), {pa},
      [pa, dfdx](const Node& self) {
        if (!pa->requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          accumulate(*pa, i, self.grad[i] * dfdx(pa->value[i], self.value[i]));
        }
      },
      op);
}

// Broadcast index helper for rank-2 binary ops.
struct Broadcast {
  MDims out;
  MDims a;
  MDims b;
  std::size_t ia(std::size_t r, std::size_t c) const {
    return (a.rows == 1 ? 0 : r) * a.cols + (a.cols == 1 ? 0 : c);
  }
  std::size_t ib(std::size_t r, std::size_t c) const {
    return (b.rows == 1 ? 0 : r) * b.cols + (b.cols == 1 ? 0 : c);
  }
};

Broadcast broadcast(const Shape& sa, const Shape& sb, const char* op) {
  const MDims a = mdims(sa);
  const MDims b = mdims(sb);
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ContractError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " +
                        shape_str(sb));
  };
  return Broadcast{{dim(a.rows, b.rows), dim(a.cols, b.cols)}, a, b};
}

template <class F, class GA, class GB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, GA ga, GB gb) {
  const auto& pa = a.node();
  const auto& pb = b.node();
  const Broadcast bc = broadcast(pa->shape, pb->shape, op);
  std::vector<double> out(bc.out.rows * bc.out.cols);
  for (std::size_t r = 0; r < bc.out.rows; ++r)
    for (std::size_t c = 0; c < bc.out.cols; ++c)
      out[r * bc.out.cols + c] = f(pa->value[bc.ia(r, c)], pb->value[bc.ib(r, c)]);
  return make_result(
      bc.out, std::move(out), {pa, pb},
      [pa, pb, bc, ga, gb](const Node& self) {
        for (std::size_t r = 0; r < bc.out.rows; ++r) {
          for (std::size_t c = 0; c < bc.out.cols; ++c) {
            const std::size_t o = r * bc.out.cols + c;
            const std::size_t i = bc.ia(r, c);
            const std::size_t j = bc.ib(r, c);
            const double g = self.grad[o];
            if (pa->requires_grad) accumulate(*pa, i, g * ga(pa->value[i], pb->value[j]));
            if (pb->requires_grad) accumulate(*pb, j, g * gb(pa->value[i], pb->value[j]));
          }
        }
      },
      op);
}

void require_square(const Shape& s, const char* op) {
  const MDims d = mdims(s);
  if (d.rows != d.cols) throw ContractError(std::string(op) + ": matrix must be square");
}

// Solves L x = b in place for lower-triangular L (n x n), column-strided b.
void forward_subst(const std::vector<double>& l, std::size_t n, double* b, std::size_t stride) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i * stride];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k * stride];
    b[i * stride] = s / l[i * n + i];
  }
}

// Solves L^T x = b in place.
void backward_subst_t(const std::vector<double>& l, std::size_t n, double* b,
                      std::size_t stride) {
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii * stride];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k * stride];
    b[ii * stride] = s / l[ii * n + ii];
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor() : node_(make_leaf({0, 0}, {}, false, {})) {}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), false, {}));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = tvae::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({1, 1}, {value}); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return constant({n, n}, std::move(v));
}

Tensor Tensor::variable(std::string name, Shape shape, std::vector<double> data) {
  if (name.empty()) throw ContractError("Tensor::variable: name must not be empty");
  return Tensor(make_leaf(std::move(shape), std::move(data), true, std::move(name)));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return mdims(node_->shape).rows; }
std::size_t Tensor::cols() const { return mdims(node_->shape).cols; }
std::span<const double> Tensor::data() const { return node_->value; }
std::vector<double> Tensor::to_vector() const { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("Tensor::item: tensor has " + std::to_string(numel()) + " entries");
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const MDims d = mdims(node_->shape);
  if (r >= d.rows || c >= d.cols) throw ContractError("Tensor::at: index out of range");
  return node_->value[r * d.cols + c];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
const std::string& Tensor::name() const { return node_->name; }

Tensor Tensor::detach() const { return constant(node_->shape, node_->value); }

GradResult evaluate_and_grad(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("evaluate_and_grad: loss must be scalar, got shape " +
                        shape_str(loss.shape()));
  }
  GradResult result;
  result.value = loss.item();
  const NodePtr& root = loss.node();
  if (!root->requires_grad) return result;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  // Creation order is a topological order of the recorded graph.
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  root->grad[0] = 1.0;
  for (Node* n : order) {
    if (n->backward) n->backward(*n);
  }

  std::map<std::string, Node*> by_name;
  for (Node* n : order) {
    if (n->name.empty()) continue;
    auto [it, inserted] = by_name.emplace(n->name, n);
    if (!inserted && it->second != n) {
      throw ContractError("evaluate_and_grad: variable name '" + n->name + "' used twice");
    }
  }
  for (auto& [name, n] : by_name) {
    result.grads.emplace(name, Tensor::constant(n->shape, n->grad));
  }
  for (Node* n : order) {
    if (n != root.get() && n->name.empty()) std::vector<double>().swap(n->grad);
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.data()) {
    if (y == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      a, "add_scalar", [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& pa = a.node();
  const auto& pb = b.node();
  const MDims da = mdims(pa->shape);
  const MDims db = mdims(pb->shape);
  if (da.cols != db.rows) {
    throw ContractError("matmul: inner dimensions differ: " + shape_str(pa->shape) + " x " +
                        shape_str(pb->shape));
  }
  std::vector<double> out(da.rows * db.cols);
  kernels::gemm_nn(pa->value, {da.rows, da.cols}, pb->value, {db.rows, db.cols}, out);
  return make_result(
      {da.rows, db.cols}, std::move(out), {pa, pb},
      [pa, pb, da, db](const Node& self) {
        if (pa->requires_grad) {
          std::vector<double> ga(da.rows * da.cols);
          kernels::gemm_nt(self.grad, {da.rows, db.cols}, pb->value, {db.rows, db.cols}, ga);
          for (std::size_t i = 0; i < ga.size(); ++i) pa->grad[i] += ga[i];
        }
        if (pb->requires_grad) {
          std::vector<double> gb(db.rows * db.cols);
          kernels::gemm_tn(pa->value, {da.rows, da.cols}, self.grad, {da.rows, db.cols}, gb);
          for (std::size_t i = 0; i < gb.size(); ++i) pb->grad[i] += gb[i];
        }
      },
      "matmul");
}

Tensor transpose(const Tensor& a) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out(pa->value.size());
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) out[c * d.rows + r] = pa->value[r * d.cols + c];
  return make_result(
      {d.cols, d.rows}, std::move(out), {pa},
      [pa, d](const Node& self) {
        for (std::size_t r = 0; r < d.rows; ++r)
          for (std::size_t c = 0; c < d.cols; ++c)
            pa->grad[r * d.cols + c] += self.grad[c * d.rows + r];
      },
      "transpose");
}

Tensor reshape(const Tensor& a, Shape shape) {
  const auto& pa = a.node();
  if (tvae::numel(shape) != pa->value.size()) {
    throw ContractError("reshape: cannot reshape " + shape_str(pa->shape) + " to " +
                        shape_str(shape));
  }
  Tensor t = make_result(
      mdims(shape), pa->value, {pa},
      [pa](const Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
      },
      "reshape");
  t.node()->shape = std::move(shape);
  return t;
}

Tensor exp(const Tensor& a) {
  const auto& pa = a.node();
  std::vector<double> out(pa->value.size());
  kernels::exp(pa->value, out);
  return make_result(
      mdims(pa->shape), std::move(out), {pa},
      [pa](const Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * self.value[i];
      },
      "exp");
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log: argument must be > 0, got " + std::to_string(x));
  }
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  const auto& pa = a.node();
  std::vector<double> out(pa->value.size());
  kernels::tanh(pa->value, out);
  return make_result(
      mdims(pa->shape), std::move(out), {pa},
      [pa](const Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double y = self.value[i];
          pa->grad[i] += self.grad[i] * (1.0 - y * y);
        }
      },
      "tanh");
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, "softplus",
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor lgamma(const Tensor& a) {
  return unary(
      a, "lgamma", [](double x) { return special::lgamma(x); },
      [](double x, double) { return special::digamma(x); });
}

Tensor digamma(const Tensor& a) {
  return unary(
      a, "digamma", [](double x) { return special::digamma(x); },
      [](double x, double) { return special::trigamma(x); });
}

Tensor sum(const Tensor& a) {
  const auto& pa = a.node();
  double s = 0.0;
  for (double x : pa->value) s += x;
  return make_result(
      {1, 1}, {s}, {pa},
      [pa](const Node& self) {
        for (auto& g : pa->grad) g += self.grad[0];
      },
      "sum");
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_rows(const Tensor& a) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out(d.rows, 0.0);
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) out[r] += pa->value[r * d.cols + c];
  return make_result(
      {d.rows, 1}, std::move(out), {pa},
      [pa, d](const Node& self) {
        for (std::size_t r = 0; r < d.rows; ++r)
          for (std::size_t c = 0; c < d.cols; ++c) pa->grad[r * d.cols + c] += self.grad[r];
      },
      "sum_rows");
}

Tensor sum_cols(const Tensor& a) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out(d.cols, 0.0);
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) out[c] += pa->value[r * d.cols + c];
  return make_result(
      {1, d.cols}, std::move(out), {pa},
      [pa, d](const Node& self) {
        for (std::size_t r = 0; r < d.rows; ++r)
          for (std::size_t c = 0; c < d.cols; ++c) pa->grad[r * d.cols + c] += self.grad[c];
      },
      "sum_cols");
}

Tensor softmax_rows(const Tensor& a) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out(pa->value.size());
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double* x = pa->value.data() + r * d.cols;
    double* y = out.data() + r * d.cols;
    const double m = *std::max_element(x, x + d.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) z += (y[c] = std::exp(x[c] - m));
    for (std::size_t c = 0; c < d.cols; ++c) y[c] /= z;
  }
  return make_result(
      d, std::move(out), {pa},
      [pa, d](const Node& self) {
        for (std::size_t r = 0; r < d.rows; ++r) {
          const double* y = self.value.data() + r * d.cols;
          const double* g = self.grad.data() + r * d.cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < d.cols; ++c) dot += g[c] * y[c];
          for (std::size_t c = 0; c < d.cols; ++c) pa->grad[r * d.cols + c] += y[c] * (g[c] - dot);
        }
      },
      "softmax_rows");
}

Tensor softmax(const Tensor& a) { return reshape(softmax_rows(reshape(a, {1, a.numel()})), a.shape()); }

Tensor logsumexp_rows(const Tensor& a) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out(d.rows);
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double* x = pa->value.data() + r * d.cols;
    const double m = *std::max_element(x, x + d.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < d.cols; ++c) z += std::exp(x[c] - m);
    out[r] = m + std::log(z);
  }
  return make_result(
      {d.rows, 1}, std::move(out), {pa},
      [pa, d](const Node& self) {
        for (std::size_t r = 0; r < d.rows; ++r) {
          for (std::size_t c = 0; c < d.cols; ++c) {
            const std::size_t i = r * d.cols + c;
            pa->grad[i] += self.grad[r] * std::exp(pa->value[i] - self.value[r]);
          }
        }
      },
      "logsumexp_rows");
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  if (begin > end || end > d.rows) throw ContractError("slice_rows: range out of bounds");
  std::vector<double> out(pa->value.begin() + static_cast<std::ptrdiff_t>(begin * d.cols),
                          pa->value.begin() + static_cast<std::ptrdiff_t>(end * d.cols));
  return make_result(
      {end - begin, d.cols}, std::move(out), {pa},
      [pa, begin, d](const Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[begin * d.cols + i] += self.grad[i];
      },
      "slice_rows");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ContractError("concat_cols: row counts differ");
    offsets.push_back(cols);
    cols += p.cols();
    nodes.push_back(p.node());
  }
  std::vector<double> out(rows * cols);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::size_t pc = mdims(nodes[k]->shape).cols;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pc; ++c) out[r * cols + offsets[k] + c] = nodes[k]->value[r * pc + c];
  }
  return make_result(
      {rows, cols}, std::move(out), nodes,
      [nodes, offsets, rows, cols](const Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          if (!nodes[k]->requires_grad) continue;
          const std::size_t pc = mdims(nodes[k]->shape).cols;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c)
              nodes[k]->grad[r * pc + c] += self.grad[r * cols + offsets[k] + c];
        }
      },
      "concat_cols");
}

Tensor tile_rows(const Tensor& a, std::size_t times) {
  const auto& pa = a.node();
  const MDims d = mdims(pa->shape);
  std::vector<double> out;
  out.reserve(times * pa->value.size());
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), pa->value.begin(), pa->value.end());
  return make_result(
      {times * d.rows, d.cols}, std::move(out), {pa},
      [pa, times](const Node& self) {
        const std::size_t n = pa->value.size();
        for (std::size_t t = 0; t < times; ++t)
          for (std::size_t i = 0; i < n; ++i) pa->grad[i] += self.grad[t * n + i];
      },
      "tile_rows");
}

Tensor cholesky(const Tensor& a) {
  const auto& pa = a.node();
  require_square(pa->shape, "cholesky");
  const std::size_t n = mdims(pa->shape).rows;
  const auto& av = pa->value;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::fabs(av[i * n + j] - av[j * n + i]) > 1e-12 * (1.0 + std::fabs(av[i * n + j]))) {
        throw ContractError("cholesky: matrix is not symmetric");
      }
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = av[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= l[j * n + k] * l[j * n + k];
    if (!(s > 0.0)) throw DomainError("cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(s);
    l[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = av[i * n + j];
      for (std::size_t k = 0; k < j; ++k) t -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = t / ljj;
    }
  }
  return make_result(
      {n, n}, std::move(l), {pa},
      [pa, n](const Node& self) {
        const auto& lv = self.value;
        // M = Phi(L^T G): lower triangle of L^T G with halved diagonal, mirrored.
        std::vector<double> m(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = i; k < n; ++k) s += lv[k * n + i] * self.grad[k * n + j];
            m[i * n + j] = 0.5 * s;
            m[j * n + i] = 0.5 * s;
          }
        }
        // A_bar = L^{-T} M L^{-1}
        for (std::size_t c = 0; c < n; ++c) backward_subst_t(lv, n, m.data() + c, n);
        for (std::size_t r = 0; r < n; ++r) {
          // row r of X L^{-1}: solve L^T y = x_r^T
          backward_subst_t(lv, n, m.data() + r * n, 1);
        }
        for (std::size_t i = 0; i < n * n; ++i) pa->grad[i] += m[i];
      },
      "cholesky");
}

Tensor tri_solve_lower(const Tensor& l, const Tensor& b) {
  const auto& pl = l.node();
  const auto& pb = b.node();
  require_square(pl->shape, "tri_solve_lower");
  const std::size_t n = mdims(pl->shape).rows;
  const MDims db = mdims(pb->shape);
  if (db.rows != n) throw ContractError("tri_solve_lower: right-hand side has wrong row count");
  for (std::size_t i = 0; i < n; ++i) {
    if (pl->value[i * n + i] == 0.0) throw DomainError("tri_solve_lower: singular factor");
  }
  std::vector<double> x = pb->value;
  for (std::size_t c = 0; c < db.cols; ++c) forward_subst(pl->value, n, x.data() + c, db.cols);
  return make_result(
      db, std::move(x), {pl, pb},
      [pl, pb, n, db](const Node& self) {
        // B_bar = L^{-T} X_bar ; L_bar = -tril(B_bar X^T)
        std::vector<double> gb = self.grad;
        for (std::size_t c = 0; c < db.cols; ++c) backward_subst_t(pl->value, n, gb.data() + c, db.cols);
        if (pb->requires_grad)
          for (std::size_t i = 0; i < gb.size(); ++i) pb->grad[i] += gb[i];
        if (pl->requires_grad) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
              double s = 0.0;
              for (std::size_t c = 0; c < db.cols; ++c) s += gb[i * db.cols + c] * self.value[j * db.cols + c];
              pl->grad[i * n + j] -= s;
            }
        }
      },
      "tri_solve_lower");
}

Tensor diag_part(const Tensor& a) {
  const auto& pa = a.node();
  require_square(pa->shape, "diag_part");
  const std::size_t n = mdims(pa->shape).rows;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pa->value[i * n + i];
  return make_result(
      {1, n}, std::move(out), {pa},
      [pa, n](const Node& self) {
        for (std::size_t i = 0; i < n; ++i) pa->grad[i * n + i] += self.grad[i];
      },
      "diag_part");
}

Tensor diag_embed(const Tensor& row) {
  const auto& pa = row.node();
  const std::size_t n = pa->value.size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] = pa->value[i];
  return make_result(
      {n, n}, std::move(out), {pa},
      [pa, n](const Node& self) {
        for (std::size_t i = 0; i < n; ++i) pa->grad[i] += self.grad[i * n + i];
      },
      "diag_embed");
}

Tensor unpack_strict_lower(const Tensor& packed, std::size_t n) {
  const auto& pa = packed.node();
  if (pa->value.size() != n * (n - 1) / 2 && !(n == 0 && pa->value.empty())) {
    throw ContractError("unpack_strict_lower: expected " + std::to_string(n * (n - 1) / 2) +
                        " entries, got " + std::to_string(pa->value.size()));
  }
  std::vector<double> out(n * n, 0.0);
  std::size_t p = 0;
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) out[i * n + j] = pa->value[p++];
  return make_result(
      {n, n}, std::move(out), {pa},
      [pa, n](const Node& self) {
        std::size_t q = 0;
        for (std::size_t i = 1; i < n; ++i)
          for (std::size_t j = 0; j < i; ++j) pa->grad[q++] += self.grad[i * n + j];
      },
      "unpack_strict_lower");
}

}  // namespace tvae
