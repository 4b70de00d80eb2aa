#pragma once

// Dense f64 tensors with a dynamically recorded graph for reverse-mode
// differentiation.
//
// A Tensor is a cheap handle to an immutable node. Operations on tensors that
// require gradients record a backward closure; evaluate_and_grad() walks the
// recorded graph in reverse creation order and returns the gradient of a scalar
// loss with respect to every named variable reachable from it.
//
// All matrix primitives view a tensor as a matrix: rank 0 is 1x1, rank 1 is
// 1xn, rank 2 is itself, higher ranks fold leading dimensions into rows.
// Results of primitives are always rank 2.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tvae {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  /// Empty 0x0 constant.
  Tensor();

  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);
  /// Trainable leaf. The name identifies it in the GradientMap.
  static Tensor variable(std::string name, Shape shape, std::vector<double> data);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  /// Variable name; empty for intermediate and constant tensors.
  const std::string& name() const;

  /// Same values, no graph history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Gradients keyed by variable name; each holds a tensor of the variable's shape.
using GradientMap = std::map<std::string, Tensor>;

struct GradResult {
  double value = 0.0;
  GradientMap grads;
};

/// Backpropagates from a one-element loss. Throws ContractError for a
/// non-scalar loss or when two distinct variables share a name.
GradResult evaluate_and_grad(const Tensor& loss);

// Elementwise binary ops broadcast dimensions of extent 1 (matrix view).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor softplus(const Tensor& a);
/// Gradient passes only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor lgamma(const Tensor& a);
Tensor digamma(const Tensor& a);

/// Sum of all entries (1x1).
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Per-row sums (R x 1).
Tensor sum_rows(const Tensor& a);
/// Per-column sums (1 x C).
Tensor sum_cols(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor logsumexp_rows(const Tensor& a);
Tensor softmax(const Tensor& a);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Stacks `times` copies of `a` vertically.
Tensor tile_rows(const Tensor& a, std::size_t times);

/// Lower Cholesky factor of a symmetric positive definite matrix.
Tensor cholesky(const Tensor& a);
/// X with L X = B for lower-triangular L.
Tensor tri_solve_lower(const Tensor& l, const Tensor& b);
/// Diagonal of a square matrix as a 1 x n row.
Tensor diag_part(const Tensor& a);
/// Square matrix with the 1 x n row on its diagonal.
Tensor diag_embed(const Tensor& row);
/// n x n matrix whose strictly lower triangle is filled row by row from a
/// 1 x n(n-1)/2 row; zeros elsewhere.
Tensor unpack_strict_lower(const Tensor& packed, std::size_t n);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }

}  // namespace tvae
