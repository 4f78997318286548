#pragma once

// Dense double-precision tensor with tape-based reverse-mode autodiff.
//
// A Tensor is a cheap handle onto an immutable node. Nodes produced by ops
// keep their inputs alive and carry a closure that pushes the node's gradient
// into its parents. backward() linearizes the graph reachable from a scalar
// loss into a tape (reverse topological order) and replays it once.
//
// Leaves created with requires_grad accumulate gradients across backward
// calls on different graphs until zero_grad().

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dirhoi {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> values() const;
  double item() const;
  double operator[](std::size_t flat) const { return values()[flat]; }
  double at(std::size_t row, std::size_t col) const;

  // Leaf-only write access, used by optimizers and finite-difference probes.
  std::span<double> mutable_values();

  bool requires_grad() const;
  bool is_leaf() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;

  // Node identity, for wiring checks.
  const void* id() const { return node_.get(); }

  // Builds an op result. backward receives the result node whose grad is
  // populated and must accumulate into each parent that requires grad.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents,
                        std::function<void(detail::Node&)> backward);

  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

// Runs reverse-mode accumulation from a scalar loss. Throws StateError when
// called twice on the same loss.
void backward(const Tensor& loss);

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Same-shape elementwise, or one side a single-element tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor neg(const Tensor& a);

// x[m×n] + bias[n] on every row, and x[m×n] ⊙ gain[n] on every row.
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor mul_row(const Tensor& x, const Tensor& gain);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes each row over the last axis to zero mean and unit variance.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor abs_sum(const Tensor& x);

}  // namespace dirhoi
