#include "dirhoi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dirhoi/errors.hpp"
#include "kernels.hpp"

namespace dirhoi {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(v), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

detail::Node& Tensor::node() const {
  if (!node_) throw StateError("use of undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node().value.size(); }

std::span<const double> Tensor::values() const { return node().value; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node().value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("at(r, c) requires a matrix");
  return node().value[row * s[1] + col];
}

std::span<double> Tensor::mutable_values() {
  if (!node().leaf) throw StateError("only leaf tensors may be written");
  return node().value;
}

bool Tensor::requires_grad() const { return node().requires_grad; }
bool Tensor::is_leaf() const { return node().leaf; }

std::span<const double> Tensor::grad() const {
  auto& n = node();
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

std::span<double> Tensor::mutable_grad() { return node().ensure_grad(); }

void Tensor::zero_grad() {
  auto& n = node();
  n.grad.assign(n.value.size(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node().value); }

Tensor Tensor::from_op(Shape shape, std::vector<double> values,
                       std::vector<Tensor> parents,
                       std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(shape), std::move(values));
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  auto& n = *out.node_;
  n.leaf = false;
  if (needs) {
    n.requires_grad = true;
    n.parents.reserve(parents.size());
    for (auto& p : parents) n.parents.push_back(p.node_);
    n.backward = std::move(backward);
  }
  return out;
}

void backward(const Tensor& loss) {
  auto& root = loss.node();
  if (root.value.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " +
                         shape_str(root.shape));
  }
  if (root.consumed) {
    throw StateError("backward() already ran on this graph; rebuild it first");
  }
  if (!root.requires_grad) {
    throw StateError("loss does not depend on any tensor requiring grad");
  }

  // Iterative post-order DFS; the tape is the reverse of the post-order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(&root, 0);
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), 0.0);
  }
  root.ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  root.consumed = true;
}

// ---- helpers ----------------------------------------------------------------

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_str(t.shape()));
  }
}

void check_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(op) + " received a non-finite input");
    }
  }
}

// Accumulates g into parent i of n when that parent participates.
template <class F>
void into_parent(detail::Node& n, std::size_t i, F&& f) {
  auto& p = *n.parents[i];
  if (p.requires_grad) f(p.ensure_grad(), p);
}

enum class Bin { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Bin op, const char* name) {
  const bool same = a.shape() == b.shape();
  const bool a_scalar = a.numel() == 1 && !same;
  const bool b_scalar = b.numel() == 1 && !same;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " are incompatible");
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  auto av = a.values();
  auto bv = b.values();
  auto ai = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
  auto bi = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (op) {
      case Bin::kAdd: out[i] = ai(i) + bi(i); break;
      case Bin::kSub: out[i] = ai(i) - bi(i); break;
      case Bin::kMul: out[i] = ai(i) * bi(i); break;
    }
  }
  return Tensor::from_op(
      out_shape, std::move(out), {a, b},
      [op, a_scalar, b_scalar, n](detail::Node& self) {
        const auto& g = self.grad;
        const auto& A = self.parents[0]->value;
        const auto& B = self.parents[1]->value;
        into_parent(self, 0, [&](std::vector<double>& ga, detail::Node&) {
          for (std::size_t i = 0; i < n; ++i) {
            double d = g[i];
            if (op == Bin::kMul) d *= B[b_scalar ? 0 : i];
            ga[a_scalar ? 0 : i] += d;
          }
        });
        into_parent(self, 1, [&](std::vector<double>& gb, detail::Node&) {
          for (std::size_t i = 0; i < n; ++i) {
            double d = g[i];
            if (op == Bin::kSub) d = -d;
            if (op == Bin::kMul) d *= A[a_scalar ? 0 : i];
            gb[b_scalar ? 0 : i] += d;
          }
        });
      });
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [deriv](detail::Node& self) {
                           const auto& X = self.parents[0]->value;
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t i = 0; i < X.size(); ++i) {
                               gx[i] += self.grad[i] * deriv(X[i], self.value[i]);
                             }
                           });
                         });
}

}  // namespace

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return Tensor::from_op({m, n}, std::move(out), {a, b},
                         [m, k, n](detail::Node& self) {
                           const double* g = self.grad.data();
                           const double* A = self.parents[0]->value.data();
                           const double* B = self.parents[1]->value.data();
                           into_parent(self, 0, [&](auto& ga, auto&) {
                             kernels::gemm_nt(g, B, ga.data(), m, n, k);
                           });
                           into_parent(self, 1, [&](auto& gb, auto&) {
                             kernels::gemm_tn(A, g, gb.data(), m, k, n);
                           });
                         });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return Tensor::from_op({n, m}, std::move(out), {a}, [m, n](detail::Node& self) {
    into_parent(self, 0, [&](auto& ga, auto&) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
    });
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Bin::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Bin::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Bin::kMul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n) {
    throw DimensionError("add_row: bias of " + shape_str(bias.shape()) +
                         " for rows of width " + std::to_string(n));
  }
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  return Tensor::from_op({m, n}, std::move(out), {x, bias},
                         [m, n](detail::Node& self) {
                           const auto& g = self.grad;
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t i = 0; i < m * n; ++i) gx[i] += g[i];
                           });
                           into_parent(self, 1, [&](auto& gb, auto&) {
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 gb[j] += g[i * n + j];
                           });
                         });
}

Tensor mul_row(const Tensor& x, const Tensor& gain) {
  require_matrix(x, "mul_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.numel() != n) {
    throw DimensionError("mul_row: gain of " + shape_str(gain.shape()) +
                         " for rows of width " + std::to_string(n));
  }
  auto xv = x.values();
  auto gv = gain.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * gv[j];
  return Tensor::from_op({m, n}, std::move(out), {x, gain},
                         [m, n](detail::Node& self) {
                           const auto& g = self.grad;
                           const auto& X = self.parents[0]->value;
                           const auto& G = self.parents[1]->value;
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 gx[i * n + j] += g[i * n + j] * G[j];
                           });
                           into_parent(self, 1, [&](auto& gg, auto&) {
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 gg[j] += g[i * n + j] * X[i * n + j];
                           });
                         });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
  }
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax axis " + std::to_string(axis) + " for " +
                         shape_str(s));
  }
  check_finite(x.values(), "softmax");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xv[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  return Tensor::from_op(s, std::move(out), {x},
                         [outer, inner, len](detail::Node& self) {
                           const auto& y = self.value;
                           const auto& g = self.grad;
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t o = 0; o < outer; ++o) {
                               for (std::size_t in = 0; in < inner; ++in) {
                                 const std::size_t base = o * len * inner + in;
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < len; ++j)
                                   dot += y[base + j * inner] * g[base + j * inner];
                                 for (std::size_t j = 0; j < len; ++j) {
                                   const std::size_t idx = base + j * inner;
                                   gx[idx] += y[idx] * (g[idx] - dot);
                                 }
                               }
                             }
                           });
                         });
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm of a rank-0 tensor");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n ? x.numel() / n : 0;
  auto xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = (row[j] - mu) * is;
  }
  return Tensor::from_op(
      x.shape(), std::move(out), {x},
      [rows, n, inv_std = std::move(inv_std)](detail::Node& self) {
        const auto& y = self.value;
        const auto& g = self.grad;
        into_parent(self, 0, [&](auto& gx, auto&) {
          for (std::size_t r = 0; r < rows; ++r) {
            double mg = 0.0, mgy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              mg += g[r * n + j];
              mgy += g[r * n + j] * y[r * n + j];
            }
            mg /= static_cast<double>(n);
            mgy /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const std::size_t i = r * n + j;
              gx[i] += inv_std[r] * (g[i] - mg - y[i] * mgy);
            }
          }
        });
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  return add_row(mul_row(layer_norm(x, eps), gain), bias);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  Shape out_shape = parts.front().shape();
  if (axis >= out_shape.size()) throw DimensionError("concat axis out of range");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != out_shape.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw DimensionError("concat: " + shape_str(s) + " vs " +
                             shape_str(out_shape));
      }
    }
    total += s[axis];
  }
  out_shape[axis] = total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
  for (std::size_t i = axis + 1; i < out_shape.size(); ++i) inner *= out_shape[i];

  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.shape()[axis] * inner);
  const std::size_t out_width = total * inner;
  std::vector<double> out(outer * out_width);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * widths[k], widths[k],
                  out.data() + o * out_width + offset);
    }
    offset += widths[k];
  }
  return Tensor::from_op(
      out_shape, std::move(out), parts,
      [outer, out_width, widths](detail::Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          into_parent(self, k, [&](auto& gp, auto&) {
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t j = 0; j < widths[k]; ++j)
                gp[o * widths[k] + j] += self.grad[o * out_width + off + j];
          });
          off += widths[k];
        }
      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const auto& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw DimensionError("slice [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t in_width = s[axis] * inner;
  const std::size_t width = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  auto xv = x.values();
  std::vector<double> out(outer * width);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data() + o * in_width + off, width, out.data() + o * width);
  return Tensor::from_op(out_shape, std::move(out), {x},
                         [outer, in_width, width, off](detail::Node& self) {
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t o = 0; o < outer; ++o)
                               for (std::size_t j = 0; j < width; ++j)
                                 gx[o * in_width + off + j] +=
                                     self.grad[o * width + j];
                           });
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::from_op(std::move(shape), std::move(out), {x},
                         [](detail::Node& self) {
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t i = 0; i < gx.size(); ++i)
                               gx[i] += self.grad[i];
                           });
                         });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (auto r : idx) {
    if (r >= m) throw DimensionError("gather_rows index out of range");
  }
  auto xv = x.values();
  std::vector<double> out(idx.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(xv.data() + idx[i] * n, n, out.data() + i * n);
  Shape shape{idx.size(), n};
  return Tensor::from_op(std::move(shape), std::move(out), {x},
                         [n, idx = std::move(idx)](detail::Node& self) {
                           into_parent(self, 0, [&](auto& gx, auto&) {
                             for (std::size_t i = 0; i < idx.size(); ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 gx[idx[i] * n + j] += self.grad[i * n + j];
                           });
                         });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return Tensor::from_op({1}, {total}, {x}, [](detail::Node& self) {
    into_parent(self, 0, [&](auto& gx, auto&) {
      for (auto& g : gx) g += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor abs_sum(const Tensor& x) { return sum(abs(x)); }

}  // namespace dirhoi
