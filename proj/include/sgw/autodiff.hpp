#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "sgw/errors.hpp"
#include "sgw/gw_sliced.hpp"
#include "sgw/matrix.hpp"

namespace sgw::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Wengert-list reverse-mode tape over matrix-valued nodes. The operator set
// is exactly what the loss stack needs; nodes are appended in evaluation
// order, so the reverse sweep visits them back to front.
//
// One tape per forward pass; tapes are not shared across threads.
class Tape {
 public:
  Var leaf(Matrix value) { return push(std::move(value), nullptr); }

  const Matrix& value(Var v) const { return nodes_[check(v)].value; }

  const Matrix& grad(Var v) const { return nodes_[check(v)].grad; }

  double scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.size() != 1) throw ShapeMismatch("Tape::scalar: node is not 1x1");
    return m(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

  // Gradients of <root, seed> with respect to every node. A second backward
  // without new nodes is a stale-tape error.
  void backward(Var root, const Matrix& seed) {
    if (nodes_.size() == nodes_at_backward_)
      throw StaleTape("Tape::backward: no new forward since last backward");
    if (!value(root).same_shape(seed))
      throw ShapeMismatch("Tape::backward: seed shape differs from root value");
    for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
    nodes_[root.id].grad = seed;
    for (int i = root.id; i >= 0; --i)
      if (nodes_[i].backprop) nodes_[i].backprop(*this);
    nodes_at_backward_ = nodes_.size();
  }

  void backward_scalar(Var root) { backward(root, Matrix(1, 1, 1.0)); }

  // ---- arithmetic ----

  Var add(Var a, Var b) {
    Matrix v = value(a) + value(b);
    return push(std::move(v), [ia = a.id, ib = b.id, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[io].grad;
      t.nodes_[ib].grad += t.nodes_[io].grad;
    });
  }

  Var sub(Var a, Var b) {
    Matrix v = value(a) - value(b);
    return push(std::move(v), [ia = a.id, ib = b.id, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[io].grad;
      t.nodes_[ib].grad -= t.nodes_[io].grad;
    });
  }

  Var scale(Var a, double s) {
    Matrix v = value(a) * s;
    return push(std::move(v), [ia = a.id, s, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[io].grad * s;
    });
  }

  Var add_scalar(Var a, double s) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] += s;
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[io].grad;
    });
  }

  // Elementwise product with a constant matrix.
  Var mul_const(Var a, const Matrix& k) {
    Matrix v = hadamard(value(a), k);
    return push(std::move(v), [ia = a.id, k, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += hadamard(t.nodes_[io].grad, k);
    });
  }

  Var square(Var a) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] *= v.data()[i];
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      const Matrix& x = t.nodes_[ia].value;
      const Matrix& go = t.nodes_[io].grad;
      Matrix& gi = t.nodes_[ia].grad;
      for (std::size_t i = 0; i < x.size(); ++i)
        gi.data()[i] += 2.0 * x.data()[i] * go.data()[i];
    });
  }

  Var sqrt_ew(Var a) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = std::sqrt(v.data()[i]);
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      const Matrix& out = t.nodes_[io].value;
      const Matrix& go = t.nodes_[io].grad;
      Matrix& gi = t.nodes_[ia].grad;
      for (std::size_t i = 0; i < out.size(); ++i)
        gi.data()[i] += go.data()[i] * 0.5 / out.data()[i];
    });
  }

  Var abs_ew(Var a) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = std::abs(v.data()[i]);
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      const Matrix& x = t.nodes_[ia].value;
      const Matrix& go = t.nodes_[io].grad;
      Matrix& gi = t.nodes_[ia].grad;
      for (std::size_t i = 0; i < x.size(); ++i)
        gi.data()[i] += (x.data()[i] > 0.0 ? 1.0 : (x.data()[i] < 0.0 ? -1.0 : 0.0)) * go.data()[i];
    });
  }

  // ---- matrix products ----

  Var matmul(Var a, Var b) {
    Matrix v = sgw::matmul(value(a), value(b));
    return push(std::move(v), [ia = a.id, ib = b.id, io = next_id()](Tape& t) {
      const Matrix& go = t.nodes_[io].grad;
      t.nodes_[ia].grad += matmul_abt(go, t.nodes_[ib].value);
      t.nodes_[ib].grad += matmul_atb(t.nodes_[ia].value, go);
    });
  }

  // C = A * B^T with gradients to both operands.
  Var matmul_bt(Var a, Var b) {
    Matrix v = matmul_abt(value(a), value(b));
    return push(std::move(v), [ia = a.id, ib = b.id, io = next_id()](Tape& t) {
      const Matrix& go = t.nodes_[io].grad;
      t.nodes_[ia].grad += sgw::matmul(go, t.nodes_[ib].value);
      t.nodes_[ib].grad += matmul_atb(go, t.nodes_[ia].value);
    });
  }

  // C = K * A for a constant left factor.
  Var matmul_const_left(const Matrix& k, Var a) {
    Matrix v = sgw::matmul(k, value(a));
    return push(std::move(v), [ia = a.id, k, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += matmul_atb(k, t.nodes_[io].grad);
    });
  }

  // C = A * K for a constant right factor.
  Var matmul_const_right(Var a, const Matrix& k) {
    Matrix v = sgw::matmul(value(a), k);
    return push(std::move(v), [ia = a.id, k, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += matmul_abt(t.nodes_[io].grad, k);
    });
  }

  // C = K * A^T... not needed; C = K * B^T with constant K, gradient to B.
  Var matmul_const_bt(const Matrix& k, Var b) {
    Matrix v = matmul_abt(k, value(b));
    return push(std::move(v), [ib = b.id, k, io = next_id()](Tape& t) {
      t.nodes_[ib].grad += matmul_atb(t.nodes_[io].grad, k);
    });
  }

  // X + 1 b^T for a 1 x c bias row.
  Var add_row_broadcast(Var x, Var b) {
    const Matrix& bv = value(b);
    if (bv.rows() != 1 || bv.cols() != value(x).cols())
      throw ShapeMismatch("add_row_broadcast: bias must be 1 x cols(x)");
    Matrix v = value(x);
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) v(i, j) += bv(0, j);
    return push(std::move(v), [ix = x.id, ib = b.id, io = next_id()](Tape& t) {
      const Matrix& go = t.nodes_[io].grad;
      t.nodes_[ix].grad += go;
      Matrix& gb = t.nodes_[ib].grad;
      for (std::size_t i = 0; i < go.rows(); ++i)
        for (std::size_t j = 0; j < go.cols(); ++j) gb(0, j) += go(i, j);
    });
  }

  Var add_const(Var a, const Matrix& k) {
    Matrix v = value(a) + k;
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      t.nodes_[ia].grad += t.nodes_[io].grad;
    });
  }

  // ---- reductions ----

  Var sum_all(Var a) {
    Matrix v(1, 1, sgw::sum_all(value(a)));
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      const double g = t.nodes_[io].grad(0, 0);
      Matrix& gi = t.nodes_[ia].grad;
      for (std::size_t i = 0; i < gi.size(); ++i) gi.data()[i] += g;
    });
  }

  Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(value(a).size())); }

  // Row sums of squares: n x c -> n x 1.
  Var row_sumsq(Var a) {
    const Matrix& x = value(a);
    Matrix v(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
      v(i, 0) = s;
    }
    return push(std::move(v), [ia = a.id, io = next_id()](Tape& t) {
      const Matrix& x = t.nodes_[ia].value;
      const Matrix& go = t.nodes_[io].grad;
      Matrix& gi = t.nodes_[ia].grad;
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) gi(i, j) += 2.0 * x(i, j) * go(i, 0);
    });
  }

  Var dot(Var a, Var b) {
    Matrix v(1, 1, frobenius_dot(value(a), value(b)));
    return push(std::move(v), [ia = a.id, ib = b.id, io = next_id()](Tape& t) {
      const double g = t.nodes_[io].grad(0, 0);
      t.nodes_[ia].grad += t.nodes_[ib].value * g;
      t.nodes_[ib].grad += t.nodes_[ia].value * g;
    });
  }

  // ---- structural ----

  // Reorder the rows of an n x 1 column by a fixed permutation computed in
  // the forward pass: out[i] = a[perm[i]].
  Var gather(Var a, std::vector<std::size_t> perm) {
    const Matrix& x = value(a);
    if (x.cols() != 1 || perm.size() != x.rows())
      throw ShapeMismatch("gather: expects an n x 1 column and a length-n permutation");
    Matrix v(perm.size(), 1);
    for (std::size_t i = 0; i < perm.size(); ++i) v(i, 0) = x(perm[i], 0);
    return push(std::move(v), [ia = a.id, perm, io = next_id()](Tape& t) {
      const Matrix& go = t.nodes_[io].grad;
      Matrix& gi = t.nodes_[ia].grad;
      for (std::size_t i = 0; i < perm.size(); ++i) gi(perm[i], 0) += go(i, 0);
    });
  }

  // One SGW slice with the monotone matching frozen: ps holds the sorted
  // projections of the generated batch, ys the sorted projections of the
  // target batch. Value and gradient follow the quadratic objective at the
  // fixed matching (envelope rule); the O(n) form uses that sorted sequences
  // share the sign pattern of index differences.
  Var frozen_slice_cost(Var ps, const std::vector<double>& ys, Matching matching) {
    const Matrix& x = value(ps);
    const std::size_t n = x.rows();
    if (x.cols() != 1 || ys.size() != n)
      throw ShapeMismatch("frozen_slice_cost: ps must be n x 1 with matching ys length");
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = x(i, 0);
    Matrix v(1, 1, detail::matching_cost_fast(xs, ys, matching));
    return push(std::move(v), [ips = ps.id, ys, matching, io = next_id()](Tape& t) {
      const double g = t.nodes_[io].grad(0, 0);
      const Matrix& x = t.nodes_[ips].value;
      Matrix& gi = t.nodes_[ips].grad;
      const std::size_t n = x.rows();
      const double dn = static_cast<double>(n);
      double sp = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sp += x(i, 0);
        sy += ys[i];
      }
      const double c = 4.0 / (dn * dn);
      for (std::size_t i = 0; i < n; ++i) {
        const double m = matching == Matching::Ascending ? ys[i] : ys[n - 1 - i];
        const double gradi = matching == Matching::Ascending
                                 ? c * (dn * (x(i, 0) - m) - (sp - sy))
                                 : c * (dn * (x(i, 0) + m) - (sp + sy));
        gi(i, 0) += g * gradi;
      }
    });
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> backprop;
  };

  int next_id() const { return static_cast<int>(nodes_.size()); }

  Var push(Matrix value, std::function<void(Tape&)> backprop) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  int check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw InvalidArgument("Tape: invalid Var");
    return v.id;
  }

  std::vector<Node> nodes_;
  std::size_t nodes_at_backward_ = static_cast<std::size_t>(-1);
};

// Stable argsort of an n x 1 column, ties keep original order.
inline std::vector<std::size_t> argsort_column(const Matrix& col) {
  std::vector<std::size_t> idx(col.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return col(a, 0) < col(b, 0); });
  return idx;
}

}  // namespace sgw::ad
