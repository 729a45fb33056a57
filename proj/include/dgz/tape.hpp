#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dgz/matrix.hpp"

namespace dgz {

template <typename T>
class TapeT;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
template <typename T>
struct VarT {
  TapeT<T>* tape = nullptr;
  int id = -1;
};

using Var = VarT<double>;

namespace tapeop {
enum Kind : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kMatmulNT,
  kMatmulTN,
  kTranspose,
  kScale,
  kAddScalar,
  kExp,
  kLog,
  kPowScalar,
  kLeakyRelu,
  kTanh,
  kRowSum,
  kColSum,
  kSum,
  kBcastCols,
  kBcastRows,
  kFull,
  kConcatCols,
  kSliceCols,
  kPadCols,
};
}  // namespace tapeop

// Append-only record of primitive operations with eagerly computed values.
// Nodes are created in topological order, so replay with the same inputs
// reproduces values bit for bit. The backward pass of gradients() is itself
// recorded as ordinary nodes, which makes gradients differentiable again —
// a second gradients() call differentiates a gradient.
//
// A tape is single-writer (one training step per tape); independent tapes may
// run concurrently on separate threads.
template <typename T>
class TapeT {
 public:
  struct Node {
    tapeop::Kind op;
    int a = -1;
    int b = -1;
    T alpha = T(0);
    int i0 = 0;
    int i1 = 0;
    MatrixT<T> value;
    bool needs_grad = false;
  };

  VarT<T> leaf(MatrixT<T> v) { return push({tapeop::kLeaf, -1, -1, T(0), 0, 0, std::move(v), true}); }

  VarT<T> constant(MatrixT<T> v) {
    return push({tapeop::kConstant, -1, -1, T(0), 0, 0, std::move(v), false});
  }

  const MatrixT<T>& value(VarT<T> v) const { return nodes_[check(v)].value; }

  int size() const { return static_cast<int>(nodes_.size()); }

  // Reverse-mode derivatives of a scalar node with respect to `wrt`. The
  // returned vars live on this tape; unreachable parameters come back as
  // zeros of the parameter's shape.
  std::vector<VarT<T>> gradients(VarT<T> output, std::span<const VarT<T>> wrt) {
    const int out_id = check(output);
    if (!nodes_[out_id].value.is_scalar())
      throw ContractError("gradients: output must be a scalar (1x1) node");
    for (const VarT<T>& w : wrt) {
      if (w.tape != this || w.id < 0 || w.id >= size())
        throw ContractError("gradients: wrt node is detached from this tape");
    }

    std::vector<int> adj(static_cast<std::size_t>(out_id) + 1, -1);
    adj[out_id] = constant(MatrixT<T>::filled(1, 1, T(1))).id;

    // Contributions are built lazily so constant operands never grow the tape.
    auto accumulate = [&](int target, auto&& build) {
      if (target < 0 || !nodes_[target].needs_grad) return;
      const VarT<T> contrib = build();
      if (adj[target] < 0) {
        adj[target] = contrib.id;
      } else {
        adj[target] = add_nodes(VarT<T>{this, adj[target]}, contrib).id;
      }
    };

    for (int i = out_id; i >= 0; --i) {
      if (adj[i] < 0 || !nodes_[i].needs_grad) continue;
      const Node n = snapshot(i);  // copy: pushes below invalidate references
      const VarT<T> up{this, adj[i]};
      const VarT<T> va{this, n.a};
      const VarT<T> vb{this, n.b};
      switch (n.op) {
        case tapeop::kLeaf:
        case tapeop::kConstant:
          break;
        case tapeop::kAdd:
          accumulate(n.a, [&] { return up; });
          accumulate(n.b, [&] { return up; });
          break;
        case tapeop::kSub:
          accumulate(n.a, [&] { return up; });
          accumulate(n.b, [&] { return scale_node(up, T(-1)); });
          break;
        case tapeop::kMul:
          accumulate(n.a, [&] { return mul_nodes(up, vb); });
          accumulate(n.b, [&] { return mul_nodes(up, va); });
          break;
        case tapeop::kMatmul:  // C = A B
          accumulate(n.a, [&] { return matmul_nt_nodes(up, vb); });
          accumulate(n.b, [&] { return matmul_tn_nodes(va, up); });
          break;
        case tapeop::kMatmulNT:  // C = A B^T
          accumulate(n.a, [&] { return matmul_nodes(up, vb); });
          accumulate(n.b, [&] { return matmul_tn_nodes(up, va); });
          break;
        case tapeop::kMatmulTN:  // C = A^T B
          accumulate(n.a, [&] { return matmul_nt_nodes(vb, up); });
          accumulate(n.b, [&] { return matmul_nodes(va, up); });
          break;
        case tapeop::kTranspose:
          accumulate(n.a, [&] { return transpose_node(up); });
          break;
        case tapeop::kScale:
          accumulate(n.a, [&] { return scale_node(up, n.alpha); });
          break;
        case tapeop::kAddScalar:
          accumulate(n.a, [&] { return up; });
          break;
        case tapeop::kExp:
          accumulate(n.a, [&] { return mul_nodes(up, VarT<T>{this, i}); });
          break;
        case tapeop::kLog:
          accumulate(n.a, [&] { return mul_nodes(up, pow_node(va, T(-1))); });
          break;
        case tapeop::kPowScalar:
          if (n.alpha != T(0))
            accumulate(n.a, [&] {
              return mul_nodes(up, scale_node(pow_node(va, n.alpha - T(1)), n.alpha));
            });
          break;
        case tapeop::kLeakyRelu:
          accumulate(n.a, [&] {
            MatrixT<T> mask = nodes_[n.a].value;
            for (auto& v : mask.data()) v = v > T(0) ? T(1) : n.alpha;
            return mul_nodes(up, constant(std::move(mask)));
          });
          break;
        case tapeop::kTanh:
          // d tanh = 1 - y^2, written with live nodes so it differentiates again.
          accumulate(n.a, [&] {
            const VarT<T> y{this, i};
            return sub_nodes(up, mul_nodes(up, mul_nodes(y, y)));
          });
          break;
        case tapeop::kRowSum:
          accumulate(n.a, [&] { return bcast_cols_node(up, n.i0); });
          break;
        case tapeop::kColSum:
          accumulate(n.a, [&] { return bcast_rows_node(up, n.i0); });
          break;
        case tapeop::kSum:
          accumulate(n.a, [&] { return full_node(up, n.i0, n.i1); });
          break;
        case tapeop::kBcastCols:
          accumulate(n.a, [&] { return row_sum_node(up); });
          break;
        case tapeop::kBcastRows:
          accumulate(n.a, [&] { return col_sum_node(up); });
          break;
        case tapeop::kFull:
          accumulate(n.a, [&] { return sum_node(up); });
          break;
        case tapeop::kConcatCols: {
          const int ca = nodes_[n.a].value.cols();
          const int cb = nodes_[n.b].value.cols();
          accumulate(n.a, [&] { return slice_cols_node(up, 0, ca); });
          accumulate(n.b, [&] { return slice_cols_node(up, ca, ca + cb); });
          break;
        }
        case tapeop::kSliceCols:
          accumulate(n.a, [&] { return pad_cols_node(up, n.i0, nodes_[n.a].value.cols()); });
          break;
        case tapeop::kPadCols:
          accumulate(n.a, [&] { return slice_cols_node(up, n.i0, n.i0 + nodes_[n.a].value.cols()); });
          break;
      }
    }

    std::vector<VarT<T>> out;
    out.reserve(wrt.size());
    for (const VarT<T>& w : wrt) {
      if (w.id <= out_id && adj[w.id] >= 0) {
        out.push_back(VarT<T>{this, adj[w.id]});
      } else {
        const auto& v = nodes_[w.id].value;
        out.push_back(constant(MatrixT<T>(v.rows(), v.cols())));
      }
    }
    return out;
  }

  // --- primitive builders (free-function wrappers below are the public API)

  VarT<T> add_nodes(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kAdd, a, b, add(val(a), val(b)));
  }
  VarT<T> sub_nodes(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kSub, a, b, sub(val(a), val(b)));
  }
  VarT<T> mul_nodes(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kMul, a, b, hadamard(val(a), val(b)));
  }
  VarT<T> matmul_nodes(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kMatmul, a, b, matmul(val(a), val(b)));
  }
  VarT<T> matmul_nt_nodes(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kMatmulNT, a, b, matmul_nt(val(a), val(b)));
  }
  VarT<T> matmul_tn_nodes(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kMatmulTN, a, b, matmul_tn(val(a), val(b)));
  }
  VarT<T> transpose_node(VarT<T> a) {
    return unary(tapeop::kTranspose, a, transpose(val(a)));
  }
  VarT<T> scale_node(VarT<T> a, T s) {
    return unary(tapeop::kScale, a, scale(val(a), s), s);
  }
  VarT<T> add_scalar_node(VarT<T> a, T s) {
    MatrixT<T> v = val(a);
    for (auto& x : v.data()) x += s;
    return unary(tapeop::kAddScalar, a, std::move(v), s);
  }
  VarT<T> exp_node(VarT<T> a) {
    MatrixT<T> v = val(a);
    for (auto& x : v.data()) x = std::exp(x);
    return unary(tapeop::kExp, a, std::move(v));
  }
  VarT<T> log_node(VarT<T> a) {
    MatrixT<T> v = val(a);
    for (auto& x : v.data()) x = std::log(x);
    return unary(tapeop::kLog, a, std::move(v));
  }
  VarT<T> pow_node(VarT<T> a, T p) {
    MatrixT<T> v = val(a);
    for (auto& x : v.data()) x = std::pow(x, p);
    return unary(tapeop::kPowScalar, a, std::move(v), p);
  }
  VarT<T> leaky_relu_node(VarT<T> a, T slope) {
    MatrixT<T> v = val(a);
    for (auto& x : v.data())
      if (x < T(0)) x *= slope;
    return unary(tapeop::kLeakyRelu, a, std::move(v), slope);
  }
  VarT<T> tanh_node(VarT<T> a) {
    MatrixT<T> v = val(a);
    for (auto& x : v.data()) x = std::tanh(x);
    return unary(tapeop::kTanh, a, std::move(v));
  }
  VarT<T> row_sum_node(VarT<T> a) {
    const MatrixT<T>& m = val(a);
    MatrixT<T> v(m.rows(), 1);
    for (int i = 0; i < m.rows(); ++i) {
      T acc = T(0);
      const T* p = m.row_ptr(i);
      for (int j = 0; j < m.cols(); ++j) acc += p[j];
      v(i, 0) = acc;
    }
    return unary(tapeop::kRowSum, a, std::move(v), T(0), m.cols());
  }
  VarT<T> col_sum_node(VarT<T> a) {
    const MatrixT<T>& m = val(a);
    MatrixT<T> v(1, m.cols());
    for (int i = 0; i < m.rows(); ++i) {
      const T* p = m.row_ptr(i);
      for (int j = 0; j < m.cols(); ++j) v(0, j) += p[j];
    }
    return unary(tapeop::kColSum, a, std::move(v), T(0), m.rows());
  }
  VarT<T> sum_node(VarT<T> a) {
    const MatrixT<T>& m = val(a);
    T acc = T(0);
    for (T x : m.data()) acc += x;
    return unary(tapeop::kSum, a, MatrixT<T>::filled(1, 1, acc), T(0), m.rows(), m.cols());
  }
  VarT<T> bcast_cols_node(VarT<T> a, int cols) {
    const MatrixT<T>& m = val(a);
    if (m.cols() != 1) throw ShapeError("bcast_cols: input must be a column vector");
    MatrixT<T> v(m.rows(), cols);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < cols; ++j) v(i, j) = m(i, 0);
    return unary(tapeop::kBcastCols, a, std::move(v), T(0), cols);
  }
  VarT<T> bcast_rows_node(VarT<T> a, int rows) {
    const MatrixT<T>& m = val(a);
    if (m.rows() != 1) throw ShapeError("bcast_rows: input must be a row vector");
    MatrixT<T> v(rows, m.cols());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < m.cols(); ++j) v(i, j) = m(0, j);
    return unary(tapeop::kBcastRows, a, std::move(v), T(0), rows);
  }
  VarT<T> full_node(VarT<T> a, int rows, int cols) {
    const MatrixT<T>& m = val(a);
    if (!m.is_scalar()) throw ShapeError("full: input must be scalar");
    return unary(tapeop::kFull, a, MatrixT<T>::filled(rows, cols, m(0, 0)), T(0), rows, cols);
  }
  VarT<T> concat_cols_node(VarT<T> a, VarT<T> b) {
    return binary(tapeop::kConcatCols, a, b, hconcat(val(a), val(b)));
  }
  VarT<T> slice_cols_node(VarT<T> a, int lo, int hi) {
    const MatrixT<T>& m = val(a);
    if (lo < 0 || hi > m.cols() || lo >= hi) throw ShapeError("slice_cols: bad range");
    MatrixT<T> v(m.rows(), hi - lo);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = lo; j < hi; ++j) v(i, j - lo) = m(i, j);
    return unary(tapeop::kSliceCols, a, std::move(v), T(0), lo, hi);
  }
  VarT<T> pad_cols_node(VarT<T> a, int left, int total) {
    const MatrixT<T>& m = val(a);
    if (left < 0 || left + m.cols() > total) throw ShapeError("pad_cols: bad layout");
    MatrixT<T> v(m.rows(), total);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) v(i, left + j) = m(i, j);
    return unary(tapeop::kPadCols, a, std::move(v), T(0), left, total);
  }

 private:
  int check(VarT<T> v) const {
    if (v.tape != this || v.id < 0 || v.id >= size())
      throw ContractError("var does not belong to this tape");
    return v.id;
  }

  const MatrixT<T>& val(VarT<T> v) const { return nodes_[check(v)].value; }

  Node snapshot(int i) const { return nodes_[i]; }

  VarT<T> push(Node n) {
    nodes_.push_back(std::move(n));
    return VarT<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  VarT<T> unary(tapeop::Kind op, VarT<T> a, MatrixT<T> v, T alpha = T(0), int i0 = 0, int i1 = 0) {
    const int ia = check(a);
    const bool ng = nodes_[ia].needs_grad;
    return push({op, ia, -1, alpha, i0, i1, std::move(v), ng});
  }

  VarT<T> binary(tapeop::Kind op, VarT<T> a, VarT<T> b, MatrixT<T> v) {
    const int ia = check(a), ib = check(b);
    const bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    return push({op, ia, ib, T(0), 0, 0, std::move(v), ng});
  }

  std::vector<Node> nodes_;
};

using Tape = TapeT<double>;

// --- expression-style wrappers ----------------------------------------------

namespace detail {
template <typename T>
TapeT<T>* same_tape(VarT<T> a, VarT<T> b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ContractError("operands live on different tapes");
  return a.tape;
}
}  // namespace detail

template <typename T>
VarT<T> operator+(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->add_nodes(a, b);
}
template <typename T>
VarT<T> operator-(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->sub_nodes(a, b);
}
template <typename T>
VarT<T> operator*(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->mul_nodes(a, b);
}
template <typename T>
VarT<T> operator*(T s, VarT<T> a) {
  return a.tape->scale_node(a, s);
}
template <typename T>
VarT<T> operator-(VarT<T> a) {
  return a.tape->scale_node(a, T(-1));
}

template <typename T>
VarT<T> matmul(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->matmul_nodes(a, b);
}
template <typename T>
VarT<T> matmul_nt(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->matmul_nt_nodes(a, b);
}
template <typename T>
VarT<T> matmul_tn(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->matmul_tn_nodes(a, b);
}
template <typename T>
VarT<T> transpose(VarT<T> a) {
  return a.tape->transpose_node(a);
}
template <typename T>
VarT<T> scale(VarT<T> a, T s) {
  return a.tape->scale_node(a, s);
}
template <typename T>
VarT<T> add_scalar(VarT<T> a, T s) {
  return a.tape->add_scalar_node(a, s);
}
template <typename T>
VarT<T> exp(VarT<T> a) {
  return a.tape->exp_node(a);
}
template <typename T>
VarT<T> log(VarT<T> a) {
  return a.tape->log_node(a);
}
template <typename T>
VarT<T> pow(VarT<T> a, T p) {
  return a.tape->pow_node(a, p);
}
template <typename T>
VarT<T> sqrt(VarT<T> a) {
  return a.tape->pow_node(a, T(0.5));
}
template <typename T>
VarT<T> square(VarT<T> a) {
  return a.tape->pow_node(a, T(2));
}
template <typename T>
VarT<T> leaky_relu(VarT<T> a, T slope) {
  return a.tape->leaky_relu_node(a, slope);
}
template <typename T>
VarT<T> tanh(VarT<T> a) {
  return a.tape->tanh_node(a);
}
template <typename T>
VarT<T> relu(VarT<T> a) {
  return a.tape->leaky_relu_node(a, T(0));
}
template <typename T>
VarT<T> row_sum(VarT<T> a) {
  return a.tape->row_sum_node(a);
}
template <typename T>
VarT<T> col_sum(VarT<T> a) {
  return a.tape->col_sum_node(a);
}
template <typename T>
VarT<T> sum(VarT<T> a) {
  return a.tape->sum_node(a);
}
template <typename T>
VarT<T> mean(VarT<T> a) {
  const auto& v = a.tape->value(a);
  return scale(sum(a), T(1) / static_cast<T>(v.rows() * v.cols()));
}
template <typename T>
VarT<T> bcast_cols(VarT<T> a, int cols) {
  return a.tape->bcast_cols_node(a, cols);
}
template <typename T>
VarT<T> bcast_rows(VarT<T> a, int rows) {
  return a.tape->bcast_rows_node(a, rows);
}
template <typename T>
VarT<T> full(VarT<T> a, int rows, int cols) {
  return a.tape->full_node(a, rows, cols);
}
template <typename T>
VarT<T> concat_cols(VarT<T> a, VarT<T> b) {
  return detail::same_tape(a, b)->concat_cols_node(a, b);
}
template <typename T>
VarT<T> slice_cols(VarT<T> a, int lo, int hi) {
  return a.tape->slice_cols_node(a, lo, hi);
}

// Scalar value of a 1x1 node.
template <typename T>
T scalar_value(VarT<T> v) {
  const auto& m = v.tape->value(v);
  if (!m.is_scalar()) throw ContractError("scalar_value: node is not 1x1");
  return m(0, 0);
}

}  // namespace dgz
