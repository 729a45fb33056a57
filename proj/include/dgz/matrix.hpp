#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "dgz/error.hpp"

namespace dgz {

// Dense row-major matrix. Immutable-by-convention value type: library code
// returns fresh matrices instead of mutating shared ones, so instances can be
// shared across threads freely. Element type is double on every verification
// path; float storage is available for training throughput.
template <typename T>
class MatrixT {
 public:
  MatrixT() = default;

  MatrixT(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ShapeError("matrix dimensions must be nonnegative");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), T(0));
  }

  MatrixT(int rows, int cols, std::initializer_list<T> values) : MatrixT(rows, cols) {
    if (static_cast<std::size_t>(values.size()) != data_.size())
      throw ShapeError("initializer size does not match matrix shape");
    std::size_t i = 0;
    for (T v : values) data_[i++] = v;
  }

  static MatrixT identity(int n) {
    MatrixT m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  static MatrixT filled(int rows, int cols, T value) {
    MatrixT m(rows, cols);
    for (auto& v : m.data_) v = value;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  T operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  T* row_ptr(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const T* row_ptr(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const MatrixT& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  MatrixT<U> cast() const {
    MatrixT<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Matrix = MatrixT<double>;
using MatrixF = MatrixT<float>;

namespace detail {
inline void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}
}  // namespace detail

// Standard product with row-major accumulation: for each output row the inner
// sum runs over k in ascending order, so results are bit-stable across runs.
template <typename T>
MatrixT<T> matmul(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree (" + a.shape_str() + " * " + b.shape_str() + ")");
  MatrixT<T> c(a.rows(), b.cols());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    T* ci = c.row_ptr(i);
    const T* ai = a.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const T aip = ai[p];
      if (aip == T(0)) continue;
      const T* bp = b.row_ptr(p);
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

// a * b^T
template <typename T>
MatrixT<T> matmul_nt(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner dimensions disagree (" + a.shape_str() + " * " + b.shape_str() + "^T)");
  MatrixT<T> c(a.rows(), b.rows());
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const T* ai = a.row_ptr(i);
    T* ci = c.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      const T* bj = b.row_ptr(j);
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
  return c;
}

// a^T * b
template <typename T>
MatrixT<T> matmul_tn(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: inner dimensions disagree (" + a.shape_str() + "^T * " + b.shape_str() + ")");
  MatrixT<T> c(a.cols(), b.cols());
  const int m = a.cols(), k = a.rows(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const T* ap = a.row_ptr(p);
    const T* bp = b.row_ptr(p);
    for (int i = 0; i < m; ++i) {
      const T api = ap[i];
      if (api == T(0)) continue;
      T* ci = c.row_ptr(i);
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
  return c;
}

template <typename T>
MatrixT<T> transpose(const MatrixT<T>& a) {
  MatrixT<T> t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <typename T>
MatrixT<T> add(const MatrixT<T>& a, const MatrixT<T>& b) {
  detail::require(a.same_shape(b), "add: shape mismatch");
  MatrixT<T> c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

template <typename T>
MatrixT<T> sub(const MatrixT<T>& a, const MatrixT<T>& b) {
  detail::require(a.same_shape(b), "sub: shape mismatch");
  MatrixT<T> c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

template <typename T>
MatrixT<T> hadamard(const MatrixT<T>& a, const MatrixT<T>& b) {
  detail::require(a.same_shape(b), "hadamard: shape mismatch");
  MatrixT<T> c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

template <typename T>
MatrixT<T> scale(const MatrixT<T>& a, T s) {
  MatrixT<T> c = a;
  for (auto& v : c.data()) v *= s;
  return c;
}

template <typename T>
T frobenius_sq(const MatrixT<T>& a) {
  T acc = T(0);
  for (T v : a.data()) acc += v * v;
  return acc;
}

template <typename T>
T frobenius(const MatrixT<T>& a) {
  return std::sqrt(frobenius_sq(a));
}

template <typename T>
T max_abs(const MatrixT<T>& a) {
  T m = T(0);
  for (T v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
T row_norm(const MatrixT<T>& a, int r) {
  const T* p = a.row_ptr(r);
  T acc = T(0);
  for (int j = 0; j < a.cols(); ++j) acc += p[j] * p[j];
  return std::sqrt(acc);
}

// Rows scaled to unit Euclidean norm. A row with norm below `min_norm` has no
// defined direction and raises NumericError.
template <typename T>
MatrixT<T> normalize_rows(const MatrixT<T>& a, T min_norm = T(1e-12)) {
  MatrixT<T> out = a;
  for (int i = 0; i < a.rows(); ++i) {
    T n = row_norm(a, i);
    if (n < min_norm)
      throw NumericError("normalize_rows: row " + std::to_string(i) + " has undefined direction (norm ~ 0)");
    T* p = out.row_ptr(i);
    for (int j = 0; j < a.cols(); ++j) p[j] /= n;
  }
  return out;
}

template <typename T>
MatrixT<T> extract_row(const MatrixT<T>& a, int r) {
  MatrixT<T> out(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) out(0, j) = a(r, j);
  return out;
}

template <typename T>
MatrixT<T> take_rows(const MatrixT<T>& a, const std::vector<int>& idx) {
  MatrixT<T> out(static_cast<int>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a.rows()) throw ContractError("take_rows: index out of range");
    for (int j = 0; j < a.cols(); ++j) out(static_cast<int>(i), j) = a(idx[i], j);
  }
  return out;
}

template <typename T>
MatrixT<T> vstack(const MatrixT<T>& a, const MatrixT<T>& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  detail::require(a.cols() == b.cols(), "vstack: column counts disagree");
  MatrixT<T> out(a.rows() + b.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
  for (int i = 0; i < b.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) out(a.rows() + i, j) = b(i, j);
  return out;
}

template <typename T>
MatrixT<T> hconcat(const MatrixT<T>& a, const MatrixT<T>& b) {
  detail::require(a.rows() == b.rows(), "hconcat: row counts disagree");
  MatrixT<T> out(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

template <typename T>
MatrixT<T> col_mean(const MatrixT<T>& a) {
  detail::require(a.rows() > 0, "col_mean: empty matrix");
  MatrixT<T> out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
  for (int j = 0; j < a.cols(); ++j) out(0, j) /= T(a.rows());
  return out;
}

// Cholesky factor of a (near-)PSD symmetric matrix. Returns lower-triangular L
// with L*L^T = s + jitter*I. On pivot failure the jitter escalates from 1e-6
// by factors of ten, three retries, then NotPsdError.
template <typename T>
MatrixT<T> cholesky_psd(const MatrixT<T>& s, T jitter = T(0)) {
  if (s.rows() != s.cols()) throw ShapeError("cholesky_psd: matrix must be square");
  if (jitter < T(0)) throw ContractError("cholesky_psd: jitter must be nonnegative");
  const int d = s.rows();
  const T sym_tol = T(1e-8) * std::max(T(1), max_abs(s));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (std::abs(s(i, j) - s(j, i)) > sym_tol)
        throw ContractError("cholesky_psd: matrix is not symmetric within tolerance");

  auto attempt = [&](T eps, MatrixT<T>& l) -> bool {
    l = MatrixT<T>(d, d);
    for (int j = 0; j < d; ++j) {
      T diag = s(j, j) + eps;
      for (int k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
      if (!(diag > T(0)) || !std::isfinite(static_cast<double>(diag))) return false;
      const T ljj = std::sqrt(diag);
      l(j, j) = ljj;
      for (int i = j + 1; i < d; ++i) {
        T acc = s(i, j);
        for (int k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
        l(i, j) = acc / ljj;
      }
    }
    return true;
  };

  MatrixT<T> l;
  if (attempt(jitter, l)) return l;
  T eps = T(1e-6);
  for (int retry = 0; retry < 3; ++retry, eps *= T(10))
    if (attempt(eps, l)) return l;
  throw NotPsdError("cholesky_psd: pivot failure after jitter escalation; matrix is not PSD");
}

}  // namespace dgz
