#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "dgz/matrix.hpp"

namespace dgz {

// Deterministic random stream: a splitmix-style 64-bit integer generator
// feeding a Box-Muller Gaussian transform. The algorithm is fixed so that the
// same seed yields the same sample sequence on every platform, which lets
// golden files be shared across reimplementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe under log().
  double uniform_open() { return 1.0 - uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; the paired draw is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T = double>
  MatrixT<T> gaussian_matrix(int rows, int cols, T stddev = T(1)) {
    MatrixT<T> m(rows, cols);
    for (auto& v : m.data()) v = static_cast<T>(stddev * gaussian());
    return m;
  }

  template <typename T = double>
  MatrixT<T> uniform_matrix(int rows, int cols) {
    MatrixT<T> m(rows, cols);
    for (auto& v : m.data()) v = static_cast<T>(uniform());
    return m;
  }

  void shuffle(std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent substream; used for per-class sampling and per-stage seeding.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return r.next_u64();
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Rows are mean + chol * z with z standard normal, drawn row-major. A zero
// chol collapses every row onto the mean. n = 0 yields an empty matrix.
template <typename T>
MatrixT<T> sample_gaussian(const MatrixT<T>& mean, const MatrixT<T>& chol, int n, Rng& rng) {
  if (mean.rows() != 1) throw ShapeError("sample_gaussian: mean must be a row vector");
  const int d = mean.cols();
  if (chol.rows() != d || chol.cols() != d)
    throw ShapeError("sample_gaussian: chol must be d x d for a d-dimensional mean");
  MatrixT<T> out(n, d);
  std::vector<T> z(static_cast<std::size_t>(d));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) z[k] = static_cast<T>(rng.gaussian());
    T* row = out.row_ptr(i);
    for (int j = 0; j < d; ++j) {
      T acc = mean(0, j);
      const T* lj = chol.row_ptr(j);
      for (int k = 0; k <= j; ++k) acc += lj[k] * z[k];
      row[j] = acc;
    }
  }
  return out;
}

}  // namespace dgz
