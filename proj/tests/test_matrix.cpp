#include <catch2/catch_amalgamated.hpp>

#include "dgz/matrix.hpp"
#include "dgz/rng.hpp"

using namespace dgz;

namespace {
double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}
}  // namespace

TEST_CASE("matmul identity case") {
  Matrix b(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(max_abs_diff(matmul(Matrix::identity(2), b), b) == 0.0);
}

TEST_CASE("matmul hand arithmetic") {
  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix b(2, 1, {5, 6});
  Matrix c = matmul(a, b);
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 1);
  CHECK(c(0, 0) == 17.0);
  CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul annihilator") {
  Matrix z(3, 2);
  Matrix b(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(max_abs(matmul(z, b)) == 0.0);
}

TEST_CASE("matmul shape error") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(2, 2, {1, 2, 3, 4});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("matmul transposed variants agree with explicit transpose") {
  Rng rng(7);
  Matrix a = rng.gaussian_matrix<double>(5, 3);
  Matrix b = rng.gaussian_matrix<double>(4, 3);
  CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, transpose(b))) < 1e-14);
  Matrix c = rng.gaussian_matrix<double>(5, 4);
  CHECK(max_abs_diff(matmul_tn(a, c), matmul(transpose(a), c)) < 1e-14);
}

TEST_CASE("cholesky identity") {
  Matrix l = cholesky_psd(Matrix::identity(4));
  CHECK(max_abs_diff(l, Matrix::identity(4)) == 0.0);
}

TEST_CASE("cholesky diagonal square roots") {
  Matrix s(2, 2, {4, 0, 0, 9});
  Matrix l = cholesky_psd(s);
  CHECK(l(0, 0) == 2.0);
  CHECK(l(1, 1) == 3.0);
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == 0.0);
}

TEST_CASE("cholesky reconstruction for random PSD matrix") {
  Rng rng(11);
  Matrix a = rng.gaussian_matrix<double>(8, 8);
  Matrix s = matmul_nt(a, a);  // A A^T is PSD
  Matrix l = cholesky_psd(s);
  Matrix rec = matmul_nt(l, l);
  CHECK(frobenius(sub(rec, s)) / frobenius(s) < 1e-8);
  for (int i = 0; i < l.rows(); ++i)
    for (int j = i + 1; j < l.cols(); ++j) CHECK(l(i, j) == 0.0);
}

TEST_CASE("cholesky rejects asymmetric input") {
  Matrix s(2, 2, {1, 0.5, 0.1, 1});
  CHECK_THROWS_AS(cholesky_psd(s), ContractError);
}

TEST_CASE("cholesky rejects negative definite input after escalation") {
  Matrix s(2, 2, {-1, 0, 0, -1});
  CHECK_THROWS_AS(cholesky_psd(s), NotPsdError);
}

TEST_CASE("cholesky jitter rescues singular matrix") {
  // Rank-1 PSD matrix: plain pivoting may hit an exact zero; escalation fixes it.
  Matrix s(2, 2, {1, 1, 1, 1});
  Matrix l = cholesky_psd(s);
  Matrix rec = matmul_nt(l, l);
  CHECK(frobenius(sub(rec, s)) < 1e-3);  // small jitter allowed
}

TEST_CASE("normalize_rows produces unit rows and rejects zero rows") {
  Matrix a(2, 2, {3, 4, 0.6, 0.8});
  Matrix n = normalize_rows(a);
  CHECK(std::abs(row_norm(n, 0) - 1.0) < 1e-12);
  CHECK(std::abs(n(0, 0) - 0.6) < 1e-12);
  Matrix z(1, 3);
  CHECK_THROWS_AS(normalize_rows(z), NumericError);
}

TEST_CASE("vstack hconcat take_rows roundtrip") {
  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix b(1, 2, {5, 6});
  Matrix v = vstack(a, b);
  REQUIRE(v.rows() == 3);
  CHECK(v(2, 1) == 6.0);
  Matrix t = take_rows(v, {2, 0});
  CHECK(t(0, 0) == 5.0);
  CHECK(t(1, 1) == 2.0);
  Matrix h = hconcat(a, a);
  REQUIRE(h.cols() == 4);
  CHECK(h(1, 3) == 4.0);
  CHECK_THROWS_AS(take_rows(v, {3}), ContractError);
}

TEST_CASE("col_mean averages columns") {
  Matrix a(2, 2, {1, 10, 3, 30});
  Matrix m = col_mean(a);
  CHECK(m(0, 0) == 2.0);
  CHECK(m(0, 1) == 20.0);
}
