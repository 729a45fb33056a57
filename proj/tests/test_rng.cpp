#include <catch2/catch_amalgamated.hpp>

#include "dgz/matrix.hpp"
#include "dgz/rng.hpp"

using namespace dgz;

TEST_CASE("same seed reproduces the sample sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) CHECK(c.gaussian() == d.gaussian());
}

TEST_CASE("uniform stays in [0,1) and uniform_open in (0,1]") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng rng2(3);
  for (int i = 0; i < 10000; ++i) {
    double u = rng2.uniform_open();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("gaussian moments near standard normal") {
  Rng rng(5);
  const int n = 100000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    s1 += g;
    s2 += g * g;
  }
  CHECK(std::abs(s1 / n) < 0.02);
  CHECK(std::abs(s2 / n - 1.0) < 0.03);
}

TEST_CASE("sample_gaussian with zero chol collapses to the mean") {
  Matrix mean(1, 3, {1, -2, 0.5});
  Matrix chol(3, 3);
  Rng rng(9);
  Matrix s = sample_gaussian(mean, chol, 5, rng);
  REQUIRE(s.rows() == 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) CHECK(s(i, j) == mean(0, j));
}

TEST_CASE("sample_gaussian determinism and empty draw") {
  Matrix mean(1, 2, {0, 0});
  Matrix chol = Matrix::identity(2);
  Rng a(123), b(123);
  Matrix sa = sample_gaussian(mean, chol, 50, a);
  Matrix sb = sample_gaussian(mean, chol, 50, b);
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa.data()[i] == sb.data()[i]);
  Rng c(1);
  Matrix empty = sample_gaussian(mean, chol, 0, c);
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 2);
}

TEST_CASE("sample covariance near identity at n=10000") {
  const int d = 4, n = 10000;
  Matrix mean(1, d);
  Matrix chol = Matrix::identity(d);
  Rng rng(77);
  Matrix s = sample_gaussian(mean, chol, n, rng);
  Matrix mu = col_mean(s);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double cov = 0;
      for (int k = 0; k < n; ++k) cov += (s(k, i) - mu(0, i)) * (s(k, j) - mu(0, j));
      cov /= n - 1;
      const double want = i == j ? 1.0 : 0.0;
      CHECK(std::abs(cov - want) < 0.1);
    }
  }
}

TEST_CASE("sample_gaussian reproduces a target covariance through its factor") {
  // Draw through L from a known SPD S = L L^T and recover S statistically.
  Matrix s(2, 2, {2.0, 0.6, 0.6, 1.0});
  Matrix l = cholesky_psd(s);
  Matrix mean(1, 2, {3, -1});
  Rng rng(2024);
  Matrix x = sample_gaussian(mean, l, 20000, rng);
  Matrix mu = col_mean(x);
  CHECK(std::abs(mu(0, 0) - 3.0) < 0.05);
  CHECK(std::abs(mu(0, 1) + 1.0) < 0.05);
  double c00 = 0, c01 = 0, c11 = 0;
  for (int k = 0; k < x.rows(); ++k) {
    const double a = x(k, 0) - mu(0, 0), b = x(k, 1) - mu(0, 1);
    c00 += a * a;
    c01 += a * b;
    c11 += b * b;
  }
  const double n1 = x.rows() - 1.0;
  CHECK(std::abs(c00 / n1 - 2.0) < 0.1);
  CHECK(std::abs(c01 / n1 - 0.6) < 0.1);
  CHECK(std::abs(c11 / n1 - 1.0) < 0.1);
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  Rng a(31), b(31);
  auto va = v, vb = v;
  a.shuffle(va);
  b.shuffle(vb);
  CHECK(va == vb);
  std::vector<int> sorted = va;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);
}

TEST_CASE("mix produces distinct substream seeds") {
  CHECK(Rng::mix(1, 0) != Rng::mix(1, 1));
  CHECK(Rng::mix(1, 0) != Rng::mix(2, 0));
  CHECK(Rng::mix(5, 3) == Rng::mix(5, 3));
}
