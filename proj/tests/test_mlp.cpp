#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "dgz/adam.hpp"
#include "dgz/mlp.hpp"
#include "dgz/rng.hpp"
#include "dgz/tape.hpp"

using namespace dgz;

TEST_CASE("init_mlp zero biases and determinism") {
  MlpSpec spec{{4, 8, 1}};
  Rng r1(9), r2(9);
  Mlp a = init_mlp(spec, r1);
  Mlp b = init_mlp(spec, r2);
  for (const auto& bias : a.biases) CHECK(max_abs(bias) == 0.0);
  for (std::size_t l = 0; l < a.weights.size(); ++l)
    for (std::size_t i = 0; i < a.weights[l].size(); ++i)
      CHECK(a.weights[l].data()[i] == b.weights[l].data()[i]);
}

TEST_CASE("init_mlp weight std tracks sqrt(2/fan_in)") {
  MlpSpec spec{{1024, 64}};
  Rng rng(123);
  Mlp net = init_mlp(spec, rng);
  double s2 = 0;
  for (double v : net.weights[0].data()) s2 += v * v;
  const double std_hat = std::sqrt(s2 / net.weights[0].size());
  const double target = std::sqrt(2.0 / 1024.0);
  CHECK(std_hat > 0.8 * target);
  CHECK(std_hat < 1.2 * target);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(MlpSpec{{4}}.validate(), ContractError);
  CHECK_THROWS_AS((MlpSpec{{4, 0, 2}}).validate(), ContractError);
}

TEST_CASE("identity network reproduces its input") {
  Mlp net;
  net.spec = MlpSpec{{3, 3}};
  net.weights = {Matrix::identity(3)};
  net.biases = {Matrix(1, 3)};
  Matrix x(2, 3, {1, -2, 3, 0.5, 0, -1});
  Matrix y = mlp_forward(net, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("leaky activation value on a pass-through stack") {
  Mlp net;
  net.spec = MlpSpec{{1, 1, 1}};
  net.weights = {Matrix::identity(1), Matrix::identity(1)};
  net.biases = {Matrix(1, 1), Matrix(1, 1)};
  Matrix y = mlp_forward(net, Matrix(1, 1, {-1}));
  CHECK(std::abs(y(0, 0) + 0.2) < 1e-15);
}

TEST_CASE("zero weights give constant rows equal to the bias") {
  Mlp net;
  net.spec = MlpSpec{{4, 2}};
  net.weights = {Matrix(2, 4)};
  net.biases = {Matrix(1, 2, {0.3, -0.7})};
  Matrix y = mlp_forward(net, Matrix::filled(3, 4, 5.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(y(i, 0) == 0.3);
    CHECK(y(i, 1) == -0.7);
  }
}

TEST_CASE("all-linear net equals the composed affine map") {
  MlpSpec spec{{3, 4, 2}};
  spec.hidden_activation = Activation::kNone;
  Rng rng(17);
  Mlp net = init_mlp(spec, rng);
  for (auto& b : net.biases)
    for (auto& v : b.data()) v = rng.gaussian();
  Matrix x = rng.gaussian_matrix<double>(5, 3);
  Matrix y = mlp_forward(net, x);
  // Composed map: y = (x W1^T + b1) W2^T + b2
  Matrix h = matmul_nt(x, net.weights[0]);
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < h.cols(); ++j) h(i, j) += net.biases[0](0, j);
  Matrix z = matmul_nt(h, net.weights[1]);
  for (int i = 0; i < z.rows(); ++i)
    for (int j = 0; j < z.cols(); ++j) z(i, j) += net.biases[1](0, j);
  CHECK(frobenius(sub(y, z)) < 1e-12);
}

TEST_CASE("taped forward matches plain forward") {
  MlpSpec spec{{6, 10, 4}};
  spec.output_activation = Activation::kRelu;
  Rng rng(29);
  Mlp net = init_mlp(spec, rng);
  Matrix x = rng.gaussian_matrix<double>(7, 6);
  Matrix plain = mlp_forward(net, x);
  Tape tape;
  TapedMlp tnet = lift(tape, net);
  Var y = tnet.forward(tape.constant(x));
  CHECK(frobenius(sub(tape.value(y), plain)) == 0.0);
}

TEST_CASE("checkpoint roundtrip preserves structure and float32 values") {
  MlpSpec spec{{5, 7, 2}};
  spec.output_activation = Activation::kRelu;
  Rng rng(41);
  Mlp net = init_mlp(spec, rng);
  const auto path = std::filesystem::temp_directory_path() / "dgz_test_net.dgzw";
  save_mlp(net, path.string());
  Mlp back = load_mlp(path.string());
  REQUIRE(back.spec.layer_dims == net.spec.layer_dims);
  CHECK(back.spec.hidden_activation == net.spec.hidden_activation);
  CHECK(back.spec.output_activation == net.spec.output_activation);
  CHECK(back.spec.leaky_slope == Catch::Approx(0.2));
  for (std::size_t l = 0; l < net.weights.size(); ++l)
    for (std::size_t i = 0; i < net.weights[l].size(); ++i)
      CHECK(back.weights[l].data()[i] ==
            static_cast<double>(static_cast<float>(net.weights[l].data()[i])));
  // A second roundtrip is lossless (already float32-quantized).
  const auto path2 = std::filesystem::temp_directory_path() / "dgz_test_net2.dgzw";
  save_mlp(back, path2.string());
  Mlp back2 = load_mlp(path2.string());
  for (std::size_t l = 0; l < back.weights.size(); ++l)
    for (std::size_t i = 0; i < back.weights[l].size(); ++i)
      CHECK(back2.weights[l].data()[i] == back.weights[l].data()[i]);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("tanh hidden units: forward reference, taped parity, checkpoint roundtrip") {
  MlpSpec spec{{3, 4, 2}};
  spec.hidden_activation = Activation::kTanh;
  Rng rng(43);
  Mlp net = init_mlp(spec, rng);
  const Matrix x = rng.gaussian_matrix<double>(5, 3);

  // Reference: hand-computed tanh(x W1^T + b1) W2^T + b2.
  Matrix h = matmul_nt(x, net.weights[0]);
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < h.cols(); ++j) h(i, j) = std::tanh(h(i, j) + net.biases[0](0, j));
  Matrix want = matmul_nt(h, net.weights[1]);
  for (int i = 0; i < want.rows(); ++i)
    for (int j = 0; j < want.cols(); ++j) want(i, j) += net.biases[1](0, j);

  const Matrix got = mlp_forward(net, x);
  REQUIRE(got.same_shape(want));
  for (int i = 0; i < got.rows(); ++i)
    for (int j = 0; j < got.cols(); ++j) CHECK(got(i, j) == Catch::Approx(want(i, j)).epsilon(1e-12));

  Tape t;
  TapedMlp taped = lift(t, net);
  const Matrix& taped_out = t.value(taped.forward(t.constant(x)));
  for (int i = 0; i < got.rows(); ++i)
    for (int j = 0; j < got.cols(); ++j) CHECK(taped_out(i, j) == got(i, j));

  const auto path = std::filesystem::temp_directory_path() / "dgz_test_tanh.dgzw";
  save_mlp(net, path.string());
  Mlp back = load_mlp(path.string());
  CHECK(back.spec.hidden_activation == Activation::kTanh);
  std::filesystem::remove(path);
}

TEST_CASE("load_mlp rejects bad magic") {
  const auto path = std::filesystem::temp_directory_path() / "dgz_bad_magic.dgzw";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE1234";
  }
  CHECK_THROWS_AS(load_mlp(path.string()), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Matrix p(2, 2, {1, 2, 3, 4});
  Adam opt;
  opt.step({&p}, {Matrix(2, 2)});
  CHECK(p(0, 0) == 1.0);
  CHECK(p(1, 1) == 4.0);
}

TEST_CASE("adam: first step moves a scalar by about -lr") {
  Matrix p(1, 1, {0.0});
  Adam opt(AdamConfig{.lr = 1e-4});
  opt.step({&p}, {Matrix(1, 1, {1.0})});
  CHECK(std::abs(p(0, 0) + 1e-4) < 1e-8);
}

TEST_CASE("adam: beta1=beta2=0 with tiny eps degenerates to sign-SGD") {
  Matrix p(1, 2, {0.0, 0.0});
  Adam opt(AdamConfig{.lr = 0.01, .beta1 = 0.0, .beta2 = 0.0, .eps = 1e-12});
  opt.step({&p}, {Matrix(1, 2, {0.5, -2.0})});
  CHECK(std::abs(p(0, 0) + 0.01) < 1e-9);
  CHECK(std::abs(p(0, 1) - 0.01) < 1e-9);
}

TEST_CASE("adam: identical runs give identical trajectories") {
  auto run = [] {
    Rng rng(3);
    Matrix p = rng.gaussian_matrix<double>(3, 3);
    Adam opt(AdamConfig{.lr = 0.05});
    for (int i = 0; i < 20; ++i) {
      Matrix g = p;  // gradient of 0.5||p||^2
      opt.step({&p}, {g});
    }
    return p;
  };
  Matrix a = run(), b = run();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("adam: NaN gradient aborts the step without touching parameters") {
  Matrix p(1, 1, {2.0});
  Adam opt;
  Matrix g(1, 1, {std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(opt.step({&p}, {g}), TrainingError);
  CHECK(p(0, 0) == 2.0);
}

TEST_CASE("adam: shape mismatch is rejected") {
  Matrix p(2, 2);
  Adam opt;
  CHECK_THROWS_AS(opt.step({&p}, {Matrix(2, 3)}), ShapeError);
}
