#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "dgz/binio.hpp"
#include "dgz/matrix.hpp"
#include "dgz/rng.hpp"
#include "dgz/tape.hpp"

namespace dgz {

enum class Activation : std::uint8_t { kNone = 0, kRelu = 1, kLeakyRelu = 2, kTanh = 3 };

// Fully-connected architecture description: layer_dims = [d_in, h_1, ..., d_out].
struct MlpSpec {
  std::vector<int> layer_dims;
  Activation hidden_activation = Activation::kLeakyRelu;
  double leaky_slope = 0.2;
  Activation output_activation = Activation::kNone;

  int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  int in_dim() const { return layer_dims.front(); }
  int out_dim() const { return layer_dims.back(); }

  void validate() const {
    if (layer_dims.size() < 2) throw ContractError("MlpSpec: need at least one layer (two dims)");
    for (int d : layer_dims)
      if (d <= 0) throw ContractError("MlpSpec: layer dims must be positive");
    if (leaky_slope < 0) throw ContractError("MlpSpec: leaky slope must be nonnegative");
  }
};

// Multilayer perceptron with per-layer weight (d_out x d_in) and bias (1 x d_out).
struct Mlp {
  MlpSpec spec;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  std::vector<Matrix*> params() {
    std::vector<Matrix*> out;
    for (auto& w : weights) out.push_back(&w);
    for (auto& b : biases) out.push_back(&b);
    return out;
  }

  void validate() const {
    spec.validate();
    if (static_cast<int>(weights.size()) != spec.num_layers() || weights.size() != biases.size())
      throw ContractError("Mlp: layer count disagrees with spec");
    for (int l = 0; l < spec.num_layers(); ++l) {
      if (weights[l].rows() != spec.layer_dims[l + 1] || weights[l].cols() != spec.layer_dims[l])
        throw ShapeError("Mlp: weight shape disagrees with spec at layer " + std::to_string(l));
      if (biases[l].rows() != 1 || biases[l].cols() != spec.layer_dims[l + 1])
        throw ShapeError("Mlp: bias shape disagrees with spec at layer " + std::to_string(l));
      if (!weights[l].all_finite() || !biases[l].all_finite())
        throw NumericError("Mlp: non-finite parameter at layer " + std::to_string(l));
    }
  }
};

// He-style init: weights ~ N(0, 2/fan_in), biases zero.
inline Mlp init_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp net;
  net.spec = spec;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int fan_in = spec.layer_dims[l];
    const int fan_out = spec.layer_dims[l + 1];
    const double std = std::sqrt(2.0 / fan_in);
    net.weights.push_back(rng.gaussian_matrix<double>(fan_out, fan_in, std));
    net.biases.push_back(Matrix(1, fan_out));
  }
  return net;
}

namespace detail {
inline void apply_activation(Matrix& m, Activation act, double slope) {
  switch (act) {
    case Activation::kNone:
      break;
    case Activation::kRelu:
      for (auto& v : m.data())
        if (v < 0) v = 0;
      break;
    case Activation::kLeakyRelu:
      for (auto& v : m.data())
        if (v < 0) v *= slope;
      break;
    case Activation::kTanh:
      for (auto& v : m.data()) v = std::tanh(v);
      break;
  }
}
}  // namespace detail

// Plain forward pass: rows of x are samples.
inline Matrix mlp_forward(const Mlp& net, const Matrix& x) {
  if (x.cols() != net.spec.in_dim())
    throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, net expects " +
                     std::to_string(net.spec.in_dim()));
  Matrix h = x;
  for (int l = 0; l < net.spec.num_layers(); ++l) {
    Matrix z = matmul_nt(h, net.weights[l]);
    for (int i = 0; i < z.rows(); ++i) {
      double* zp = z.row_ptr(i);
      const double* bp = net.biases[l].row_ptr(0);
      for (int j = 0; j < z.cols(); ++j) zp[j] += bp[j];
    }
    const bool last = (l == net.spec.num_layers() - 1);
    detail::apply_activation(z, last ? net.spec.output_activation : net.spec.hidden_activation,
                             net.spec.leaky_slope);
    h = std::move(z);
  }
  return h;
}

// Tape-resident copy of an Mlp: parameters become leaves so gradients() can
// reach them, and the forward pass is recorded (hence differentiable, twice).
struct TapedMlp {
  MlpSpec spec;
  std::vector<Var> weights;
  std::vector<Var> biases;

  std::vector<Var> params() const {
    std::vector<Var> out;
    out.insert(out.end(), weights.begin(), weights.end());
    out.insert(out.end(), biases.begin(), biases.end());
    return out;
  }

  Var forward(Var x) const {
    Tape& tape = *x.tape;
    if (tape.value(x).cols() != spec.in_dim()) throw ShapeError("TapedMlp: input width mismatch");
    Var h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const int n = tape.value(h).rows();
      Var z = matmul_nt(h, weights[l]) + bcast_rows(biases[l], n);
      const bool last = (l + 1 == weights.size());
      const Activation act = last ? spec.output_activation : spec.hidden_activation;
      if (act == Activation::kRelu) z = relu(z);
      if (act == Activation::kLeakyRelu) z = leaky_relu(z, spec.leaky_slope);
      if (act == Activation::kTanh) z = tanh(z);
      h = z;
    }
    return h;
  }
};

inline TapedMlp lift(Tape& tape, const Mlp& net) {
  net.validate();
  TapedMlp tnet;
  tnet.spec = net.spec;
  for (const auto& w : net.weights) tnet.weights.push_back(tape.leaf(w));
  for (const auto& b : net.biases) tnet.biases.push_back(tape.leaf(b));
  return tnet;
}

// --- checkpoint format -------------------------------------------------------
//
// "DGZW" | u32 layer_count | u32 dims[layer_count+1]
//        | u8 hidden_activation | u8 output_activation | f32 leaky_slope
//        | per layer: f32 weights row-major (dims[l+1] x dims[l]), f32 biases (dims[l+1])
// All integers and floats little-endian.

inline void save_mlp(const Mlp& net, const std::string& path) {
  net.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_mlp: cannot open " + path);
  binio::write_magic(os, "DGZW");
  binio::write_u32(os, static_cast<std::uint32_t>(net.spec.num_layers()));
  for (int d : net.spec.layer_dims) binio::write_u32(os, static_cast<std::uint32_t>(d));
  binio::write_u8(os, static_cast<std::uint8_t>(net.spec.hidden_activation));
  binio::write_u8(os, static_cast<std::uint8_t>(net.spec.output_activation));
  binio::write_f32(os, static_cast<float>(net.spec.leaky_slope));
  for (int l = 0; l < net.spec.num_layers(); ++l) {
    for (double v : net.weights[l].data()) binio::write_f32(os, static_cast<float>(v));
    for (double v : net.biases[l].data()) binio::write_f32(os, static_cast<float>(v));
  }
  if (!os) throw FormatError("save_mlp: write failed for " + path);
}

inline Mlp load_mlp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_mlp: cannot open " + path);
  binio::expect_magic(is, "DGZW", "load_mlp(" + path + ")");
  const std::uint32_t layers = binio::read_u32(is);
  if (layers == 0 || layers > 64) throw FormatError("load_mlp: implausible layer count");
  Mlp net;
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const std::uint32_t d = binio::read_u32(is);
    if (d == 0 || d > (1u << 24)) throw FormatError("load_mlp: implausible layer dim");
    net.spec.layer_dims.push_back(static_cast<int>(d));
  }
  const std::uint8_t ha = binio::read_u8(is);
  const std::uint8_t oa = binio::read_u8(is);
  if (ha > 3 || oa > 3) throw FormatError("load_mlp: unknown activation code");
  net.spec.hidden_activation = static_cast<Activation>(ha);
  net.spec.output_activation = static_cast<Activation>(oa);
  net.spec.leaky_slope = binio::read_f32(is);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const int rows = net.spec.layer_dims[l + 1];
    const int cols = net.spec.layer_dims[l];
    Matrix w(rows, cols);
    for (auto& v : w.data()) v = binio::read_f32(is);
    Matrix b(1, rows);
    for (auto& v : b.data()) v = binio::read_f32(is);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  net.validate();
  return net;
}

}  // namespace dgz
