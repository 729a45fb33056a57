#pragma once

#include <functional>
#include <vector>

#include "dgz/losses.hpp"
#include "dgz/matrix.hpp"
#include "dgz/tape.hpp"

namespace dgz {

// The two forces acting on a class-weight row under temperature CE:
//   pull = (1/(n tau)) * sum of samples labeled k
//   push = -(1/(n tau)) * sum over all samples of p_k(x_j) x_j
// and pull + push = -dL/dW_k.
struct CeGradParts {
  Matrix pull;  // 1 x d
  Matrix push;  // 1 x d
};

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    double m = logits(i, 0);
    for (int j = 1; j < logits.cols(); ++j) m = std::max(m, logits(i, j));
    double z = 0;
    for (int j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp(logits(i, j) - m);
      z += p(i, j);
    }
    for (int j = 0; j < logits.cols(); ++j) p(i, j) /= z;
  }
  return p;
}

inline CeGradParts ce_grad_decomposition(const LogitContext& ctx, int k) {
  ctx.validate();
  if (k < 0 || k >= ctx.num_classes())
    throw ContractError("ce_grad_decomposition: class id out of range");
  const int n = ctx.num_samples(), d = ctx.features.cols();
  const double inv_ntau = 1.0 / (n * ctx.tau);
  const Matrix p = softmax_rows(logits_of(ctx));
  CeGradParts parts{Matrix(1, d), Matrix(1, d)};
  for (int i = 0; i < n; ++i) {
    const double* xi = ctx.features.row_ptr(i);
    if (ctx.labels[static_cast<std::size_t>(i)] == k)
      for (int j = 0; j < d; ++j) parts.pull(0, j) += inv_ntau * xi[j];
    const double pk = p(i, k);
    for (int j = 0; j < d; ++j) parts.push(0, j) -= inv_ntau * pk * xi[j];
  }
  return parts;
}

// The three displayed terms of the incremental-loss gradient at an unseen
// class's weight row; their sum equals -dL/dW_u.
struct IceUnseenGradTerms {
  Matrix unseen_pull;   // (l2/(n tau)) sum of unseen-labeled samples of class u
  Matrix unseen_push;   // -(l2/(n tau)) sum over unseen-labeled samples of p_u x
  Matrix seen_leakage;  // -(1/(n tau)) sum over seen-labeled of l1 p_u/(p_s + l1 p_u) x
  Matrix sum() const { return add(add(unseen_pull, unseen_push), seen_leakage); }
};

inline IceUnseenGradTerms rce_unseen_grad(const LogitContext& ctx, double l1, double l2, int u) {
  ctx.validate();
  const auto part = ctx.partition();
  if (u < 0 || u >= ctx.num_classes() || part[static_cast<std::size_t>(u)] >= 0)
    throw ContractError("rce_unseen_grad: class id is not unseen");
  const int n = ctx.num_samples(), d = ctx.features.cols();
  const double inv_ntau = 1.0 / (n * ctx.tau);
  const Matrix p = softmax_rows(logits_of(ctx));

  IceUnseenGradTerms t{Matrix(1, d), Matrix(1, d), Matrix(1, d)};
  for (int i = 0; i < n; ++i) {
    const double* xi = ctx.features.row_ptr(i);
    const int y = ctx.labels[static_cast<std::size_t>(i)];
    const double pu = p(i, u);
    if (part[static_cast<std::size_t>(y)] < 0) {   // unseen-labeled (pseudo) sample
      if (y == u)
        for (int j = 0; j < d; ++j) t.unseen_pull(0, j) += l2 * inv_ntau * xi[j];
      for (int j = 0; j < d; ++j) t.unseen_push(0, j) -= l2 * inv_ntau * pu * xi[j];
    } else {                                        // seen-labeled sample
      double ps_mass = 0, pu_mass = 0;
      for (int c = 0; c < ctx.num_classes(); ++c)
        (part[static_cast<std::size_t>(c)] > 0 ? ps_mass : pu_mass) += p(i, c);
      const double w = l1 * pu / (ps_mass + l1 * pu_mass);
      for (int j = 0; j < d; ++j) t.seen_leakage(0, j) -= inv_ntau * w * xi[j];
    }
  }
  return t;
}

// Central-difference sweep over every parameter coordinate; returns the worst
// relative error against the supplied analytic gradient. Small instances only.
inline double finite_diff_check(const std::function<double(const Matrix&)>& loss,
                                const Matrix& params, const Matrix& analytic_grad, double eps) {
  if (eps <= 0) throw ContractError("finite_diff_check: eps must be positive");
  if (!params.same_shape(analytic_grad))
    throw ShapeError("finite_diff_check: gradient and parameter shapes disagree");
  Matrix probe = params;
  double worst = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe.data()[i];
    const double h = eps * std::max(1.0, std::abs(orig));
    probe.data()[i] = orig + h;
    const double fp = loss(probe);
    probe.data()[i] = orig - h;
    const double fm = loss(probe);
    probe.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_check: loss is not finite near the probe point");
    const double numeric = (fp - fm) / (2 * h);
    const double analytic = analytic_grad.data()[i];
    const double den = std::max({std::abs(numeric), std::abs(analytic), 1.0});
    worst = std::max(worst, std::abs(numeric - analytic) / den);
  }
  return worst;
}

// Tape gradient of the plain CE with respect to one weight row, negated —
// the quantity the decomposition above reconstructs.
inline Matrix ce_weight_row_neg_grad(const LogitContext& ctx, int k) {
  Tape tape;
  Var f = tape.constant(ctx.features);
  Var w = tape.leaf(ctx.class_weights);
  Var loss = cross_entropy_graph(tape, f, w, ctx.tau, ctx.labels);
  std::vector<Var> wrt{w};
  const Matrix g = tape.value(tape.gradients(loss, wrt)[0]);
  Matrix row(1, g.cols());
  for (int j = 0; j < g.cols(); ++j) row(0, j) = -g(k, j);
  return row;
}

// Same for the incremental loss at an unseen class row.
inline Matrix ice_weight_row_neg_grad(const LogitContext& ctx, double l1, double l2, int u) {
  Tape tape;
  Var f = tape.constant(ctx.features);
  Var w = tape.leaf(ctx.class_weights);
  Var loss = incremental_ce_graph(tape, f, w, ctx.tau, ctx.labels, ctx.partition(), l1, l2);
  std::vector<Var> wrt{w};
  const Matrix g = tape.value(tape.gradients(loss, wrt)[0]);
  Matrix row(1, g.cols());
  for (int j = 0; j < g.cols(); ++j) row(0, j) = -g(u, j);
  return row;
}

}  // namespace dgz
