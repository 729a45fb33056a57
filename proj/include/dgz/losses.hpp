#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include "dgz/matrix.hpp"
#include "dgz/mlp.hpp"
#include "dgz/rng.hpp"
#include "dgz/tape.hpp"

namespace dgz {

// Everything a softmax-family loss needs: features (one row per sample),
// class weights (one row per class id), temperature, labels, and the
// seen/unseen partition of class ids. Row normalization of features and
// weights is the caller's responsibility — the losses are defined for any
// real-valued rows, and the classifier pipeline normalizes before calling.
struct LogitContext {
  Matrix features;       // n x d
  Matrix class_weights;  // K x d, row c holds W_c
  double tau = 1.0;
  std::vector<int> labels;  // size n, values in [0, K)
  std::vector<int> seen_ids;
  std::vector<int> unseen_ids;

  int num_samples() const { return features.rows(); }
  int num_classes() const { return class_weights.rows(); }

  // Partition flags by class id: +1 seen, -1 unseen.
  std::vector<int> partition() const {
    std::vector<int> part(static_cast<std::size_t>(num_classes()), 0);
    for (int c : seen_ids) {
      if (c < 0 || c >= num_classes()) throw ContractError("LogitContext: seen id out of range");
      part[c] = 1;
    }
    for (int c : unseen_ids) {
      if (c < 0 || c >= num_classes()) throw ContractError("LogitContext: unseen id out of range");
      if (part[c] != 0) throw ContractError("LogitContext: seen and unseen ids overlap");
      part[c] = -1;
    }
    return part;
  }

  void validate() const {
    if (tau <= 0) throw ContractError("LogitContext: tau must be positive");
    if (features.cols() != class_weights.cols())
      throw ShapeError("LogitContext: feature and weight widths disagree");
    if (static_cast<int>(labels.size()) != num_samples())
      throw ContractError("LogitContext: one label per feature row required");
    const auto part = partition();
    for (std::size_t c = 0; c < part.size(); ++c)
      if (part[c] == 0)
        throw ContractError("LogitContext: class id " + std::to_string(c) +
                            " is neither seen nor unseen");
    for (int y : labels)
      if (y < 0 || y >= num_classes())
        throw ContractError("LogitContext: label " + std::to_string(y) + " outside class set");
  }

  bool label_is_seen(int i) const {
    for (int c : seen_ids)
      if (c == labels[static_cast<std::size_t>(i)]) return true;
    return false;
  }
};

inline Matrix logits_of(const LogitContext& ctx) {
  return scale(matmul_nt(ctx.features, ctx.class_weights), 1.0 / ctx.tau);
}

namespace detail {

inline Matrix onehot(const std::vector<int>& labels, int num_classes) {
  Matrix m(static_cast<int>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<int>(i), labels[i]) = 1.0;
  return m;
}

// Shared core of every softmax loss here:
//   loss = (1/n) sum_i omega_i * ( log sum_c mask_ic exp(l_ic - m_i) + m_i - l_{i,y_i} )
// with m the detached row max. mask_iy must be positive so the log argument
// never vanishes. Subtracting the max instead of the true-class logit is an
// exact transformation; gradients are unaffected because m is constant.
inline Var masked_softmax_ce(Tape& tape, Var logits, const Matrix& mask, const Matrix& omega,
                             const std::vector<int>& labels) {
  const Matrix& lv = tape.value(logits);
  const int n = lv.rows(), k = lv.cols();
  if (mask.rows() != n || mask.cols() != k) throw ShapeError("masked_softmax_ce: mask shape");
  if (omega.rows() != n || omega.cols() != 1) throw ShapeError("masked_softmax_ce: omega shape");

  // The max is taken over the mask's support so that columns with zero mask
  // leave no numerical trace at all: a loss with some classes masked out is
  // then bit-identical to the same loss computed without those columns.
  Matrix rowmax(n, 1);
  for (int i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j)
      if (mask(i, j) > 0) m = std::max(m, lv(i, j));
    if (!std::isfinite(m)) m = 0;  // empty support: z = 0 below either way
    rowmax(i, 0) = m;
  }
  Var m = tape.constant(rowmax);
  Var shifted = logits - bcast_cols(m, k);
  Var e = dgz::exp(shifted);
  Var z = row_sum(tape.constant(mask) * e);              // n x 1
  Var t = row_sum(logits * tape.constant(onehot(labels, k)));  // true-class logit
  Var per_sample = dgz::log(z) + m - t;
  return scale(sum(tape.constant(omega) * per_sample), 1.0 / n);
}

}  // namespace detail

// --- cross-entropy family ----------------------------------------------------

// Mean over samples of -log softmax at the true class (temperature applied).
inline Var cross_entropy_graph(Tape& tape, Var features, Var weights, double tau,
                               const std::vector<int>& labels) {
  Var logits = scale(matmul_nt(features, weights), 1.0 / tau);
  const int n = tape.value(features).rows();
  const int k = tape.value(weights).rows();
  return detail::masked_softmax_ce(tape, logits, Matrix::filled(n, k, 1.0),
                                   Matrix::filled(n, 1, 1.0), labels);
}

inline double cross_entropy(const LogitContext& ctx) {
  ctx.validate();
  Tape tape;
  return scalar_value(cross_entropy_graph(tape, tape.constant(ctx.features),
                                          tape.constant(ctx.class_weights), ctx.tau, ctx.labels));
}

// Incremental loss: seen-labeled samples pay -log( p_y / (p_s + l1 * p_u) )
// where p_s, p_u are the softmax mass on seen/unseen classes; unseen-labeled
// (pseudo) samples pay l2 * full CE. Mean over all samples, l2 inside it.
inline Var incremental_ce_graph(Tape& tape, Var features, Var weights, double tau,
                                const std::vector<int>& labels, const std::vector<int>& part,
                                double l1, double l2) {
  Var logits = scale(matmul_nt(features, weights), 1.0 / tau);
  const int n = tape.value(features).rows();
  const int k = tape.value(weights).rows();
  Matrix mask(n, k);
  Matrix omega(n, 1);
  for (int i = 0; i < n; ++i) {
    const bool seen_row = part[labels[static_cast<std::size_t>(i)]] > 0;
    omega(i, 0) = seen_row ? 1.0 : l2;
    for (int c = 0; c < k; ++c)
      mask(i, c) = seen_row ? (part[c] > 0 ? 1.0 : l1) : 1.0;
  }
  return detail::masked_softmax_ce(tape, logits, mask, omega, labels);
}

inline double incremental_ce(const LogitContext& ctx, double l1, double l2) {
  ctx.validate();
  if (l1 < 0 || l2 < 0) throw ContractError("incremental_ce: lambdas must be nonnegative");
  Tape tape;
  return scalar_value(incremental_ce_graph(tape, tape.constant(ctx.features),
                                           tape.constant(ctx.class_weights), ctx.tau, ctx.labels,
                                           ctx.partition(), l1, l2));
}

// Which unseen logit (if any) enters a seen sample's denominator:
//  kGlobalArgmax  — the sample's overall argmax column, weighted l1, only when
//                   that argmax is an unseen class (reference-code semantics);
//  kUnseenBeatsTrue — the best unseen column, weighted l1, when it beats the
//                   true-class logit (the looser gate stated in prose).
enum class RceGate { kGlobalArgmax, kUnseenBeatsTrue };

inline Var revised_ce_graph(Tape& tape, Var features, Var weights, double tau,
                            const std::vector<int>& labels, const std::vector<int>& part,
                            double l1, RceGate gate = RceGate::kGlobalArgmax) {
  Var logits = scale(matmul_nt(features, weights), 1.0 / tau);
  const Matrix& lv = tape.value(logits);
  const int n = lv.rows(), k = lv.cols();
  // The mask is built from logit values and deliberately treated as constant
  // with respect to the parameters, matching the reference semantics.
  Matrix mask = Matrix::filled(n, k, 1.0);
  Matrix omega = Matrix::filled(n, 1, 1.0);
  for (int i = 0; i < n; ++i) {
    if (part[labels[static_cast<std::size_t>(i)]] <= 0) continue;  // unseen-labeled: full CE
    for (int c = 0; c < k; ++c)
      if (part[c] < 0) mask(i, c) = 0.0;
    if (gate == RceGate::kGlobalArgmax) {
      int arg = 0;
      for (int c = 1; c < k; ++c)
        if (lv(i, c) > lv(i, arg)) arg = c;
      if (part[arg] < 0) mask(i, arg) = l1;
    } else {
      int best_u = -1;
      for (int c = 0; c < k; ++c)
        if (part[c] < 0 && (best_u < 0 || lv(i, c) > lv(i, best_u))) best_u = c;
      if (best_u >= 0 && lv(i, best_u) > lv(i, labels[static_cast<std::size_t>(i)]))
        mask(i, best_u) = l1;
    }
  }
  return detail::masked_softmax_ce(tape, logits, mask, omega, labels);
}

inline double revised_ce(const LogitContext& ctx, double l1, RceGate gate = RceGate::kGlobalArgmax) {
  ctx.validate();
  if (l1 < 0) throw ContractError("revised_ce: lambda must be nonnegative");
  Tape tape;
  return scalar_value(revised_ce_graph(tape, tape.constant(ctx.features),
                                       tape.constant(ctx.class_weights), ctx.tau, ctx.labels,
                                       ctx.partition(), l1, gate));
}

// --- adversarial objective ----------------------------------------------------

struct WganGpValues {
  double d_loss = 0;
  double g_loss = 0;
  double penalty = 0;  // unscaled: E[(|grad| - 1)^2]
};

// Recorded version of the critic/generator objectives, ready for gradients():
//   d_loss = -E[D(x,a)] + E[D(x~,a)] + l0 * E[(||grad_x^ D(x^,a)||_2 - 1)^2]
//   g_loss = -E[D(x~,a)]
// The fake batch is detached inside d_loss (the critic treats it as data),
// attached inside g_loss. The interpolate x^ = alpha x + (1-alpha) x~ is a
// fresh leaf so its gradient exists; the penalty reaches D's parameters
// because the backward pass is recorded (double-backprop).
struct WganGpGraph {
  TapedMlp g;
  TapedMlp d;
  Var x_fake;   // attached to g
  Var d_loss;
  Var g_loss;
  Var penalty;  // unscaled
};

// g_attrs, when given, is the attribute matrix fed to the generator (e.g. an
// augmented copy); the discriminator always conditions on the clean attrs.
// A generator whose input width equals the attribute width runs without a
// latent prior (its input is the attributes alone).
inline WganGpGraph wgan_gp_graph(Tape& tape, const Mlp& g_net, const Mlp& d_net,
                                 const Matrix& x_real, const Matrix& attrs, Rng& rng,
                                 double lambda0, const Matrix* g_attrs = nullptr) {
  if (x_real.rows() != attrs.rows())
    throw ShapeError("wgan_gp: one attribute row per real sample required");
  if (lambda0 < 0) throw ContractError("wgan_gp: lambda0 must be nonnegative");
  const int n = x_real.rows();
  const int d_a = attrs.cols();
  const int d_z = g_net.spec.in_dim() - d_a;
  if (d_z < 0) throw ShapeError("wgan_gp: generator input narrower than attributes");
  if (d_net.spec.in_dim() != x_real.cols() + d_a)
    throw ShapeError("wgan_gp: discriminator input must be feature+attribute width");
  const Matrix& ga = g_attrs ? *g_attrs : attrs;
  if (ga.rows() != n || ga.cols() != d_a)
    throw ShapeError("wgan_gp: generator attribute matrix shape mismatch");

  WganGpGraph out{lift(tape, g_net), lift(tape, d_net), {}, {}, {}, {}};

  Var g_in = d_z > 0 ? concat_cols(tape.constant(rng.gaussian_matrix<double>(n, d_z)),
                                   tape.constant(ga))
                     : tape.constant(ga);
  out.x_fake = out.g.forward(g_in);

  Var attrs_c = tape.constant(attrs);
  Var d_real = out.d.forward(concat_cols(tape.constant(x_real), attrs_c));
  Var d_fake_detached = out.d.forward(concat_cols(tape.constant(tape.value(out.x_fake)), attrs_c));
  Var d_fake_attached = out.d.forward(concat_cols(out.x_fake, attrs_c));

  // Per-sample interpolation coefficient, broadcast across feature columns.
  Matrix x_hat_v(n, x_real.cols());
  const Matrix& xf = tape.value(out.x_fake);
  for (int i = 0; i < n; ++i) {
    const double alpha = rng.uniform();
    for (int j = 0; j < x_real.cols(); ++j)
      x_hat_v(i, j) = alpha * x_real(i, j) + (1.0 - alpha) * xf(i, j);
  }
  Var x_hat = tape.leaf(std::move(x_hat_v));
  Var d_hat = out.d.forward(concat_cols(x_hat, attrs_c));
  std::vector<Var> wrt{x_hat};
  Var grad_x = tape.gradients(sum(d_hat), wrt)[0];              // n x d_x
  Var grad_norm = dgz::sqrt(row_sum(grad_x * grad_x));          // n x 1
  Var gap = add_scalar(grad_norm, -1.0);
  out.penalty = mean(gap * gap);
  if (!tape.value(out.penalty).all_finite())
    throw NumericError("wgan_gp: gradient penalty is not finite");

  out.d_loss = scale(mean(d_real), -1.0) + mean(d_fake_detached) + scale(out.penalty, lambda0);
  out.g_loss = scale(mean(d_fake_attached), -1.0);
  return out;
}

inline WganGpValues wgan_gp_losses(const Mlp& g_net, const Mlp& d_net, const Matrix& x_real,
                                   const Matrix& attrs, Rng& rng, double lambda0) {
  Tape tape;
  WganGpGraph g = wgan_gp_graph(tape, g_net, d_net, x_real, attrs, rng, lambda0);
  return {scalar_value(g.d_loss), scalar_value(g.g_loss), scalar_value(g.penalty)};
}

// --- attribute augmentation ---------------------------------------------------

// attrs + z1 with z1 ~ N(0, sigma I), fresh noise per call.
inline Matrix attribute_augment(const Matrix& attrs, double sigma, Rng& rng) {
  if (sigma < 0) throw ContractError("attribute_augment: sigma must be nonnegative");
  if (sigma == 0) return attrs;
  Matrix out = attrs;
  for (auto& v : out.data()) v += sigma * rng.gaussian();
  return out;
}

// --- center regression --------------------------------------------------------

// Mean over samples of the (squared, by default) Euclidean distance between
// the mapped attribute of the sample's class and the sample itself.
inline double center_mse(const Mlp& mapper, const Matrix& attrs_by_class, const Matrix& x,
                         const std::vector<int>& labels, bool squared = true) {
  if (static_cast<int>(labels.size()) != x.rows())
    throw ContractError("center_mse: one label per sample required");
  for (int y : labels)
    if (y < 0 || y >= attrs_by_class.rows())
      throw ContractError("center_mse: label " + std::to_string(y) + " has no attribute row");
  const Matrix centers = mlp_forward(mapper, attrs_by_class);
  if (centers.cols() != x.cols()) throw ShapeError("center_mse: mapper output width mismatch");
  double acc = 0;
  for (int i = 0; i < x.rows(); ++i) {
    double d2 = 0;
    const double* ci = centers.row_ptr(labels[static_cast<std::size_t>(i)]);
    const double* xi = x.row_ptr(i);
    for (int j = 0; j < x.cols(); ++j) {
      const double d = ci[j] - xi[j];
      d2 += d * d;
    }
    acc += squared ? d2 : std::sqrt(d2);
  }
  return acc / x.rows();
}

inline Var center_mse_graph(Tape& tape, const TapedMlp& mapper, const Matrix& attrs_by_class,
                            const Matrix& x, const std::vector<int>& labels) {
  Var centers = mapper.forward(tape.constant(attrs_by_class));      // K x d_x
  Var gathered = matmul(tape.constant(detail::onehot(labels, attrs_by_class.rows())), centers);
  Var diff = gathered - tape.constant(x);
  return scale(sum(diff * diff), 1.0 / x.rows());
}

// --- regularizers -------------------------------------------------------------

// coeff * sum of squared Frobenius norms of the weight matrices (biases excluded).
inline double l2_penalty(const Mlp& net, double coeff) {
  if (coeff < 0) throw ContractError("l2_penalty: coeff must be nonnegative");
  double acc = 0;
  for (const auto& w : net.weights) acc += frobenius_sq(w);
  return coeff * acc;
}

inline Var l2_penalty_graph(Tape& tape, const TapedMlp& net, double coeff) {
  Var acc = tape.constant(Matrix(1, 1));
  for (const auto& w : net.weights) acc = acc + sum(w * w);
  return scale(acc, coeff);
}

// --- fast gradient method on attributes ----------------------------------------

// One ascent step of length `step` along the row-normalized gradient of the
// loss with respect to the attributes. Rows with (near-)zero gradient are
// returned unchanged.
inline Matrix fgm_attribute(const std::function<Var(Tape&, Var)>& loss_builder,
                            const Matrix& attrs, double step) {
  if (step < 0) throw ContractError("fgm_attribute: step must be nonnegative");
  if (step == 0) return attrs;
  Tape tape;
  Var a = tape.leaf(attrs);
  Var loss = loss_builder(tape, a);
  std::vector<Var> wrt{a};
  const Matrix& g = tape.value(tape.gradients(loss, wrt)[0]);
  Matrix out = attrs;
  for (int i = 0; i < attrs.rows(); ++i) {
    const double norm = row_norm(g, i);
    if (norm < 1e-12) continue;
    const double* gi = g.row_ptr(i);
    double* oi = out.row_ptr(i);
    for (int j = 0; j < attrs.cols(); ++j) oi[j] += step * gi[j] / norm;
  }
  return out;
}

}  // namespace dgz
