#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dgz/adam.hpp"
#include "dgz/dataset.hpp"
#include "dgz/distributions.hpp"
#include "dgz/losses.hpp"
#include "dgz/metrics.hpp"
#include "dgz/mlp.hpp"
#include "dgz/rng.hpp"
#include "dgz/tape.hpp"

namespace dgz {

// ---------------------------------------------------------------------------
// Configuration for the full training stack. Defaults follow the published
// recipe (temperature 0.04, attribute noise 0.08, batch 512, lr 1e-4, penalty
// weight 10, 5 critic steps, 50 generated rows per class); desk-scale runs
// override the epoch counts and layer widths.
// ---------------------------------------------------------------------------
struct TrainConfig {
  double tau = 0.04;
  double sigma = 0.08;      // attribute augmentation noise; 0 disables
  double lambda0 = 10.0;    // gradient-penalty weight
  double lambda1 = 0.04;    // unseen-logit admission weight in the revised CE
  double lambda2 = 1.0;     // pseudo-row weight in the incremental CE
  int per_class_gen = 50;   // pseudo rows per unseen class
  int batch_size = 512;
  double lr = 1e-4;
  double critic_lr = 0.0;   // critic step size; 0 means "same as lr"
  bool gan_lr_decay = false;  // linear decay of both adversarial step sizes
  double gan_ema = 0.0;     // generator weight averaging coefficient; 0 disables
  bool g_tanh = false;      // tanh hidden units in the generator (zero-mean at init)
  double gan_beta1 = 0.0;   // Adam betas for the adversarial pair
  double gan_beta2 = 0.9;
  int critic_iters = 5;
  int gen_epochs = 30;
  int mapper_epochs = 20;
  int cls_epochs = 20;
  std::uint64_t seed = 1;
  PseudoKind dist = PseudoKind::kGen;
  RceGate gate = RceGate::kGlobalArgmax;
  int d_z = 0;              // latent width; 0 means "match attribute width"
  std::vector<int> g_hidden{4096, 2048};
  std::vector<int> d_hidden{4096};
  std::vector<int> m_hidden{1024};
  double leaky_slope = 0.2;
  bool vanilla_ce = false;   // plain CE instead of the revised loss
  bool free_weights = false; // free weight matrix instead of the mapping net
  bool drop_z = false;       // no latent prior: generator input is attributes only
  double fgm_step = 0.0;     // >0: adversarial attribute perturbation replaces noise
  double l2_coeff = 0.0;     // weight-matrix penalty on the classifier path
  bool resample_pseudo = false;
  CovarianceMode cov_mode = CovarianceMode::kPooledWithinClass;
  double svg_sigma = -1.0;   // negative: derive from data
  double lvg_sigma = -1.0;

  void validate() const {
    if (tau <= 0) throw ConfigError("config: tau must be positive");
    if (sigma < 0 || lambda0 < 0 || lambda1 < 0 || lambda2 < 0 || fgm_step < 0 || l2_coeff < 0)
      throw ConfigError("config: weights and noise scales must be nonnegative");
    if (per_class_gen <= 0 || batch_size <= 0 || critic_iters <= 0)
      throw ConfigError("config: counts must be positive");
    if (gen_epochs < 0 || mapper_epochs < 0 || cls_epochs < 0)
      throw ConfigError("config: epoch counts must be nonnegative");
    if (lr <= 0) throw ConfigError("config: learning rate must be positive");
    if (critic_lr < 0) throw ConfigError("config: critic learning rate must be nonnegative");
    if (gan_ema < 0 || gan_ema >= 1)
      throw ConfigError("config: generator averaging coefficient must lie in [0, 1)");
    if (d_z < 0) throw ConfigError("config: latent width must be nonnegative");
  }
};

// A trained classifier: either a mapping net that turns class attributes into
// weight rows, or (when ablating the net) a free weight matrix. Exactly one
// path is active.
struct TrainedModel {
  bool uses_free_weights = false;
  Mlp mapping;
  Matrix free_w;
  TrainConfig config;
  std::vector<double> curve;  // mean loss per epoch

  // Unit-normalized weight rows for every class.
  Matrix class_weights(const Matrix& attrs) const {
    Matrix w = uses_free_weights ? free_w : mlp_forward(mapping, attrs);
    return normalize_rows(w);
  }
};

struct GeneratorResult {
  Mlp g;
  Mlp d;
  std::vector<double> d_curve;  // per critic step
  std::vector<double> g_curve;  // per generator step
};

namespace detail {

inline std::vector<int> make_partition(int num_classes, const std::vector<int>& seen,
                                       const std::vector<int>& unseen) {
  LogitContext ctx;
  ctx.class_weights = Matrix(num_classes, 1);
  ctx.seen_ids = seen;
  ctx.unseen_ids = unseen;
  return ctx.partition();
}

// In-graph row normalization: w / ||w||_2 per row, with a vanishing floor so
// a degenerate all-zero row cannot poison the tape with infinities.
inline Var normalize_rows_graph(Tape& tape, Var w) {
  const int k = tape.value(w).cols();
  Var inv = dgz::pow(add_scalar(row_sum(w * w), 1e-24), -0.5);
  return w * bcast_cols(inv, k);
}

inline std::vector<Matrix> grad_values(Tape& tape, Var loss, const std::vector<Var>& params) {
  std::vector<Var> wrt = params;
  std::vector<Var> gs = tape.gradients(loss, wrt);
  std::vector<Matrix> out;
  out.reserve(gs.size());
  for (Var g : gs) out.push_back(tape.value(g));
  return out;
}

// Splits [0, n) into shuffled batches of at most batch_size rows.
inline std::vector<std::vector<int>> shuffled_batches(int n, int batch_size, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  rng.shuffle(idx);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < n; start += batch_size) {
    const int stop = std::min(n, start + batch_size);
    out.emplace_back(idx.begin() + start, idx.begin() + stop);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Adversarial feature generator. Alternates critic_iters critic updates with
// one generator update, consuming shuffled minibatches; the generator's
// attribute input carries fresh Gaussian noise (or an adversarial
// perturbation when fgm_step > 0) while the critic always conditions on the
// clean attributes.
// ---------------------------------------------------------------------------
inline GeneratorResult train_generator(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train_seen.empty()) throw ContractError("train_generator: empty training split");

  const Matrix x_all = ds.gather_features(ds.train_seen);
  const std::vector<int> y_all = ds.gather_labels(ds.train_seen);
  const int d_x = x_all.cols();
  const int d_a = ds.attributes.cols();
  const int d_z = cfg.drop_z ? 0 : (cfg.d_z > 0 ? cfg.d_z : d_a);

  MlpSpec g_spec;
  g_spec.layer_dims.push_back(d_z + d_a);
  for (int h : cfg.g_hidden) g_spec.layer_dims.push_back(h);
  g_spec.layer_dims.push_back(d_x);
  g_spec.hidden_activation = cfg.g_tanh ? Activation::kTanh : Activation::kLeakyRelu;
  g_spec.leaky_slope = cfg.leaky_slope;
  g_spec.output_activation = Activation::kNone;

  MlpSpec d_spec;
  d_spec.layer_dims.push_back(d_x + d_a);
  for (int h : cfg.d_hidden) d_spec.layer_dims.push_back(h);
  d_spec.layer_dims.push_back(1);
  d_spec.hidden_activation = Activation::kLeakyRelu;
  d_spec.leaky_slope = cfg.leaky_slope;
  d_spec.output_activation = Activation::kNone;

  Rng init_rng(Rng::mix(cfg.seed, 101));
  GeneratorResult out;
  out.g = init_mlp(g_spec, init_rng);
  out.d = init_mlp(d_spec, init_rng);

  const double d_lr = cfg.critic_lr > 0 ? cfg.critic_lr : cfg.lr;
  Adam g_opt({cfg.lr, cfg.gan_beta1, cfg.gan_beta2, 1e-8});
  Adam d_opt({d_lr, cfg.gan_beta1, cfg.gan_beta2, 1e-8});
  Rng rng(Rng::mix(cfg.seed, 102));

  auto batch_attrs = [&](const std::vector<int>& rows) {
    Matrix a(static_cast<int>(rows.size()), d_a);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int cls = y_all[static_cast<std::size_t>(rows[i])];
      for (int j = 0; j < d_a; ++j) a(static_cast<int>(i), j) = ds.attributes(cls, j);
    }
    return a;
  };

  // The noise draw happens at every sigma, including zero, so that runs
  // differing only in sigma consume identical random streams (paired runs).
  auto noisy_attrs = [&](const Matrix& base) {
    Matrix noise = rng.gaussian_matrix<double>(base.rows(), base.cols());
    Matrix out = base;
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j) out(i, j) += cfg.sigma * noise(i, j);
    return out;
  };

  // Update budget for the linear step-size schedule: batches of fewer than
  // two rows are skipped below, so they do not count.
  int usable_per_epoch = (x_all.rows() + cfg.batch_size - 1) / cfg.batch_size;
  if (x_all.rows() % cfg.batch_size == 1 && x_all.rows() > 1) --usable_per_epoch;
  const long planned_updates = static_cast<long>(cfg.gen_epochs) * usable_per_epoch;
  long update = 0;

  // Averaged generator weights: the average of an orbiting adversarial
  // trajectory sits near the game's equilibrium even when the last iterate
  // circles it, so the averaged copy is what training hands back.
  std::vector<Matrix> g_avg;
  if (cfg.gan_ema > 0)
    for (Matrix* p : out.g.params()) g_avg.push_back(*p);

  int cycle = 0;  // position within one critic_iters+1 update group
  for (int epoch = 0; epoch < cfg.gen_epochs; ++epoch) {
    auto batches = detail::shuffled_batches(x_all.rows(), cfg.batch_size, rng);
    for (const auto& rows : batches) {
      if (static_cast<int>(rows.size()) < 2) continue;  // penalty needs a real batch
      Matrix x = take_rows(x_all, rows);
      Matrix a = batch_attrs(rows);

      if (cfg.gan_lr_decay && planned_updates > 0) {
        const double factor =
            1.0 - static_cast<double>(update) / static_cast<double>(planned_updates);
        g_opt.set_lr(cfg.lr * factor);
        d_opt.set_lr(d_lr * factor);
      }
      ++update;

      const bool g_step = cycle == cfg.critic_iters;
      cycle = (cycle + 1) % (cfg.critic_iters + 1);

      try {
        if (!g_step) {
          Matrix ga = cfg.fgm_step > 0 ? a : noisy_attrs(a);
          Tape tape;
          WganGpGraph graph = wgan_gp_graph(tape, out.g, out.d, x, a, rng, cfg.lambda0, &ga);
          const double loss = scalar_value(graph.d_loss);
          if (!std::isfinite(loss))
            throw TrainingError("generator training diverged (critic) at epoch " +
                                std::to_string(epoch));
          std::vector<Var> params = graph.d.params();
          d_opt.step(out.d.params(), detail::grad_values(tape, graph.d_loss, params));
          out.d_curve.push_back(loss);
        } else {
          // Generator update: only the attached-fake critic score is needed,
          // so build that subgraph alone.
          Matrix ga;
          if (cfg.fgm_step > 0) {
            const Matrix z = d_z > 0 ? rng.gaussian_matrix<double>(x.rows(), d_z) : Matrix();
            auto builder = [&](Tape& t, Var a_var) {
              TapedMlp g_t = lift(t, out.g);
              TapedMlp d_t = lift(t, out.d);
              Var g_in = d_z > 0 ? concat_cols(t.constant(z), a_var) : a_var;
              Var fake = g_t.forward(g_in);
              return scale(mean(d_t.forward(concat_cols(fake, t.constant(a)))), -1.0);
            };
            ga = fgm_attribute(builder, a, cfg.fgm_step);
            Tape tape;
            TapedMlp g_t = lift(tape, out.g);
            TapedMlp d_t = lift(tape, out.d);
            Var g_in = d_z > 0 ? concat_cols(tape.constant(z), tape.constant(ga))
                               : tape.constant(ga);
            Var g_loss = scale(mean(d_t.forward(concat_cols(g_t.forward(g_in),
                                                            tape.constant(a)))), -1.0);
            const double loss = scalar_value(g_loss);
            if (!std::isfinite(loss))
              throw TrainingError("generator training diverged at epoch " + std::to_string(epoch));
            g_opt.step(out.g.params(), detail::grad_values(tape, g_loss, g_t.params()));
            out.g_curve.push_back(loss);
          } else {
            ga = noisy_attrs(a);
            Tape tape;
            TapedMlp g_t = lift(tape, out.g);
            TapedMlp d_t = lift(tape, out.d);
            Var g_in = d_z > 0 ? concat_cols(tape.constant(rng.gaussian_matrix<double>(x.rows(), d_z)),
                                             tape.constant(ga))
                               : tape.constant(ga);
            Var g_loss = scale(mean(d_t.forward(concat_cols(g_t.forward(g_in),
                                                            tape.constant(a)))), -1.0);
            const double loss = scalar_value(g_loss);
            if (!std::isfinite(loss))
              throw TrainingError("generator training diverged at epoch " + std::to_string(epoch));
            g_opt.step(out.g.params(), detail::grad_values(tape, g_loss, g_t.params()));
            out.g_curve.push_back(loss);
          }
          if (cfg.gan_ema > 0) {
            const auto ps = out.g.params();
            for (std::size_t i = 0; i < ps.size(); ++i) {
              auto& avg = g_avg[i].data();
              const auto& cur = ps[i]->data();
              for (std::size_t k = 0; k < avg.size(); ++k)
                avg[k] = cfg.gan_ema * avg[k] + (1.0 - cfg.gan_ema) * cur[k];
            }
          }
        }
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " [epoch " + std::to_string(epoch) + "]");
      }
    }
  }
  if (cfg.gan_ema > 0) {
    const auto ps = out.g.params();
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = g_avg[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attribute -> class-center regression net, trained with mean squared error
// against the seen training samples.
// ---------------------------------------------------------------------------
inline Mlp train_center_mapper(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train_seen.empty()) throw ContractError("train_center_mapper: empty training split");

  const Matrix x_all = ds.gather_features(ds.train_seen);
  const std::vector<int> y_all = ds.gather_labels(ds.train_seen);

  MlpSpec spec;
  spec.layer_dims.push_back(ds.attributes.cols());
  for (int h : cfg.m_hidden) spec.layer_dims.push_back(h);
  spec.layer_dims.push_back(x_all.cols());
  spec.hidden_activation = Activation::kLeakyRelu;
  spec.leaky_slope = cfg.leaky_slope;
  spec.output_activation = Activation::kNone;

  Rng init_rng(Rng::mix(cfg.seed, 111));
  Mlp mapper = init_mlp(spec, init_rng);
  Adam opt({cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(Rng::mix(cfg.seed, 112));

  for (int epoch = 0; epoch < cfg.mapper_epochs; ++epoch) {
    auto batches = detail::shuffled_batches(x_all.rows(), cfg.batch_size, rng);
    for (const auto& rows : batches) {
      Matrix x = take_rows(x_all, rows);
      std::vector<int> y;
      y.reserve(rows.size());
      for (int r : rows) y.push_back(y_all[static_cast<std::size_t>(r)]);
      Tape tape;
      TapedMlp taped = lift(tape, mapper);
      Var loss = center_mse_graph(tape, taped, ds.attributes, x, y);
      const double value = scalar_value(loss);
      if (!std::isfinite(value))
        throw TrainingError("center mapper diverged at epoch " + std::to_string(epoch));
      opt.step(mapper.params(), detail::grad_values(tape, loss, taped.params()));
    }
  }
  return mapper;
}

// ---------------------------------------------------------------------------
// Classifier training: weight rows come from the mapping net (or a free
// matrix under ablation), are unit-normalized along with the features, and
// the logits are cosine similarities over temperature. Batches are a
// shuffled union of real seen rows and pseudo unseen rows; the pseudo set is
// fixed unless a resampler is supplied and resampling is enabled.
// ---------------------------------------------------------------------------
using PseudoResampler = std::function<PseudoSet(Rng&)>;

inline TrainedModel train_classifier(const Dataset& ds, const PseudoSet& pseudo,
                                     const TrainConfig& cfg,
                                     const PseudoResampler& resampler = nullptr) {
  cfg.validate();
  if (ds.train_seen.empty()) throw ContractError("train_classifier: empty training split");
  if (!pseudo.labels.empty()) pseudo.validate(ds.unseen_ids);
  for (int y : pseudo.labels)
    if (y < 0 || y >= ds.num_classes())
      throw ContractError("train_classifier: pseudo label has no attribute row");

  const int d_x = ds.features.cols();
  const std::vector<int> part =
      detail::make_partition(ds.num_classes(), ds.seen_ids, ds.unseen_ids);

  TrainedModel model;
  model.config = cfg;
  model.uses_free_weights = cfg.free_weights;
  Rng init_rng(Rng::mix(cfg.seed, 121));
  if (cfg.free_weights) {
    model.free_w = init_rng.gaussian_matrix<double>(ds.num_classes(), d_x);
    for (auto& v : model.free_w.data()) v *= 0.1;
  } else {
    MlpSpec spec;
    spec.layer_dims.push_back(ds.attributes.cols());
    for (int h : cfg.m_hidden) spec.layer_dims.push_back(h);
    spec.layer_dims.push_back(d_x);
    spec.hidden_activation = Activation::kLeakyRelu;
    spec.leaky_slope = cfg.leaky_slope;
    spec.output_activation = Activation::kNone;
    model.mapping = init_mlp(spec, init_rng);
  }

  Adam opt({cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(Rng::mix(cfg.seed, 122));

  Matrix real_x = normalize_rows(ds.gather_features(ds.train_seen));
  std::vector<int> real_y = ds.gather_labels(ds.train_seen);

  PseudoSet current = pseudo;
  for (int epoch = 0; epoch < cfg.cls_epochs; ++epoch) {
    if (cfg.resample_pseudo && resampler && epoch > 0) current = resampler(rng);

    Matrix pool_x = real_x;
    std::vector<int> pool_y = real_y;
    if (current.features.rows() > 0) {
      pool_x = vstack(pool_x, normalize_rows(current.features));
      pool_y.insert(pool_y.end(), current.labels.begin(), current.labels.end());
    }

    double epoch_loss = 0;
    int batch_count = 0;
    auto batches = detail::shuffled_batches(pool_x.rows(), cfg.batch_size, rng);
    for (const auto& rows : batches) {
      Matrix x = take_rows(pool_x, rows);
      std::vector<int> y;
      y.reserve(rows.size());
      for (int r : rows) y.push_back(pool_y[static_cast<std::size_t>(r)]);

      Tape tape;
      std::vector<Var> params;
      Var w_raw;
      TapedMlp taped;
      if (cfg.free_weights) {
        w_raw = tape.leaf(model.free_w);
        params.push_back(w_raw);
      } else {
        taped = lift(tape, model.mapping);
        w_raw = taped.forward(tape.constant(ds.attributes));
        params = taped.params();
      }
      Var w = detail::normalize_rows_graph(tape, w_raw);
      Var x_c = tape.constant(x);

      Var loss = cfg.vanilla_ce
                     ? cross_entropy_graph(tape, x_c, w, cfg.tau, y)
                     : revised_ce_graph(tape, x_c, w, cfg.tau, y, part, cfg.lambda1, cfg.gate);
      if (cfg.l2_coeff > 0) {
        if (cfg.free_weights)
          loss = loss + scale(sum(w_raw * w_raw), cfg.l2_coeff);
        else
          loss = loss + l2_penalty_graph(tape, taped, cfg.l2_coeff);
      }

      const double value = scalar_value(loss);
      if (!std::isfinite(value))
        throw TrainingError("classifier diverged at epoch " + std::to_string(epoch));
      epoch_loss += value;
      ++batch_count;

      std::vector<Matrix> grads = detail::grad_values(tape, loss, params);
      if (cfg.free_weights)
        opt.step({&model.free_w}, grads);
      else
        opt.step(model.mapping.params(), grads);
    }
    model.curve.push_back(batch_count ? epoch_loss / batch_count : 0.0);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Prediction: cosine similarity between unit feature rows and unit weight
// rows; ties break toward the lowest class id.
// ---------------------------------------------------------------------------
inline Matrix predict_scores(const TrainedModel& model, const Matrix& attrs, const Matrix& x) {
  return matmul_nt(normalize_rows(x), model.class_weights(attrs));
}

inline std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(scores.rows()));
  for (int i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    out.push_back(best);
  }
  return out;
}

inline std::vector<int> predict(const TrainedModel& model, const Matrix& attrs, const Matrix& x) {
  return argmax_rows(predict_scores(model, attrs, x));
}

// ---------------------------------------------------------------------------
// Evaluation over the standard test partitions. When a pseudo set is given,
// the distribution diagnostics (CMMD against real unseen data, center
// distance) are filled in; the verbatim CMMD estimator needs equal per-class
// counts, so both sides are truncated to the smaller count per class.
// ---------------------------------------------------------------------------
inline MetricsReport evaluate(const TrainedModel& model, const Dataset& ds,
                              const PseudoSet* pseudo = nullptr) {
  if (ds.test_seen.empty() || ds.test_unseen.empty())
    throw ContractError("evaluate: both test partitions must be nonempty");

  MetricsReport rep;
  const Matrix w = model.class_weights(ds.attributes);

  std::vector<int> test_rows = ds.test_seen;
  test_rows.insert(test_rows.end(), ds.test_unseen.begin(), ds.test_unseen.end());
  Matrix x_test = normalize_rows(ds.gather_features(test_rows));
  std::vector<int> y_test = ds.gather_labels(test_rows);
  Matrix scores = matmul_nt(x_test, w);
  std::vector<int> preds = argmax_rows(scores);

  GzslAccuracy acc = gzsl_accuracy(preds, y_test, ds.seen_ids, ds.unseen_ids);
  rep.a_u = acc.a_u;
  rep.a_s = acc.a_s;
  rep.h = acc.h;

  // Per-class rows for the report.
  for (int c = 0; c < ds.num_classes(); ++c) {
    int total = 0, hit = 0;
    for (std::size_t i = 0; i < y_test.size(); ++i)
      if (y_test[i] == c) {
        ++total;
        if (preds[i] == c) ++hit;
      }
    if (total > 0) rep.per_class.push_back({c, ds.is_seen(c), 100.0 * hit / total, total});
  }

  const int n_seen = static_cast<int>(ds.test_seen.size());
  Matrix seen_scores(n_seen, scores.cols());
  for (int i = 0; i < n_seen; ++i)
    for (int c = 0; c < scores.cols(); ++c) seen_scores(i, c) = scores(i, c);
  Matrix unseen_scores(scores.rows() - n_seen, scores.cols());
  for (int i = n_seen; i < scores.rows(); ++i)
    for (int c = 0; c < scores.cols(); ++c) unseen_scores(i - n_seen, c) = scores(i, c);
  std::vector<int> y_seen(y_test.begin(), y_test.begin() + n_seen);
  std::vector<int> y_unseen(y_test.begin() + n_seen, y_test.end());

  rep.a_is = intra_accuracy(seen_scores, y_seen, ds.seen_ids);
  rep.a_iu = intra_accuracy(unseen_scores, y_unseen, ds.unseen_ids);
  rep.t1 = rep.a_iu;  // zero-shot top-1 is the unseen-restricted accuracy

  if (pseudo != nullptr && pseudo->features.rows() > 0) {
    Matrix real_unseen = ds.gather_features(ds.test_unseen);
    std::vector<int> real_labels = ds.gather_labels(ds.test_unseen);

    std::vector<Matrix> real_groups, gen_groups;
    Matrix real_centers(static_cast<int>(ds.unseen_ids.size()), ds.features.cols());
    Matrix gen_centers(static_cast<int>(ds.unseen_ids.size()), ds.features.cols());
    bool cmmd_ok = true;
    for (std::size_t ci = 0; ci < ds.unseen_ids.size(); ++ci) {
      const int c = ds.unseen_ids[ci];
      std::vector<int> r_rows, g_rows;
      for (int i = 0; i < real_unseen.rows(); ++i)
        if (real_labels[static_cast<std::size_t>(i)] == c) r_rows.push_back(i);
      for (int i = 0; i < pseudo->features.rows(); ++i)
        if (pseudo->labels[static_cast<std::size_t>(i)] == c) g_rows.push_back(i);
      if (r_rows.empty() || g_rows.empty()) {
        cmmd_ok = false;
        break;
      }
      Matrix r = take_rows(real_unseen, r_rows);
      Matrix g = take_rows(pseudo->features, g_rows);
      Matrix r_mu = col_mean(r);
      Matrix g_mu = col_mean(g);
      for (int j = 0; j < r.cols(); ++j) {
        real_centers(static_cast<int>(ci), j) = r_mu(0, j);
        gen_centers(static_cast<int>(ci), j) = g_mu(0, j);
      }
      const int m = std::min(r.rows(), g.rows());
      if (m < 2) {
        cmmd_ok = false;
        break;
      }
      std::vector<int> head(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) head[static_cast<std::size_t>(i)] = i;
      real_groups.push_back(take_rows(r, head));
      gen_groups.push_back(take_rows(g, head));
    }
    if (cmmd_ok) {
      rep.cmmd = cmmd(real_groups, gen_groups);
      rep.cacd = cacd(gen_centers, real_centers);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Full pipeline: build the pseudo-unseen set per the configured distribution,
// train the classifier, evaluate. GEN trains the adversarial generator;
// GC_SCG trains the center mapper and samples around its predictions with the
// pooled seen covariance; SVG/LVG/SCG are diagnostic modes that place mass
// using the real unseen test statistics.
// ---------------------------------------------------------------------------
struct DgzResult {
  TrainedModel model;
  MetricsReport report;
  GeneratorResult gen;      // populated for GEN
  Mlp center_mapper;        // populated for GC_SCG
  PseudoSet pseudo;
};

inline DgzResult run_dgz(const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.unseen_ids.empty()) throw ContractError("run_dgz: no unseen classes");
  DgzResult out;

  Matrix unseen_attrs = take_rows(ds.attributes, ds.unseen_ids);
  Matrix train_x = ds.gather_features(ds.train_seen);
  std::vector<int> train_y = ds.gather_labels(ds.train_seen);

  PseudoParams pp;
  pp.svg_sigma = cfg.svg_sigma;
  pp.lvg_sigma = cfg.lvg_sigma;
  pp.cov_mode = cfg.cov_mode;
  pp.unseen_attrs = unseen_attrs;

  Rng pseudo_rng(Rng::mix(cfg.seed, 131));
  PseudoResampler resampler;

  switch (cfg.dist) {
    case PseudoKind::kGen: {
      out.gen = train_generator(ds, cfg);
      pp.generator = &out.gen.g;
      if (cfg.drop_z) pp.gen_attr_sigma = cfg.sigma;
      // Centers are ignored by GEN; pass a correctly shaped placeholder.
      Matrix dummy(static_cast<int>(ds.unseen_ids.size()), ds.features.cols());
      out.pseudo = build_pseudo_unseen(PseudoKind::kGen, dummy, ds.unseen_ids, train_x, train_y,
                                       cfg.per_class_gen, pp, pseudo_rng);
      break;
    }
    case PseudoKind::kGcScg: {
      out.center_mapper = train_center_mapper(ds, cfg);
      pp.center_mapper = &out.center_mapper;
      Matrix dummy(static_cast<int>(ds.unseen_ids.size()), ds.features.cols());
      out.pseudo = build_pseudo_unseen(PseudoKind::kGcScg, dummy, ds.unseen_ids, train_x, train_y,
                                       cfg.per_class_gen, pp, pseudo_rng);
      break;
    }
    case PseudoKind::kSvg:
    case PseudoKind::kLvg:
    case PseudoKind::kScg: {
      // Diagnostic distributions: centered on (and, for SCG, shaped by) the
      // real unseen test data, quantifying how much distribution fidelity by
      // itself buys.
      Matrix real_unseen = ds.gather_features(ds.test_unseen);
      std::vector<int> real_labels = ds.gather_labels(ds.test_unseen);
      Matrix centers = class_centers(real_unseen, real_labels, ds.unseen_ids);
      out.pseudo = build_pseudo_unseen(cfg.dist, centers, ds.unseen_ids, real_unseen, real_labels,
                                       cfg.per_class_gen, pp, pseudo_rng);
      break;
    }
  }

  if (cfg.resample_pseudo) {
    const PseudoKind kind = cfg.dist;
    const Dataset* dsp = &ds;
    const DgzResult* self = &out;
    TrainConfig snapshot = cfg;
    resampler = [kind, dsp, self, snapshot, unseen_attrs, train_x, train_y](Rng& r) {
      PseudoParams p2;
      p2.svg_sigma = snapshot.svg_sigma;
      p2.lvg_sigma = snapshot.lvg_sigma;
      p2.cov_mode = snapshot.cov_mode;
      p2.unseen_attrs = unseen_attrs;
      if (kind == PseudoKind::kGen) {
        p2.generator = &self->gen.g;
        if (snapshot.drop_z) p2.gen_attr_sigma = snapshot.sigma;
        Matrix dummy(static_cast<int>(dsp->unseen_ids.size()), dsp->features.cols());
        return build_pseudo_unseen(kind, dummy, dsp->unseen_ids, train_x, train_y,
                                   snapshot.per_class_gen, p2, r);
      }
      if (kind == PseudoKind::kGcScg) {
        p2.center_mapper = &self->center_mapper;
        Matrix dummy(static_cast<int>(dsp->unseen_ids.size()), dsp->features.cols());
        return build_pseudo_unseen(kind, dummy, dsp->unseen_ids, train_x, train_y,
                                   snapshot.per_class_gen, p2, r);
      }
      Matrix real_unseen = dsp->gather_features(dsp->test_unseen);
      std::vector<int> real_labels = dsp->gather_labels(dsp->test_unseen);
      Matrix centers = class_centers(real_unseen, real_labels, dsp->unseen_ids);
      return build_pseudo_unseen(kind, centers, dsp->unseen_ids, real_unseen, real_labels,
                                 snapshot.per_class_gen, p2, r);
    };
  }

  out.model = train_classifier(ds, out.pseudo, cfg, resampler);
  out.report = evaluate(out.model, ds, &out.pseudo);
  return out;
}

// ---------------------------------------------------------------------------
// Distribution probe: the deconstruction experiment. Runs the classifier
// stage once per pseudo-unseen builder and reports the Table-style schema
// (T1 / A_u / A_s / H / CMMD per row).
// ---------------------------------------------------------------------------
struct ProbeRow {
  PseudoKind kind;
  MetricsReport report;
};

inline std::vector<ProbeRow> probe_distributions(const Dataset& ds, const TrainConfig& cfg) {
  std::vector<ProbeRow> rows;
  for (PseudoKind kind :
       {PseudoKind::kGen, PseudoKind::kSvg, PseudoKind::kLvg, PseudoKind::kScg}) {
    TrainConfig c = cfg;
    c.dist = kind;
    DgzResult r = run_dgz(ds, c);
    rows.push_back({kind, r.report});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Ablation variants:
//   1  no attribute augmentation (sigma = 0)
//   2  vanilla cross-entropy instead of the revised loss
//   3  free weight matrix instead of the mapping net
//   4  variants 2 + 3 together
//   5  statistical-covariance sampling around the generator's class centers
//   6  statistical-covariance sampling around mapper-predicted centers
// ---------------------------------------------------------------------------
struct AblationResult {
  int variant = 0;
  std::string center_source;  // "gen" / "mapper" / "" for 1-4
  MetricsReport report;
};

inline AblationResult run_ablation(const Dataset& ds, int variant, const TrainConfig& cfg) {
  if (variant < 1 || variant > 6) throw ConfigError("run_ablation: variant must be 1..6");
  AblationResult out;
  out.variant = variant;
  TrainConfig c = cfg;
  switch (variant) {
    case 1:
      c.sigma = 0;
      out.report = run_dgz(ds, c).report;
      return out;
    case 2:
      c.vanilla_ce = true;
      out.report = run_dgz(ds, c).report;
      return out;
    case 3:
      c.free_weights = true;
      out.report = run_dgz(ds, c).report;
      return out;
    case 4:
      c.vanilla_ce = true;
      c.free_weights = true;
      out.report = run_dgz(ds, c).report;
      return out;
    case 5: {
      // Keep the generator's class-level placement, replace the instance-level
      // spread with the pooled statistical covariance.
      GeneratorResult gen = train_generator(ds, c);
      Matrix unseen_attrs = take_rows(ds.attributes, ds.unseen_ids);
      Matrix train_x = ds.gather_features(ds.train_seen);
      std::vector<int> train_y = ds.gather_labels(ds.train_seen);
      PseudoParams pp;
      pp.unseen_attrs = unseen_attrs;
      pp.generator = &gen.g;
      if (c.drop_z) pp.gen_attr_sigma = c.sigma;
      Rng pseudo_rng(Rng::mix(c.seed, 131));
      Matrix dummy(static_cast<int>(ds.unseen_ids.size()), ds.features.cols());
      PseudoSet gen_set = build_pseudo_unseen(PseudoKind::kGen, dummy, ds.unseen_ids, train_x,
                                              train_y, c.per_class_gen, pp, pseudo_rng);
      Matrix gen_centers = class_centers(gen_set.features, gen_set.labels, ds.unseen_ids);
      PseudoParams pp2;
      pp2.cov_mode = c.cov_mode;
      Rng scg_rng(Rng::mix(c.seed, 132));
      PseudoSet scg_set = build_pseudo_unseen(PseudoKind::kScg, gen_centers, ds.unseen_ids,
                                              train_x, train_y, c.per_class_gen, pp2, scg_rng);
      TrainedModel model = train_classifier(ds, scg_set, c);
      out.report = evaluate(model, ds, &scg_set);
      out.center_source = "gen";
      return out;
    }
    case 6: {
      c.dist = PseudoKind::kGcScg;
      out.report = run_dgz(ds, c).report;
      out.center_source = "mapper";
      return out;
    }
  }
  return out;  // unreachable
}

// ---------------------------------------------------------------------------
// Toy two-dimensional study: an adversarial pair trained on unit-Gaussian
// points with a single all-zero attribute, rerun per augmentation level, with
// 300 generated samples summarized per run.
// ---------------------------------------------------------------------------
struct Toy2dRun {
  double sigma = 0;
  Matrix samples;          // eval_count x 2
  double mean[2] = {0, 0};
  double stddev[2] = {0, 0};
};

struct Toy2dResult {
  std::vector<Toy2dRun> runs;
};

inline Toy2dResult toy2d(const TrainConfig& cfg, const std::vector<double>& sigmas = {0.0, 0.04, 1.0},
                         int train_points = 2000, int eval_count = 300) {
  cfg.validate();
  if (train_points < 2 || eval_count < 2) throw ConfigError("toy2d: need at least 2 points");

  Dataset ds;
  Rng data_rng(Rng::mix(cfg.seed, 141));
  ds.features = data_rng.gaussian_matrix<double>(train_points, 2);
  ds.labels.assign(static_cast<std::size_t>(train_points), 0);
  ds.attributes = Matrix(1, 2);  // the single attribute (0, 0)
  ds.seen_ids = {0};
  for (int i = 0; i < train_points; ++i) ds.train_seen.push_back(i);
  ds.validate();

  Toy2dResult out;
  for (double sigma : sigmas) {
    TrainConfig c = cfg;
    c.sigma = sigma;
    if (c.d_z == 0) c.d_z = 2;
    GeneratorResult gen = train_generator(ds, c);

    Rng eval_rng(Rng::mix(cfg.seed, 142));  // shared across sigmas: paired draws
    Matrix a(eval_count, 2);
    Toy2dRun run;
    run.sigma = sigma;
    if (c.drop_z) {
      run.samples = mlp_forward(gen.g, a);
    } else {
      Matrix z = eval_rng.gaussian_matrix<double>(eval_count, c.d_z);
      run.samples = mlp_forward(gen.g, hconcat(z, a));
    }
    for (int axis = 0; axis < 2; ++axis) {
      double m = 0;
      for (int i = 0; i < eval_count; ++i) m += run.samples(i, axis);
      m /= eval_count;
      double v = 0;
      for (int i = 0; i < eval_count; ++i) {
        const double d = run.samples(i, axis) - m;
        v += d * d;
      }
      run.mean[axis] = m;
      run.stddev[axis] = std::sqrt(v / (eval_count - 1));
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attribute-generalization-bound study: three sub-experiments over the seen
// classes (vary class count at a fixed instance budget; vary instances per
// class at a fixed class count; toggle attribute augmentation), each cell
// reporting H and CMMD.
// ---------------------------------------------------------------------------
struct GenboundCell {
  std::string experiment;  // "classes" / "instances" / "ata"
  double x = 0;            // class count, per-class count, or 0/1 toggle
  double h = 0;
  double cmmd = 0;
};

struct GenboundResult {
  std::vector<GenboundCell> cells;
};

inline GenboundResult genbound_study(const Dataset& ds, const TrainConfig& cfg,
                                     std::vector<int> class_counts = {10, 20, 30, 40},
                                     int fixed_total = 600,
                                     std::vector<int> per_class_counts = {15, 30, 45, 60},
                                     int fixed_classes = 40) {
  cfg.validate();
  int max_classes = fixed_classes;
  for (int k : class_counts) {
    if (k <= 0) throw ContractError("genbound_study: class counts must be positive");
    max_classes = std::max(max_classes, k);
  }
  for (int m : per_class_counts)
    if (m <= 0) throw ContractError("genbound_study: instance counts must be positive");
  if (fixed_total <= 0 || fixed_classes <= 0)
    throw ContractError("genbound_study: budgets must be positive");
  if (static_cast<int>(ds.seen_ids.size()) < max_classes)
    throw ContractError("genbound_study: dataset has fewer seen classes than requested");

  // One shared shuffle, so smaller selections are prefixes of larger ones.
  std::vector<int> order = ds.seen_ids;
  Rng sel_rng(Rng::mix(cfg.seed, 151));
  sel_rng.shuffle(order);

  GenboundResult out;
  for (int k : class_counts) {
    std::vector<int> sel(order.begin(), order.begin() + k);
    Dataset sub = subset_dataset(ds, sel, std::max(1, fixed_total / k));
    DgzResult r = run_dgz(sub, cfg);
    out.cells.push_back({"classes", static_cast<double>(k), r.report.h, r.report.cmmd});
  }
  {
    std::vector<int> sel(order.begin(), order.begin() + fixed_classes);
    for (int m : per_class_counts) {
      Dataset sub = subset_dataset(ds, sel, m);
      DgzResult r = run_dgz(sub, cfg);
      out.cells.push_back({"instances", static_cast<double>(m), r.report.h, r.report.cmmd});
    }
  }
  for (int ata : {1, 0}) {
    TrainConfig c = cfg;
    if (!ata) c.sigma = 0;
    DgzResult r = run_dgz(ds, c);
    out.cells.push_back({"ata", static_cast<double>(ata), r.report.h, r.report.cmmd});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seen-to-unseen bias sweep: retrains the classifier per lambda1 with shared
// seeds and a shared pseudo set, counting seen-test samples that land in
// unseen classes. Mirrors the bias-control analysis.
// ---------------------------------------------------------------------------
struct BiasSweepRow {
  double lambda1 = 0;
  int seen_to_unseen = 0;  // misclassification count over the seen test split
  MetricsReport report;
};

inline std::vector<BiasSweepRow> lambda1_bias_sweep(const Dataset& ds, const TrainConfig& cfg,
                                                    const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw ContractError("lambda1_bias_sweep: no lambdas given");
  // Build the pseudo set once with the base config so every run sees the
  // same data; only the loss weighting changes.
  DgzResult base = run_dgz(ds, cfg);
  std::vector<BiasSweepRow> rows;
  for (double l1 : lambdas) {
    if (l1 < 0) throw ContractError("lambda1_bias_sweep: lambda1 must be nonnegative");
    TrainConfig c = cfg;
    c.lambda1 = l1;
    TrainedModel model = train_classifier(ds, base.pseudo, c);
    MetricsReport rep = evaluate(model, ds, &base.pseudo);
    std::vector<int> preds =
        predict(model, ds.attributes, ds.gather_features(ds.test_seen));
    int count = 0;
    for (int p : preds)
      if (!ds.is_seen(p)) ++count;
    rows.push_back({l1, count, rep});
  }
  return rows;
}

}  // namespace dgz
