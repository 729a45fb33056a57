// dgz — command-line front end for the zero-shot training library.
//
// Subcommands:
//   synth       write a synthetic ground-truth dataset
//   train       train a model on a dataset directory and export reports
//   eval        evaluate a saved checkpoint
//   probe-dist  compare the pseudo-unseen distribution builders
//   gradcheck   run the gradient self-check suite
//   toy2d       2-D generator sanity experiment
//   genbound    attribute generalization study
//   ablate      run one ablation variant
//
// Every subcommand accepts a key=value config file (--config) plus flag
// overrides; exit codes are 0 on success, 1 on runtime failure, 2 on usage
// errors (unknown flags, malformed config values).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dgz/config.hpp"
#include "dgz/grad_analysis.hpp"
#include "dgz/pipelines.hpp"
#include "dgz/report.hpp"

namespace fs = std::filesystem;
using namespace dgz;

namespace {

// --- enum <-> string plumbing -------------------------------------------------

std::string kind_name(PseudoKind k) {
  switch (k) {
    case PseudoKind::kGen: return "gen";
    case PseudoKind::kSvg: return "svg";
    case PseudoKind::kLvg: return "lvg";
    case PseudoKind::kScg: return "scg";
    case PseudoKind::kGcScg: return "gc_scg";
  }
  throw ContractError("unknown pseudo kind");
}

PseudoKind kind_from(const std::string& s) {
  for (PseudoKind k : {PseudoKind::kGen, PseudoKind::kSvg, PseudoKind::kLvg, PseudoKind::kScg,
                       PseudoKind::kGcScg})
    if (s == kind_name(k)) return k;
  throw ConfigError("config: unknown dist '" + s + "' (expected gen/svg/lvg/scg/gc_scg)");
}

std::string gate_name(RceGate g) {
  return g == RceGate::kGlobalArgmax ? "global_argmax" : "unseen_beats_true";
}

RceGate gate_from(const std::string& s) {
  if (s == "global_argmax") return RceGate::kGlobalArgmax;
  if (s == "unseen_beats_true") return RceGate::kUnseenBeatsTrue;
  throw ConfigError("config: unknown gate '" + s + "'");
}

std::string cov_name(CovarianceMode m) {
  return m == CovarianceMode::kPooledWithinClass ? "pooled" : "global";
}

CovarianceMode cov_from(const std::string& s) {
  if (s == "pooled") return CovarianceMode::kPooledWithinClass;
  if (s == "global") return CovarianceMode::kGlobal;
  throw ConfigError("config: unknown cov_mode '" + s + "'");
}

std::string dims_name(const std::vector<int>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(dims[i]);
  }
  return out;
}

std::vector<int> dims_from(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (cur.empty()) continue;
      try {
        out.push_back(std::stoi(cur));
      } catch (const std::exception&) {
        throw ConfigError("config: bad layer width '" + cur + "'");
      }
      if (out.back() <= 0) throw ConfigError("config: layer widths must be positive");
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

// --- config file + override handling -----------------------------------------

// Defaults -> config file -> repeated --set key=value overrides.
Config merged_config(const std::string& config_path, const std::vector<std::string>& sets) {
  Config c;
  if (!config_path.empty()) c = Config::parse_file(config_path);
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

TrainConfig train_config_from(Config& c) {
  TrainConfig t;
  t.tau = c.get_double("tau", t.tau);
  t.sigma = c.get_double("sigma", t.sigma);
  t.lambda0 = c.get_double("lambda0", t.lambda0);
  t.lambda1 = c.get_double("lambda1", t.lambda1);
  t.lambda2 = c.get_double("lambda2", t.lambda2);
  t.per_class_gen = c.get_int("per_class_gen", t.per_class_gen);
  t.batch_size = c.get_int("batch_size", t.batch_size);
  t.lr = c.get_double("lr", t.lr);
  t.critic_lr = c.get_double("critic_lr", t.critic_lr);
  t.gan_lr_decay = c.get_bool("gan_lr_decay", t.gan_lr_decay);
  t.gan_ema = c.get_double("gan_ema", t.gan_ema);
  t.g_tanh = c.get_bool("g_tanh", t.g_tanh);
  t.gan_beta1 = c.get_double("gan_beta1", t.gan_beta1);
  t.gan_beta2 = c.get_double("gan_beta2", t.gan_beta2);
  t.critic_iters = c.get_int("critic_iters", t.critic_iters);
  t.gen_epochs = c.get_int("gen_epochs", t.gen_epochs);
  t.mapper_epochs = c.get_int("mapper_epochs", t.mapper_epochs);
  t.cls_epochs = c.get_int("cls_epochs", t.cls_epochs);
  t.seed = c.get_u64("seed", t.seed);
  t.dist = kind_from(c.get_string("dist", kind_name(t.dist)));
  t.gate = gate_from(c.get_string("gate", gate_name(t.gate)));
  t.d_z = c.get_int("d_z", t.d_z);
  t.g_hidden = dims_from(c.get_string("g_hidden", dims_name(t.g_hidden)));
  t.d_hidden = dims_from(c.get_string("d_hidden", dims_name(t.d_hidden)));
  t.m_hidden = dims_from(c.get_string("m_hidden", dims_name(t.m_hidden)));
  t.leaky_slope = c.get_double("leaky_slope", t.leaky_slope);
  t.vanilla_ce = c.get_bool("vanilla_ce", t.vanilla_ce);
  t.free_weights = c.get_bool("free_weights", t.free_weights);
  t.drop_z = c.get_bool("drop_z", t.drop_z);
  t.fgm_step = c.get_double("fgm_step", t.fgm_step);
  t.l2_coeff = c.get_double("l2_coeff", t.l2_coeff);
  t.resample_pseudo = c.get_bool("resample_pseudo", t.resample_pseudo);
  t.cov_mode = cov_from(c.get_string("cov_mode", cov_name(t.cov_mode)));
  t.svg_sigma = c.get_double("svg_sigma", t.svg_sigma);
  t.lvg_sigma = c.get_double("lvg_sigma", t.lvg_sigma);
  t.validate();
  return t;
}

SynthSpec synth_spec_from(Config& c) {
  SynthSpec s;
  s.seen_classes = c.get_int("seen_classes", s.seen_classes);
  s.unseen_classes = c.get_int("unseen_classes", s.unseen_classes);
  s.d_x = c.get_int("d_x", s.d_x);
  s.d_a = c.get_int("d_a", s.d_a);
  s.map_noise = c.get_double("map_noise", s.map_noise);
  s.cov_scale = c.get_double("cov_scale", s.cov_scale);
  s.per_class = c.get_int("per_class", s.per_class);
  s.test_fraction = c.get_double("test_fraction", s.test_fraction);
  s.seed = c.get_u64("seed", s.seed);
  s.validate();
  return s;
}

void write_resolved_config(const TrainConfig& t, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open: " + path);
  os << "tau=" << t.tau << "\nsigma=" << t.sigma << "\nlambda0=" << t.lambda0
     << "\nlambda1=" << t.lambda1 << "\nlambda2=" << t.lambda2
     << "\nper_class_gen=" << t.per_class_gen << "\nbatch_size=" << t.batch_size
     << "\nlr=" << t.lr << "\ncritic_lr=" << t.critic_lr
     << "\ngan_lr_decay=" << (t.gan_lr_decay ? 1 : 0) << "\ngan_ema=" << t.gan_ema
     << "\ng_tanh=" << (t.g_tanh ? 1 : 0)
     << "\ngan_beta1=" << t.gan_beta1 << "\ngan_beta2=" << t.gan_beta2
     << "\ncritic_iters=" << t.critic_iters << "\ngen_epochs=" << t.gen_epochs
     << "\nmapper_epochs=" << t.mapper_epochs << "\ncls_epochs=" << t.cls_epochs
     << "\nseed=" << t.seed << "\ndist=" << kind_name(t.dist) << "\ngate=" << gate_name(t.gate)
     << "\nd_z=" << t.d_z << "\ng_hidden=" << dims_name(t.g_hidden)
     << "\nd_hidden=" << dims_name(t.d_hidden) << "\nm_hidden=" << dims_name(t.m_hidden)
     << "\nleaky_slope=" << t.leaky_slope << "\nvanilla_ce=" << (t.vanilla_ce ? 1 : 0)
     << "\nfree_weights=" << (t.free_weights ? 1 : 0) << "\ndrop_z=" << (t.drop_z ? 1 : 0)
     << "\nfgm_step=" << t.fgm_step << "\nl2_coeff=" << t.l2_coeff
     << "\nresample_pseudo=" << (t.resample_pseudo ? 1 : 0)
     << "\ncov_mode=" << cov_name(t.cov_mode) << "\nsvg_sigma=" << t.svg_sigma
     << "\nlvg_sigma=" << t.lvg_sigma << "\n";
  if (!os) throw FormatError("write failed for " + path);
}

// --- dataset + output helpers --------------------------------------------------

struct DataPaths {
  std::string features;
  std::string attributes;
  std::string split;
};

// --data DIR is shorthand for the three canonical file names; explicit paths win.
DataPaths resolve_data(const std::string& dir, DataPaths explicit_paths) {
  DataPaths p = explicit_paths;
  if (!dir.empty()) {
    if (p.features.empty()) p.features = (fs::path(dir) / "features.dgzm").string();
    if (p.attributes.empty()) p.attributes = (fs::path(dir) / "attributes.dgzm").string();
    if (p.split.empty()) p.split = (fs::path(dir) / "split.json").string();
  }
  if (p.features.empty() || p.attributes.empty() || p.split.empty())
    throw ConfigError("need --data DIR or all of --features/--attributes/--split");
  return p;
}

std::string ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("this command requires --out DIR");
  fs::create_directories(out);
  return out;
}

void print_report_header() {
  std::printf("%8s %8s %8s %8s %10s %10s %8s %8s\n", "a_u", "a_s", "h", "t1", "cmmd", "cacd",
              "a_is", "a_iu");
}

void print_report_row(const MetricsReport& r) {
  std::printf("%8.2f %8.2f %8.2f %8.2f %10.4f %10.4f %8.2f %8.2f\n", r.a_u, r.a_s, r.h, r.t1,
              r.cmmd, r.cacd, r.a_is, r.a_iu);
}

// --- gradcheck suite -----------------------------------------------------------

LogitContext random_context(Rng& rng, int n, int k_seen, int k_unseen, int d, double tau) {
  LogitContext ctx;
  ctx.features = normalize_rows(rng.gaussian_matrix<double>(n, d));
  ctx.class_weights = normalize_rows(rng.gaussian_matrix<double>(k_seen + k_unseen, d));
  ctx.tau = tau;
  for (int c = 0; c < k_seen; ++c) ctx.seen_ids.push_back(c);
  for (int c = 0; c < k_unseen; ++c) ctx.unseen_ids.push_back(k_seen + c);
  for (int i = 0; i < n; ++i)
    ctx.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k_seen + k_unseen))));
  return ctx;
}

struct CheckRow {
  std::string name;
  double err;
  double tol;
  bool pass() const { return err < tol; }
};

CheckRow check_pull_push_identity(int instances) {
  Rng rng(2024);
  double worst = 0;
  for (int t = 0; t < instances; ++t) {
    LogitContext ctx = random_context(rng, 4 + static_cast<int>(rng.below(9)), 3, 2, 5,
                                      0.04 + 0.96 * rng.uniform());
    for (int k : ctx.seen_ids) {
      CeGradParts parts = ce_grad_decomposition(ctx, k);
      worst = std::max(worst, max_abs(sub(add(parts.pull, parts.push),
                                          ce_weight_row_neg_grad(ctx, k))));
    }
  }
  return {"pull/push split reassembles the tape CE gradient", worst, 1e-8};
}

CheckRow check_three_term_identity(int instances) {
  Rng rng(2025);
  double worst = 0;
  for (int t = 0; t < instances; ++t) {
    LogitContext ctx = random_context(rng, 4 + static_cast<int>(rng.below(9)), 3, 2, 5,
                                      0.04 + 0.96 * rng.uniform());
    const double l1 = rng.uniform();
    const double l2 = 0.1 + rng.uniform();
    for (int u : ctx.unseen_ids) {
      IceUnseenGradTerms terms = rce_unseen_grad(ctx, l1, l2, u);
      worst = std::max(worst,
                       max_abs(sub(terms.sum(), ice_weight_row_neg_grad(ctx, l1, l2, u))));
    }
  }
  return {"three-term unseen split reassembles the tape gradient", worst, 1e-8};
}

CheckRow check_ce_fd() {
  Rng rng(2026);
  LogitContext ctx = random_context(rng, 8, 3, 2, 5, 0.3);
  Tape tape;
  Var w = tape.leaf(ctx.class_weights);
  Var loss = cross_entropy_graph(tape, tape.constant(ctx.features), w, ctx.tau, ctx.labels);
  const std::vector<Var> wrt{w};
  Matrix analytic = tape.value(tape.gradients(loss, wrt)[0]);
  auto loss_at = [&](const Matrix& wm) {
    Tape t;
    return scalar_value(
        cross_entropy_graph(t, t.constant(ctx.features), t.constant(wm), ctx.tau, ctx.labels));
  };
  return {"plain CE tape gradient vs finite differences",
          finite_diff_check(loss_at, ctx.class_weights, analytic, 1e-6), 1e-5};
}

CheckRow check_revised_fd() {
  Rng rng(2027);
  LogitContext ctx = random_context(rng, 8, 3, 2, 5, 0.3);
  const double l1 = 0.25;
  const std::vector<int> part = ctx.partition();
  Tape tape;
  Var w = tape.leaf(ctx.class_weights);
  Var loss = revised_ce_graph(tape, tape.constant(ctx.features), w, ctx.tau, ctx.labels, part, l1);
  const std::vector<Var> wrt{w};
  Matrix analytic = tape.value(tape.gradients(loss, wrt)[0]);
  auto loss_at = [&](const Matrix& wm) {
    Tape t;
    return scalar_value(revised_ce_graph(t, t.constant(ctx.features), t.constant(wm), ctx.tau,
                                         ctx.labels, part, l1));
  };
  return {"revised CE tape gradient vs finite differences",
          finite_diff_check(loss_at, ctx.class_weights, analytic, 1e-6), 1e-5};
}

CheckRow check_incremental_fd() {
  Rng rng(2028);
  LogitContext ctx = random_context(rng, 8, 3, 2, 5, 0.3);
  const std::vector<int> part = ctx.partition();
  Tape tape;
  Var w = tape.leaf(ctx.class_weights);
  Var loss = incremental_ce_graph(tape, tape.constant(ctx.features), w, ctx.tau, ctx.labels,
                                  part, 0.6, 1.3);
  const std::vector<Var> wrt{w};
  Matrix analytic = tape.value(tape.gradients(loss, wrt)[0]);
  auto loss_at = [&](const Matrix& wm) {
    Tape t;
    return scalar_value(incremental_ce_graph(t, t.constant(ctx.features), t.constant(wm),
                                             ctx.tau, ctx.labels, part, 0.6, 1.3));
  };
  return {"incremental CE tape gradient vs finite differences",
          finite_diff_check(loss_at, ctx.class_weights, analytic, 1e-6), 1e-5};
}

CheckRow check_center_fd() {
  Rng rng(2029);
  MlpSpec spec{{3, 6, 4}};
  spec.hidden_activation = Activation::kLeakyRelu;
  Mlp mapper = init_mlp(spec, rng);
  Matrix attrs = rng.gaussian_matrix<double>(4, 3);
  Matrix x = rng.gaussian_matrix<double>(10, 4);
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) y.push_back(static_cast<int>(rng.below(4)));

  Tape tape;
  TapedMlp taped = lift(tape, mapper);
  Var loss = center_mse_graph(tape, taped, attrs, x, y);
  const std::vector<Var> wrt{taped.params()[0]};
  Matrix analytic = tape.value(tape.gradients(loss, wrt)[0]);
  auto loss_at = [&](const Matrix& w0) {
    Mlp m2 = mapper;
    m2.weights[0] = w0;
    return center_mse(m2, attrs, x, y);
  };
  return {"center-regression tape gradient vs finite differences",
          finite_diff_check(loss_at, mapper.weights[0], analytic, 1e-6), 1e-5};
}

std::pair<CheckRow, CheckRow> check_adversarial_fd() {
  Rng rng(2030);
  MlpSpec gspec{{4, 5, 3}};
  gspec.output_activation = Activation::kRelu;
  Mlp g = init_mlp(gspec, rng);
  MlpSpec dspec{{5, 4, 1}};
  Mlp d = init_mlp(dspec, rng);
  for (auto& b : d.biases)
    for (auto& v : b.data()) v = 0.1 * rng.gaussian();
  const Matrix x_real = rng.gaussian_matrix<double>(6, 3);
  const Matrix attrs = rng.gaussian_matrix<double>(6, 2);
  const double l0 = 10.0;
  const std::uint64_t seed = 515151;

  Tape tape;
  Rng draw(seed);
  WganGpGraph graph = wgan_gp_graph(tape, g, d, x_real, attrs, draw, l0);
  const std::vector<Var> d_wrt{graph.d.params()[0]};
  const std::vector<Var> g_wrt{graph.g.params()[0]};
  Matrix d_analytic = tape.value(tape.gradients(graph.d_loss, d_wrt)[0]);
  Matrix g_analytic = tape.value(tape.gradients(graph.g_loss, g_wrt)[0]);

  auto d_loss_at = [&](const Matrix& w0) {
    Mlp dm = d;
    dm.weights[0] = w0;
    Rng r(seed);
    return wgan_gp_losses(g, dm, x_real, attrs, r, l0).d_loss;
  };
  auto g_loss_at = [&](const Matrix& w0) {
    Mlp gm = g;
    gm.weights[0] = w0;
    Rng r(seed);
    return wgan_gp_losses(gm, d, x_real, attrs, r, l0).g_loss;
  };
  CheckRow dc{"adversarial critic tape gradient vs finite differences",
              finite_diff_check(d_loss_at, d.weights[0], d_analytic, 1e-5), 1e-4};
  CheckRow gc{"adversarial generator tape gradient vs finite differences",
              finite_diff_check(g_loss_at, g.weights[0], g_analytic, 1e-5), 1e-4};
  return {dc, gc};
}

int cmd_gradcheck(int instances) {
  std::vector<CheckRow> rows;
  rows.push_back(check_pull_push_identity(instances));
  rows.push_back(check_three_term_identity(instances));
  rows.push_back(check_ce_fd());
  rows.push_back(check_revised_fd());
  rows.push_back(check_incremental_fd());
  rows.push_back(check_center_fd());
  auto [dc, gc] = check_adversarial_fd();
  rows.push_back(dc);
  rows.push_back(gc);

  bool all = true;
  std::printf("%-58s %12s %9s %s\n", "check", "max_err", "tol", "status");
  for (const CheckRow& r : rows) {
    all = all && r.pass();
    std::printf("%-58s %12.3e %9.0e %s\n", r.name.c_str(), r.err, r.tol,
                r.pass() ? "PASS" : "FAIL");
  }
  return all ? 0 : 1;
}

// --- subcommand bodies -----------------------------------------------------------

int cmd_synth(Config& cfg, const std::string& out) {
  SynthSpec spec = synth_spec_from(cfg);
  cfg.reject_unknown_keys();
  const std::string dir = ensure_out_dir(out);
  SynthDataset sd = synth_dataset(spec);
  save_dataset(sd.dataset, (fs::path(dir) / "features.dgzm").string(),
               (fs::path(dir) / "attributes.dgzm").string(),
               (fs::path(dir) / "split.json").string());
  save_matrix(sd.true_centers, (fs::path(dir) / "true_centers.dgzm").string());
  std::printf("wrote %s: %d samples, %d seen + %d unseen classes, d_x=%d, d_a=%d\n", dir.c_str(),
              sd.dataset.num_samples(), spec.seen_classes, spec.unseen_classes, spec.d_x,
              spec.d_a);
  return 0;
}

void export_model(const DgzResult& res, const std::string& dir) {
  if (res.model.uses_free_weights)
    save_matrix(res.model.free_w, (fs::path(dir) / "weights.dgzm").string());
  else
    save_mlp(res.model.mapping, (fs::path(dir) / "mapping.dgzw").string());
  if (res.model.config.dist == PseudoKind::kGen)
    save_mlp(res.gen.g, (fs::path(dir) / "generator.dgzw").string());
  if (res.model.config.dist == PseudoKind::kGcScg)
    save_mlp(res.center_mapper, (fs::path(dir) / "center_mapper.dgzw").string());

  std::vector<std::vector<double>> curve_rows;
  for (std::size_t e = 0; e < res.model.curve.size(); ++e)
    curve_rows.push_back({static_cast<double>(e), res.model.curve[e]});
  write_table_csv((fs::path(dir) / "curve.csv").string(), {"epoch", "loss"}, curve_rows);
}

int cmd_train(Config& cfg, const DataPaths& data, const std::string& out) {
  TrainConfig t = train_config_from(cfg);
  cfg.reject_unknown_keys();
  const std::string dir = ensure_out_dir(out);
  Dataset ds = load_dataset(data.features, data.attributes, data.split);
  DgzResult res = run_dgz(ds, t);
  export_report(res.report, (fs::path(dir) / "report").string());
  export_model(res, dir);
  write_resolved_config(t, (fs::path(dir) / "resolved.cfg").string());
  print_report_header();
  print_report_row(res.report);
  return 0;
}

int cmd_eval(Config& cfg, const DataPaths& data, const std::string& model_dir,
             const std::string& out) {
  TrainConfig t = train_config_from(cfg);
  cfg.reject_unknown_keys();
  Dataset ds = load_dataset(data.features, data.attributes, data.split);

  TrainedModel model;
  model.config = t;
  const fs::path mapping = fs::path(model_dir) / "mapping.dgzw";
  const fs::path weights = fs::path(model_dir) / "weights.dgzm";
  if (fs::exists(mapping)) {
    model.mapping = load_mlp(mapping.string());
  } else if (fs::exists(weights)) {
    model.uses_free_weights = true;
    model.free_w = load_matrix(weights.string());
  } else {
    throw FormatError("no checkpoint found under " + model_dir);
  }

  MetricsReport rep = evaluate(model, ds);
  if (!out.empty()) export_report(rep, (fs::path(ensure_out_dir(out)) / "report").string());
  print_report_header();
  print_report_row(rep);
  return 0;
}

int cmd_probe(Config& cfg, const DataPaths& data, const std::string& out) {
  TrainConfig t = train_config_from(cfg);
  cfg.reject_unknown_keys();
  Dataset ds = load_dataset(data.features, data.attributes, data.split);
  std::vector<ProbeRow> rows = probe_distributions(ds, t);

  std::printf("%-8s %8s %8s %8s %8s %10s\n", "dist", "t1", "a_u", "a_s", "h", "cmmd");
  for (const ProbeRow& r : rows)
    std::printf("%-8s %8.2f %8.2f %8.2f %8.2f %10.4f\n", kind_name(r.kind).c_str(), r.report.t1,
                r.report.a_u, r.report.a_s, r.report.h, r.report.cmmd);

  if (!out.empty()) {
    const std::string dir = ensure_out_dir(out);
    std::ofstream os(fs::path(dir) / "probe.csv");
    if (!os) throw FormatError("cannot open probe.csv under " + dir);
    os << "dist,t1,a_u,a_s,h,cmmd\n";
    for (const ProbeRow& r : rows)
      os << kind_name(r.kind) << ',' << detail::format_double(r.report.t1) << ','
         << detail::format_double(r.report.a_u) << ',' << detail::format_double(r.report.a_s)
         << ',' << detail::format_double(r.report.h) << ','
         << detail::format_double(r.report.cmmd) << '\n';
    if (!os) throw FormatError("write failed for probe.csv");
  }
  return 0;
}

int cmd_toy2d(Config& cfg, const std::string& out) {
  TrainConfig t = train_config_from(cfg);
  cfg.reject_unknown_keys();
  const std::string dir = ensure_out_dir(out);
  Toy2dResult res = toy2d(t);

  std::printf("%8s %10s %10s %10s %10s\n", "sigma", "mean_x", "mean_y", "std_x", "std_y");
  std::vector<std::vector<double>> summary;
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const Toy2dRun& run = res.runs[i];
    std::printf("%8.3g %10.4f %10.4f %10.4f %10.4f\n", run.sigma, run.mean[0], run.mean[1],
                run.stddev[0], run.stddev[1]);
    summary.push_back({run.sigma, run.mean[0], run.mean[1], run.stddev[0], run.stddev[1]});
    save_matrix_csv(run.samples,
                    (fs::path(dir) / ("toy_samples_" + std::to_string(i) + ".csv")).string());
  }
  write_table_csv((fs::path(dir) / "toy_summary.csv").string(),
                  {"sigma", "mean_x", "mean_y", "std_x", "std_y"}, summary);
  return 0;
}

int cmd_genbound(Config& cfg, const DataPaths& data, const std::string& out) {
  TrainConfig t = train_config_from(cfg);
  const std::vector<int> class_counts = dims_from(cfg.get_string("class_counts", "10,20,30,40"));
  const int fixed_total = cfg.get_int("fixed_total", 600);
  const std::vector<int> per_class_counts =
      dims_from(cfg.get_string("per_class_counts", "15,30,45,60"));
  const int fixed_classes = cfg.get_int("fixed_classes", 40);
  cfg.reject_unknown_keys();

  Dataset ds = load_dataset(data.features, data.attributes, data.split);
  GenboundResult res = genbound_study(ds, t, class_counts, fixed_total, per_class_counts,
                                      fixed_classes);

  std::printf("%-12s %8s %8s %10s\n", "experiment", "x", "h", "cmmd");
  for (const GenboundCell& cell : res.cells)
    std::printf("%-12s %8.3g %8.2f %10.4f\n", cell.experiment.c_str(), cell.x, cell.h, cell.cmmd);

  if (!out.empty()) {
    const std::string dir = ensure_out_dir(out);
    std::ofstream os(fs::path(dir) / "genbound.csv");
    if (!os) throw FormatError("cannot open genbound.csv under " + dir);
    os << "experiment,x,h,cmmd\n";
    for (const GenboundCell& cell : res.cells)
      os << cell.experiment << ',' << detail::format_double(cell.x) << ','
         << detail::format_double(cell.h) << ',' << detail::format_double(cell.cmmd) << '\n';
    if (!os) throw FormatError("write failed for genbound.csv");
  }
  return 0;
}

int cmd_ablate(Config& cfg, const DataPaths& data, int variant, const std::string& out) {
  TrainConfig t = train_config_from(cfg);
  cfg.reject_unknown_keys();
  Dataset ds = load_dataset(data.features, data.attributes, data.split);
  AblationResult res = run_ablation(ds, variant, t);
  std::printf("variant %d%s%s\n", res.variant, res.center_source.empty() ? "" : ", centers: ",
              res.center_source.c_str());
  print_report_header();
  print_report_row(res.report);
  if (!out.empty())
    export_report(res.report,
                  (fs::path(ensure_out_dir(out)) / ("report_v" + std::to_string(variant))).string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-shot training toolkit"};
  app.require_subcommand(1);

  // Shared option storage; each subcommand wires the subset it uses.
  std::string config_path, out_dir, data_dir, model_dir;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  DataPaths paths;
  int variant = 0;
  int instances = 100;

  auto add_common = [&](CLI::App* sub, bool with_data) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", sets, "override one config key (key=value, repeatable)");
    sub->add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t v) { seed = v; seed_given = true; }, "master RNG seed");
    sub->add_option("--out", out_dir, "output directory");
    if (with_data) {
      sub->add_option("--data", data_dir, "dataset directory (features.dgzm etc.)");
      sub->add_option("--features", paths.features, "feature matrix path");
      sub->add_option("--attributes", paths.attributes, "attribute matrix path");
      sub->add_option("--split", paths.split, "split JSON path");
    }
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth, false);
  CLI::App* train = app.add_subcommand("train", "train and export reports");
  add_common(train, true);
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--model", model_dir, "checkpoint directory")->required();
  CLI::App* probe = app.add_subcommand("probe-dist", "compare pseudo distribution builders");
  add_common(probe, true);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "run the gradient self-check suite");
  gradcheck->add_option("--instances", instances, "random instances per identity check")
      ->check(CLI::PositiveNumber);
  CLI::App* toy = app.add_subcommand("toy2d", "2-D generator sanity experiment");
  add_common(toy, false);
  CLI::App* genbound = app.add_subcommand("genbound", "attribute generalization study");
  add_common(genbound, true);
  CLI::App* ablate = app.add_subcommand("ablate", "run one ablation variant");
  add_common(ablate, true);
  ablate->add_option("--variant", variant, "ablation variant (1-6)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Config cfg = merged_config(config_path, sets);
    if (seed_given) cfg.set("seed", std::to_string(seed));

    if (synth->parsed()) return cmd_synth(cfg, out_dir);
    if (gradcheck->parsed()) return cmd_gradcheck(instances);
    if (toy->parsed()) return cmd_toy2d(cfg, out_dir);

    DataPaths data = resolve_data(data_dir, paths);
    if (train->parsed()) return cmd_train(cfg, data, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(cfg, data, model_dir, out_dir);
    if (probe->parsed()) return cmd_probe(cfg, data, out_dir);
    if (genbound->parsed()) return cmd_genbound(cfg, data, out_dir);
    if (ablate->parsed()) return cmd_ablate(cfg, data, variant, out_dir);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "dgz: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "dgz: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dgz: %s\n", e.what());
    return 1;
  }
}
