#pragma once

#include <map>
#include <string>
#include <vector>

#include "dgz/matrix.hpp"
#include "dgz/mlp.hpp"
#include "dgz/rng.hpp"

namespace dgz {

// The pseudo-unseen families under comparison: generator output (GEN),
// small/large-variance isotropic Gaussians (SVG/LVG), statistical-covariance
// Gaussians around real class centers (SCG), and SCG around mapper-predicted
// centers (GC_SCG).
enum class PseudoKind { kGen, kSvg, kLvg, kScg, kGcScg };

inline std::string to_string(PseudoKind k) {
  switch (k) {
    case PseudoKind::kGen: return "gen";
    case PseudoKind::kSvg: return "svg";
    case PseudoKind::kLvg: return "lvg";
    case PseudoKind::kScg: return "scg";
    case PseudoKind::kGcScg: return "gc_scg";
  }
  throw ContractError("unknown pseudo kind");
}

inline PseudoKind pseudo_kind_from(const std::string& s) {
  if (s == "gen") return PseudoKind::kGen;
  if (s == "svg") return PseudoKind::kSvg;
  if (s == "lvg") return PseudoKind::kLvg;
  if (s == "scg") return PseudoKind::kScg;
  if (s == "gc_scg") return PseudoKind::kGcScg;
  throw ConfigError("unknown pseudo distribution kind: " + s);
}

struct PseudoSet {
  Matrix features;
  std::vector<int> labels;  // unseen class ids, per_class_count rows per class
  PseudoKind kind = PseudoKind::kSvg;
  int per_class_count = 0;

  void validate(const std::vector<int>& unseen_ids) const {
    if (static_cast<int>(labels.size()) != features.rows())
      throw ContractError("PseudoSet: one label per row required");
    std::map<int, int> counts;
    for (int y : labels) ++counts[y];
    for (const auto& [y, c] : counts) {
      bool known = false;
      for (int u : unseen_ids) known = known || (u == y);
      if (!known) throw ContractError("PseudoSet: label " + std::to_string(y) + " is not unseen");
      if (c != per_class_count)
        throw ContractError("PseudoSet: class " + std::to_string(y) + " has " + std::to_string(c) +
                            " rows, expected " + std::to_string(per_class_count));
    }
  }
};

// Mean feature row per requested class id; output row i belongs to class_ids[i].
inline Matrix class_centers(const Matrix& features, const std::vector<int>& labels,
                            const std::vector<int>& class_ids) {
  if (static_cast<int>(labels.size()) != features.rows())
    throw ContractError("class_centers: one label per row required");
  Matrix centers(static_cast<int>(class_ids.size()), features.cols());
  for (std::size_t ci = 0; ci < class_ids.size(); ++ci) {
    int count = 0;
    for (int i = 0; i < features.rows(); ++i) {
      if (labels[static_cast<std::size_t>(i)] != class_ids[ci]) continue;
      ++count;
      for (int j = 0; j < features.cols(); ++j) centers(static_cast<int>(ci), j) += features(i, j);
    }
    if (count == 0)
      throw ContractError("class_centers: class " + std::to_string(class_ids[ci]) + " is empty");
    for (int j = 0; j < features.cols(); ++j) centers(static_cast<int>(ci), j) /= count;
  }
  return centers;
}

enum class CovarianceMode { kPooledWithinClass, kGlobal };

// Training-set covariance used by the generator-free builders. Pooled mode
// centers every sample on its class mean and divides by n - C; global mode
// centers on the grand mean and divides by n - 1.
inline Matrix statistical_covariance(const Matrix& features, const std::vector<int>& labels,
                                     CovarianceMode mode = CovarianceMode::kPooledWithinClass) {
  if (static_cast<int>(labels.size()) != features.rows())
    throw ContractError("statistical_covariance: one label per row required");
  const int n = features.rows(), d = features.cols();

  std::vector<int> distinct;
  for (int y : labels) {
    bool seen_before = false;
    for (int v : distinct) seen_before = seen_before || (v == y);
    if (!seen_before) distinct.push_back(y);
  }
  const int c = static_cast<int>(distinct.size());
  const int denom = mode == CovarianceMode::kPooledWithinClass ? n - c : n - 1;
  if (denom <= 0)
    throw ContractError("statistical_covariance: need more samples than classes");

  Matrix centered = features;
  if (mode == CovarianceMode::kPooledWithinClass) {
    const Matrix centers = class_centers(features, labels, distinct);
    std::map<int, int> row_of;
    for (std::size_t i = 0; i < distinct.size(); ++i) row_of[distinct[i]] = static_cast<int>(i);
    for (int i = 0; i < n; ++i) {
      const int cr = row_of[labels[static_cast<std::size_t>(i)]];
      for (int j = 0; j < d; ++j) centered(i, j) -= centers(cr, j);
    }
  } else {
    const Matrix mu = col_mean(features);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) centered(i, j) -= mu(0, j);
  }
  return scale(matmul_tn(centered, centered), 1.0 / denom);
}

// Mean over dimensions of the pooled within-class standard deviation; the
// data-relative scale the SVG/LVG defaults hang off.
inline double mean_within_class_std(const Matrix& features, const std::vector<int>& labels) {
  const Matrix cov = statistical_covariance(features, labels);
  double acc = 0;
  for (int j = 0; j < cov.cols(); ++j) acc += std::sqrt(std::max(0.0, cov(j, j)));
  return acc / cov.cols();
}

struct PseudoParams {
  // Isotropic std for SVG/LVG; negative means "derive from the data":
  // 0.1x (SVG) and 3x (LVG) the mean within-class per-dimension std.
  double svg_sigma = -1.0;
  double lvg_sigma = -1.0;
  CovarianceMode cov_mode = CovarianceMode::kPooledWithinClass;
  double jitter = 1e-6;
  const Mlp* generator = nullptr;      // required for GEN
  const Mlp* center_mapper = nullptr;  // required for GC_SCG
  Matrix unseen_attrs;                 // row i = attributes of unseen_ids[i]; GEN / GC_SCG
  // Gaussian noise added to the attribute rows fed to the generator (GEN
  // only). Zero keeps the attributes clean; prior-free generators rely on
  // this for within-class diversity.
  double gen_attr_sigma = 0.0;
};

// Draws per_class rows for every unseen class. centers row i corresponds to
// unseen_ids[i] (ignored by GEN, which places samples wherever the generator
// does, and by GC_SCG, which predicts its own centers). Sampling is
// deterministic given the rng: each class uses an independent substream.
inline PseudoSet build_pseudo_unseen(PseudoKind kind, const Matrix& centers,
                                     const std::vector<int>& unseen_ids,
                                     const Matrix& train_features,
                                     const std::vector<int>& train_labels, int per_class,
                                     const PseudoParams& params, Rng& rng) {
  if (per_class <= 0) throw ContractError("build_pseudo_unseen: per_class must be positive");
  const int u = static_cast<int>(unseen_ids.size());
  if (u == 0) throw ContractError("build_pseudo_unseen: no unseen classes");

  PseudoSet out;
  out.kind = kind;
  out.per_class_count = per_class;
  out.labels.reserve(static_cast<std::size_t>(u) * per_class);

  const std::uint64_t master = rng.next_u64();
  auto class_rng = [&](int ci) {
    return Rng(master ^ static_cast<std::uint64_t>(unseen_ids[static_cast<std::size_t>(ci)]));
  };

  auto require_centers = [&] {
    if (centers.rows() != u)
      throw ContractError("build_pseudo_unseen: one center row per unseen class required");
  };

  switch (kind) {
    case PseudoKind::kSvg:
    case PseudoKind::kLvg: {
      require_centers();
      double sigma = kind == PseudoKind::kSvg ? params.svg_sigma : params.lvg_sigma;
      if (sigma < 0) {
        const double base = mean_within_class_std(train_features, train_labels);
        sigma = (kind == PseudoKind::kSvg ? 0.1 : 3.0) * base;
      }
      Matrix chol = scale(Matrix::identity(centers.cols()), sigma);
      for (int ci = 0; ci < u; ++ci) {
        Rng r = class_rng(ci);
        out.features = vstack(out.features, sample_gaussian(extract_row(centers, ci), chol,
                                                            per_class, r));
      }
      break;
    }
    case PseudoKind::kScg:
    case PseudoKind::kGcScg: {
      Matrix base_centers;
      if (kind == PseudoKind::kScg) {
        require_centers();
        base_centers = centers;
      } else {
        if (params.center_mapper == nullptr)
          throw ContractError("build_pseudo_unseen: GC_SCG requires a center mapper");
        if (params.unseen_attrs.rows() != u)
          throw ContractError("build_pseudo_unseen: one attribute row per unseen class required");
        base_centers = mlp_forward(*params.center_mapper, params.unseen_attrs);
      }
      const Matrix cov = statistical_covariance(train_features, train_labels, params.cov_mode);
      const Matrix chol = cholesky_psd(cov, params.jitter);
      for (int ci = 0; ci < u; ++ci) {
        Rng r = class_rng(ci);
        out.features = vstack(out.features, sample_gaussian(extract_row(base_centers, ci), chol,
                                                            per_class, r));
      }
      break;
    }
    case PseudoKind::kGen: {
      if (params.generator == nullptr)
        throw ContractError("build_pseudo_unseen: GEN requires a generator");
      if (params.unseen_attrs.rows() != u)
        throw ContractError("build_pseudo_unseen: one attribute row per unseen class required");
      const int d_a = params.unseen_attrs.cols();
      const int d_z = params.generator->spec.in_dim() - d_a;
      if (d_z < 0) throw ShapeError("build_pseudo_unseen: generator input width too small");
      if (params.gen_attr_sigma < 0)
        throw ContractError("build_pseudo_unseen: gen_attr_sigma must be nonnegative");
      for (int ci = 0; ci < u; ++ci) {
        Rng r = class_rng(ci);
        Matrix z = d_z > 0 ? r.gaussian_matrix<double>(per_class, d_z) : Matrix();
        Matrix a(per_class, d_a);
        for (int i = 0; i < per_class; ++i)
          for (int j = 0; j < d_a; ++j)
            a(i, j) = params.unseen_attrs(ci, j) +
                      (params.gen_attr_sigma > 0 ? params.gen_attr_sigma * r.gaussian() : 0.0);
        out.features = vstack(out.features,
                              mlp_forward(*params.generator, d_z > 0 ? hconcat(z, a) : a));
      }
      break;
    }
  }

  for (int ci = 0; ci < u; ++ci)
    for (int i = 0; i < per_class; ++i) out.labels.push_back(unseen_ids[static_cast<std::size_t>(ci)]);
  out.validate(unseen_ids);
  return out;
}

// Center-substitution protocol: rigidly translate each class block so its
// empirical mean lands exactly on the corresponding row of new_centers.
inline PseudoSet recenter(const PseudoSet& set, const std::vector<int>& unseen_ids,
                          const Matrix& new_centers) {
  if (new_centers.rows() != static_cast<int>(unseen_ids.size()))
    throw ContractError("recenter: one center row per unseen class required");
  PseudoSet out = set;
  const Matrix current = class_centers(set.features, set.labels, unseen_ids);
  for (int i = 0; i < out.features.rows(); ++i) {
    int ci = -1;
    for (std::size_t k = 0; k < unseen_ids.size(); ++k)
      if (unseen_ids[k] == out.labels[static_cast<std::size_t>(i)]) ci = static_cast<int>(k);
    for (int j = 0; j < out.features.cols(); ++j)
      out.features(i, j) += new_centers(ci, j) - current(ci, j);
  }
  return out;
}

}  // namespace dgz
