#pragma once

#include <string>
#include <vector>

#include "dgz/matrix.hpp"

namespace dgz {

// Inverse multiquadratic kernel on rows: 2d / (2d + ||x - y||^2).
inline double im_kernel(const Matrix& x, const Matrix& y) {
  if (x.rows() != 1 || y.rows() != 1 || x.cols() != y.cols())
    throw ShapeError("im_kernel: expects two row vectors of equal width");
  const int d = x.cols();
  double dist2 = 0;
  for (int j = 0; j < d; ++j) {
    const double diff = x(0, j) - y(0, j);
    dist2 += diff * diff;
  }
  return 2.0 * d / (2.0 * d + dist2);
}

namespace detail {
inline double im_kernel_rows(const Matrix& a, int i, const Matrix& b, int j) {
  const int d = a.cols();
  const double* pi = a.row_ptr(i);
  const double* pj = b.row_ptr(j);
  double dist2 = 0;
  for (int c = 0; c < d; ++c) {
    const double diff = pi[c] - pj[c];
    dist2 += diff * diff;
  }
  return 2.0 * d / (2.0 * d + dist2);
}
}  // namespace detail

// Class-averaged MMD between per-class real and pseudo sample sets, with
// unbiased within-set sums (i != j) and the cross term summed over all pairs
// including i = j — exactly the displayed estimator, kept verbatim. The
// consequence: a set measured against itself leaves the residual
// 2S/(n^2 (n-1)) - 2/n with S the sum of off-diagonal kernel values.
inline double cmmd(const std::vector<Matrix>& real_by_class,
                   const std::vector<Matrix>& pseudo_by_class) {
  if (real_by_class.size() != pseudo_by_class.size() || real_by_class.empty())
    throw ContractError("cmmd: class sets must match and be nonempty");
  double total = 0;
  for (std::size_t c = 0; c < real_by_class.size(); ++c) {
    const Matrix& r = real_by_class[c];
    const Matrix& p = pseudo_by_class[c];
    const int n = r.rows(), m = p.rows();
    if (n < 2 || m < 2)
      throw ContractError("cmmd: estimator undefined for classes with fewer than 2 samples");
    if (n != m)
      throw ContractError("cmmd: real and pseudo sample counts must match per class");
    if (r.cols() != p.cols()) throw ShapeError("cmmd: feature widths disagree");
    double within_r = 0, within_p = 0, cross = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i != j) within_r += detail::im_kernel_rows(r, i, r, j);
      }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (i != j) within_p += detail::im_kernel_rows(p, i, p, j);
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cross += detail::im_kernel_rows(r, i, p, j);
    total += within_r / (static_cast<double>(n) * (n - 1)) +
             within_p / (static_cast<double>(m) * (m - 1)) -
             2.0 * cross / (static_cast<double>(n) * m);
  }
  return total / static_cast<double>(real_by_class.size());
}

struct GzslAccuracy {
  double a_u = 0;  // percent
  double a_s = 0;  // percent
  double h = 0;    // percent
};

inline double per_class_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                                 const std::vector<int>& class_ids) {
  if (pred.size() != truth.size()) throw ContractError("accuracy: label count mismatch");
  double acc = 0;
  for (int c : class_ids) {
    int count = 0, correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != c) continue;
      ++count;
      if (pred[i] == c) ++correct;
    }
    if (count == 0)
      throw ContractError("accuracy: class " + std::to_string(c) + " has no samples to average");
    acc += static_cast<double>(correct) / count;
  }
  return 100.0 * acc / static_cast<double>(class_ids.size());
}

// Per-class top-1 accuracy averaged over unseen (A_u) and seen (A_s) classes,
// with H their harmonic mean (0 when either side is 0).
inline GzslAccuracy gzsl_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                                  const std::vector<int>& seen_ids,
                                  const std::vector<int>& unseen_ids) {
  GzslAccuracy out;
  out.a_u = per_class_accuracy(pred, truth, unseen_ids);
  out.a_s = per_class_accuracy(pred, truth, seen_ids);
  out.h = (out.a_u > 0 && out.a_s > 0) ? 2.0 * out.a_u * out.a_s / (out.a_u + out.a_s) : 0.0;
  return out;
}

// Top-1 accuracy with the argmax restricted to the given class columns;
// samples must belong to those classes. Per-class averaged, in percent.
inline double intra_accuracy(const Matrix& scores, const std::vector<int>& truth,
                             const std::vector<int>& restrict_ids) {
  if (static_cast<int>(truth.size()) != scores.rows())
    throw ContractError("intra_accuracy: one label per score row required");
  if (restrict_ids.empty()) throw ContractError("intra_accuracy: empty restriction");
  for (int y : truth) {
    bool ok = false;
    for (int c : restrict_ids) ok = ok || (c == y);
    if (!ok)
      throw ContractError("intra_accuracy: label " + std::to_string(y) +
                          " outside the restricted set");
  }
  std::vector<int> pred(truth.size());
  for (int i = 0; i < scores.rows(); ++i) {
    int best = restrict_ids.front();
    for (int c : restrict_ids) {
      if (c < 0 || c >= scores.cols()) throw ContractError("intra_accuracy: class id out of range");
      if (scores(i, c) > scores(i, best)) best = c;
    }
    pred[static_cast<std::size_t>(i)] = best;
  }
  return per_class_accuracy(pred, truth, restrict_ids);
}

// Sum over classes of sqrt(||generated center - real center||_2), as
// displayed; pass averaged=true to divide by the class count instead.
inline double cacd(const Matrix& gen_centers, const Matrix& real_centers, bool averaged = false) {
  if (!gen_centers.same_shape(real_centers)) throw ShapeError("cacd: center shapes disagree");
  double total = 0;
  for (int c = 0; c < gen_centers.rows(); ++c) {
    double dist2 = 0;
    for (int j = 0; j < gen_centers.cols(); ++j) {
      const double d = gen_centers(c, j) - real_centers(c, j);
      dist2 += d * d;
    }
    total += std::sqrt(std::sqrt(dist2));
  }
  return averaged ? total / gen_centers.rows() : total;
}

struct PerClassAccuracyRow {
  int class_id = 0;
  bool seen = false;
  double accuracy = 0;  // percent
  int count = 0;
};

// The flat bundle every evaluation emits; serialization lives with the other
// file formats in report.hpp.
struct MetricsReport {
  double a_u = 0;
  double a_s = 0;
  double h = 0;
  double t1 = 0;    // unseen-only (restricted argmax) top-1
  double cmmd = 0;
  double cacd = 0;
  double a_is = 0;  // intra-seen accuracy
  double a_iu = 0;  // intra-unseen accuracy
  std::vector<PerClassAccuracyRow> per_class;
};

}  // namespace dgz
