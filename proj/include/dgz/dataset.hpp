#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgz/binio.hpp"
#include "dgz/error.hpp"
#include "dgz/matrix.hpp"
#include "dgz/rng.hpp"

namespace dgz {

// A zero-shot dataset: per-sample features and labels, one attribute row per
// class, a seen/unseen class split, and three disjoint sample partitions.
// Class ids are dense: seen and unseen together cover 0..C-1 exactly, so the
// attribute matrix row index *is* the class id.
struct Dataset {
  Matrix features;          // n x d_x
  std::vector<int> labels;  // n
  Matrix attributes;        // C x d_a
  std::vector<int> seen_ids;
  std::vector<int> unseen_ids;
  std::vector<int> train_seen;    // row indices into features
  std::vector<int> test_seen;     // row indices into features
  std::vector<int> test_unseen;   // row indices into features

  int num_classes() const { return attributes.rows(); }
  int num_samples() const { return features.rows(); }

  bool is_seen(int class_id) const {
    return std::find(seen_ids.begin(), seen_ids.end(), class_id) != seen_ids.end();
  }

  Matrix gather_features(const std::vector<int>& rows) const {
    return take_rows(features, rows);
  }

  std::vector<int> gather_labels(const std::vector<int>& rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (int r : rows) {
      if (r < 0 || r >= num_samples()) throw ContractError("dataset: row index out of range");
      out.push_back(labels[static_cast<std::size_t>(r)]);
    }
    return out;
  }

  // Checks every structural invariant; throws FormatError naming the first
  // violated field. Called by the loaders so a Dataset in hand is always valid.
  void validate() const {
    if (features.rows() != static_cast<int>(labels.size()))
      throw FormatError("dataset: features rows != label count");
    if (attributes.rows() <= 0 || attributes.cols() <= 0)
      throw FormatError("dataset: attributes matrix is empty");
    const int c = num_classes();

    std::set<int> seen(seen_ids.begin(), seen_ids.end());
    std::set<int> unseen(unseen_ids.begin(), unseen_ids.end());
    if (seen.size() != seen_ids.size()) throw FormatError("dataset: duplicate seen class id");
    if (unseen.size() != unseen_ids.size()) throw FormatError("dataset: duplicate unseen class id");
    for (int id : seen)
      if (unseen.count(id)) throw FormatError("dataset: class " + std::to_string(id) + " is both seen and unseen");
    if (static_cast<int>(seen.size() + unseen.size()) != c)
      throw FormatError("dataset: seen+unseen classes must cover every attribute row exactly once");
    for (int id : seen_ids)
      if (id < 0 || id >= c) throw FormatError("dataset: seen id out of attribute range");
    for (int id : unseen_ids)
      if (id < 0 || id >= c) throw FormatError("dataset: unseen id out of attribute range");

    for (int y : labels)
      if (y < 0 || y >= c) throw FormatError("dataset: label out of class range");

    std::set<int> used;
    auto check_partition = [&](const std::vector<int>& part, const char* name) {
      for (int r : part) {
        if (r < 0 || r >= num_samples())
          throw FormatError(std::string("dataset: ") + name + " index out of range");
        if (!used.insert(r).second)
          throw FormatError(std::string("dataset: ") + name + " overlaps another partition");
      }
    };
    check_partition(train_seen, "train_seen");
    check_partition(test_seen, "test_seen");
    check_partition(test_unseen, "test_unseen");

    for (int r : train_seen)
      if (!seen.count(labels[static_cast<std::size_t>(r)]))
        throw FormatError("dataset: train_seen contains an unseen-class sample");
    for (int r : test_seen)
      if (!seen.count(labels[static_cast<std::size_t>(r)]))
        throw FormatError("dataset: test_seen contains an unseen-class sample");
    for (int r : test_unseen)
      if (!unseen.count(labels[static_cast<std::size_t>(r)]))
        throw FormatError("dataset: test_unseen contains a seen-class sample");
  }
};

// ---------------------------------------------------------------------------
// Matrix files. Binary layout ("DGZM"): magic, u32 LE rows, u32 LE cols,
// then rows*cols float32 LE values in row-major order. The CSV alternative
// carries the same float32 payload as text, one row per line, so the two
// encodings of a matrix load bit-identically.
// ---------------------------------------------------------------------------

inline void save_matrix(const Matrix& m, std::ostream& out) {
  binio::write_magic(out, "DGZM");
  binio::write_u32(out, static_cast<std::uint32_t>(m.rows()));
  binio::write_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) binio::write_f32(out, static_cast<float>(m(i, j)));
}

inline void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  save_matrix(m, out);
  if (!out) throw FormatError("write failed: " + path);
}

inline Matrix load_matrix(std::istream& in, const std::string& what = "matrix") {
  binio::expect_magic(in, "DGZM", what);
  const std::uint32_t rows = binio::read_u32(in);
  const std::uint32_t cols = binio::read_u32(in);
  if (rows == 0 || cols == 0) throw FormatError(what + ": zero dimension");
  if (rows > (1u << 24) || cols > (1u << 24)) throw FormatError(what + ": implausible dimension");
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = static_cast<double>(binio::read_f32(in));
  return m;
}

inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  return load_matrix(in, path);
}

inline void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  char buf[64];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      // %.9g round-trips any float32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(static_cast<float>(m(i, j))));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + path);
}

inline Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) throw FormatError(path + ": trailing junk in cell '" + cell + "'");
        // Quantize through float32 so CSV and binary encodings agree.
        row.push_back(static_cast<double>(static_cast<float>(v)));
      } catch (const std::invalid_argument&) {
        throw FormatError(path + ": unparseable cell '" + cell + "'");
      } catch (const std::out_of_range&) {
        throw FormatError(path + ": out-of-range cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path + ": ragged rows");
    if (row.empty()) throw FormatError(path + ": empty row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": no data");
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

// ---------------------------------------------------------------------------
// Split metadata: a small JSON document holding per-sample labels, the
// seen/unseen class lists, and the three partition index arrays.
// ---------------------------------------------------------------------------

inline void save_split(const Dataset& ds, const std::string& path) {
  nlohmann::ordered_json j;
  j["labels"] = ds.labels;
  j["seen"] = ds.seen_ids;
  j["unseen"] = ds.unseen_ids;
  j["train_seen"] = ds.train_seen;
  j["test_seen"] = ds.test_seen;
  j["test_unseen"] = ds.test_unseen;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("write failed: " + path);
}

// Loads features + attributes from DGZM files and the rest from the split
// JSON; validates every Dataset invariant before returning.
inline Dataset load_dataset(const std::string& features_path, const std::string& attributes_path,
                            const std::string& split_path) {
  Dataset ds;
  ds.features = load_matrix(features_path);
  ds.attributes = load_matrix(attributes_path);

  std::ifstream in(split_path);
  if (!in) throw FormatError("cannot open: " + split_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(split_path + ": bad JSON: " + e.what());
  }
  auto grab = [&](const char* key) -> std::vector<int> {
    if (!j.contains(key)) throw FormatError(split_path + ": missing field '" + key + "'");
    try {
      return j.at(key).get<std::vector<int>>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError(split_path + ": field '" + std::string(key) + "' is not an integer array");
    }
  };
  ds.labels = grab("labels");
  ds.seen_ids = grab("seen");
  ds.unseen_ids = grab("unseen");
  ds.train_seen = grab("train_seen");
  ds.test_seen = grab("test_seen");
  ds.test_unseen = grab("test_unseen");
  ds.validate();
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& features_path,
                         const std::string& attributes_path, const std::string& split_path) {
  save_matrix(ds.features, features_path);
  save_matrix(ds.attributes, attributes_path);
  save_split(ds, split_path);
}

// ---------------------------------------------------------------------------
// Synthetic ground-truth dataset: attributes are drawn at random, class
// centers are a fixed random affine map of the attributes (plus optional
// map noise), and samples are isotropic Gaussians around the centers. The
// true centers and covariance are returned alongside so evaluation can be
// checked against a known answer.
// ---------------------------------------------------------------------------

struct SynthSpec {
  int seen_classes = 20;
  int unseen_classes = 5;
  int d_x = 64;
  int d_a = 16;
  double map_noise = 0.0;   // per-center Gaussian offset from the affine map
  double cov_scale = 0.1;   // within-class std (isotropic)
  int per_class = 200;      // samples per class
  double test_fraction = 0.2;  // share of each seen class held out as test
  std::uint64_t seed = 1;

  void validate() const {
    if (seen_classes <= 0 || unseen_classes <= 0) throw ConfigError("synth: class counts must be positive");
    if (d_x <= 0 || d_a <= 0) throw ConfigError("synth: dimensions must be positive");
    if (per_class < 2) throw ConfigError("synth: need at least 2 samples per class");
    if (map_noise < 0 || cov_scale < 0) throw ConfigError("synth: scales must be nonnegative");
    if (test_fraction < 0 || test_fraction >= 1) throw ConfigError("synth: test_fraction must be in [0,1)");
  }
};

struct SynthDataset {
  Dataset dataset;
  Matrix true_centers;   // C x d_x, the exact class means
  double true_std = 0;   // isotropic within-class std used for sampling
};

inline SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const int c = spec.seen_classes + spec.unseen_classes;

  Rng attr_rng(Rng::mix(spec.seed, 1));
  Rng map_rng(Rng::mix(spec.seed, 2));
  Rng sample_rng(Rng::mix(spec.seed, 3));

  SynthDataset out;
  Dataset& ds = out.dataset;

  ds.attributes = Matrix(c, spec.d_a);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < spec.d_a; ++j) ds.attributes(i, j) = attr_rng.uniform();

  // Fixed affine map: centers = attrs * W + bias, entries scaled so center
  // coordinates stay O(1) regardless of d_a.
  Matrix w = map_rng.gaussian_matrix<double>(spec.d_a, spec.d_x);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_a));
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j) w(i, j) *= w_scale;
  Matrix bias = map_rng.gaussian_matrix<double>(1, spec.d_x);

  out.true_centers = matmul(ds.attributes, w);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < spec.d_x; ++j) {
      out.true_centers(i, j) += bias(0, j);
      if (spec.map_noise > 0) out.true_centers(i, j) += spec.map_noise * map_rng.gaussian();
    }
  out.true_std = spec.cov_scale;

  const int n = c * spec.per_class;
  ds.features = Matrix(n, spec.d_x);
  ds.labels.assign(static_cast<std::size_t>(n), 0);
  for (int k = 0; k < spec.seen_classes; ++k) ds.seen_ids.push_back(k);
  for (int k = spec.seen_classes; k < c; ++k) ds.unseen_ids.push_back(k);

  int row = 0;
  for (int k = 0; k < c; ++k) {
    // Every seen class keeps at least one held-out sample so the evaluation
    // metrics (which reject empty classes) always have something to average.
    const int test_count = (k < spec.seen_classes)
                               ? std::max(1, static_cast<int>(spec.per_class * spec.test_fraction))
                               : spec.per_class;
    for (int s = 0; s < spec.per_class; ++s, ++row) {
      for (int j = 0; j < spec.d_x; ++j)
        ds.features(row, j) = out.true_centers(k, j) + spec.cov_scale * sample_rng.gaussian();
      ds.labels[static_cast<std::size_t>(row)] = k;
      if (k < spec.seen_classes) {
        if (s < spec.per_class - test_count)
          ds.train_seen.push_back(row);
        else
          ds.test_seen.push_back(row);
      } else {
        ds.test_unseen.push_back(row);
      }
    }
  }
  ds.validate();
  return out;
}

// Restricts a dataset to a subset of its seen classes (keeping every unseen
// class) and optionally caps the number of training rows per kept seen class.
// Class ids are remapped to stay dense: kept seen classes first, in the order
// given, then the unseen classes in their original order.
inline Dataset subset_dataset(const Dataset& ds, const std::vector<int>& seen_subset,
                              int train_per_class_cap = 0) {
  if (seen_subset.empty()) throw ContractError("subset_dataset: empty seen subset");
  if (train_per_class_cap < 0) throw ContractError("subset_dataset: negative cap");
  std::vector<int> old_to_new(static_cast<std::size_t>(ds.num_classes()), -1);
  int next_id = 0;
  for (int c : seen_subset) {
    if (c < 0 || c >= ds.num_classes() || !ds.is_seen(c))
      throw ContractError("subset_dataset: class " + std::to_string(c) + " is not a seen class");
    if (old_to_new[static_cast<std::size_t>(c)] != -1)
      throw ContractError("subset_dataset: duplicate class in subset");
    old_to_new[static_cast<std::size_t>(c)] = next_id++;
  }
  for (int c : ds.unseen_ids) old_to_new[static_cast<std::size_t>(c)] = next_id++;

  Dataset out;
  out.attributes = Matrix(next_id, ds.attributes.cols());
  for (int c = 0; c < ds.num_classes(); ++c) {
    const int nc = old_to_new[static_cast<std::size_t>(c)];
    if (nc < 0) continue;
    for (int j = 0; j < ds.attributes.cols(); ++j) out.attributes(nc, j) = ds.attributes(c, j);
  }
  for (int i = 0; i < static_cast<int>(seen_subset.size()); ++i) out.seen_ids.push_back(i);
  for (int i = 0; i < static_cast<int>(ds.unseen_ids.size()); ++i)
    out.unseen_ids.push_back(static_cast<int>(seen_subset.size()) + i);

  std::vector<int> keep_rows;
  std::vector<int> new_part_tag;  // 0 train_seen, 1 test_seen, 2 test_unseen
  std::vector<int> taken(static_cast<std::size_t>(ds.num_classes()), 0);
  auto consider = [&](const std::vector<int>& part, int tag, bool capped) {
    for (int r : part) {
      const int y = ds.labels[static_cast<std::size_t>(r)];
      if (old_to_new[static_cast<std::size_t>(y)] < 0) continue;
      if (capped && train_per_class_cap > 0 && taken[static_cast<std::size_t>(y)] >= train_per_class_cap)
        continue;
      if (capped) ++taken[static_cast<std::size_t>(y)];
      keep_rows.push_back(r);
      new_part_tag.push_back(tag);
    }
  };
  consider(ds.train_seen, 0, true);
  consider(ds.test_seen, 1, false);
  consider(ds.test_unseen, 2, false);

  out.features = take_rows(ds.features, keep_rows);
  out.labels.reserve(keep_rows.size());
  for (std::size_t i = 0; i < keep_rows.size(); ++i) {
    const int y = ds.labels[static_cast<std::size_t>(keep_rows[i])];
    out.labels.push_back(old_to_new[static_cast<std::size_t>(y)]);
    if (new_part_tag[i] == 0)
      out.train_seen.push_back(static_cast<int>(i));
    else if (new_part_tag[i] == 1)
      out.test_seen.push_back(static_cast<int>(i));
    else
      out.test_unseen.push_back(static_cast<int>(i));
  }
  out.validate();
  return out;
}

}  // namespace dgz
