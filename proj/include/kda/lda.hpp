#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "kda/dataset.hpp"
#include "kda/eigencore.hpp"

namespace kda {

/// Between-class scatter B = sum_c M_c (m_c - m)(m_c - m)^T and within-class
/// scatter W = sum_c sum_{x in class c} (x - m_c)(x - m_c)^T, with the class
/// and global means they are built from. B + W equals the total scatter.
struct ScatterPair {
  Matrix between;      // d x d
  Matrix within;       // d x d
  Matrix class_means;  // C x d
  Vector global_mean;  // d
  std::vector<long> class_sizes;
};

inline ScatterPair scatter_matrices(const NumericDataset& ds) {
  const long m = ds.rows();
  const long d = ds.dims();
  const int c_count = ds.classes();
  if (m < 2) throw DataError("scatter_matrices: need at least 2 rows");
  for (int c = 0; c < c_count; ++c) {
    if (ds.class_sizes[static_cast<std::size_t>(c)] < 1) {
      throw DataError("scatter_matrices: class '" + ds.class_names[static_cast<std::size_t>(c)] + "' is empty");
    }
  }

  ScatterPair out;
  out.class_sizes = ds.class_sizes;
  out.class_means.setZero(c_count, d);
  for (long r = 0; r < m; ++r) {
    out.class_means.row(ds.labels[static_cast<std::size_t>(r)]) += ds.x.row(r);
  }
  out.global_mean = ds.x.colwise().mean();
  for (int c = 0; c < c_count; ++c) {
    out.class_means.row(c) /= static_cast<double>(ds.class_sizes[static_cast<std::size_t>(c)]);
  }

  out.between.setZero(d, d);
  for (int c = 0; c < c_count; ++c) {
    const Vector delta = out.class_means.row(c).transpose() - out.global_mean;
    out.between += static_cast<double>(ds.class_sizes[static_cast<std::size_t>(c)]) * (delta * delta.transpose());
  }
  out.within.setZero(d, d);
  for (long r = 0; r < m; ++r) {
    const Vector delta = ds.x.row(r).transpose() - out.class_means.row(ds.labels[static_cast<std::size_t>(r)]).transpose();
    out.within += delta * delta.transpose();
  }
  return out;
}

/// Fisher-optimal projection: columns of `projection` solve
/// B u = lambda (W + ridge*I) u, (W+ridge*I)-orthonormal, eigenvalues
/// descending, at most min(r, C-1, rank) of them. Each column is sign-fixed
/// so its largest-magnitude entry is positive.
struct LdaModel {
  Matrix projection;  // d x r
  Vector eigenvalues;
  Vector global_mean;
  Matrix class_means;
  std::vector<long> class_sizes;
  double ridge = 0.0;
  std::vector<EncodedColumnInfo> columns;  // metadata of the fitted features

  long components() const { return static_cast<long>(projection.cols()); }
};

namespace detail {

inline void fix_column_signs(Matrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index arg = 0;
    v.col(j).cwiseAbs().maxCoeff(&arg);
    if (v(arg, j) < 0.0) v.col(j) = -v.col(j);
  }
}

}  // namespace detail

inline LdaModel fit_lda(const NumericDataset& ds, int r, std::optional<double> ridge = std::nullopt) {
  if (r < 1) throw DataError("fit_lda: requested components must be >= 1");
  if (ds.classes() < 2) throw DataError("fit_lda: need at least 2 classes");

  const ScatterPair scatter = scatter_matrices(ds);
  const double rho = ridge.value_or(default_ridge(scatter.within));

  const SymmetricMatrix b(scatter.between);
  const SymmetricMatrix w(scatter.within);
  EigenPairs pairs = generalized_sym_eig(b, w, rho);

  // discriminant rank: B has rank <= C-1 and the null directions carry no class signal
  const long cap = std::min<long>(std::min<long>(r, ds.classes() - 1), ds.dims());
  long keep = 0;
  const double lead = pairs.eigenvalues.size() > 0 ? pairs.eigenvalues(0) : 0.0;
  for (Eigen::Index i = 0; i < pairs.eigenvalues.size() && keep < cap; ++i) {
    if (pairs.eigenvalues(i) > 0.0 && pairs.eigenvalues(i) >= 1e-12 * lead) {
      ++keep;
    } else {
      break;
    }
  }

  LdaModel model;
  model.eigenvalues = pairs.eigenvalues.head(keep);
  model.projection = pairs.eigenvectors.leftCols(keep);
  detail::fix_column_signs(model.projection);
  model.global_mean = scatter.global_mean;
  model.class_means = scatter.class_means;
  model.class_sizes = scatter.class_sizes;
  model.ridge = rho;
  model.columns = ds.columns;
  return model;
}

/// Rows of X centered on the training global mean, then projected.
inline Matrix project_lda(const LdaModel& model, const Matrix& x) {
  if (x.cols() != model.projection.rows()) {
    throw DataError("project_lda: input has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(model.projection.rows()));
  }
  return (x.rowwise() - model.global_mean.transpose()) * model.projection;
}

struct FeatureScore {
  std::string name;
  int origin_index = 0;
  double score = 0.0;
};

namespace detail {

// aggregate per-encoded-column scores by origin feature, sum over one-hot
// blocks, descending with ties broken by original column index
inline std::vector<FeatureScore> aggregate_scores(const std::vector<EncodedColumnInfo>& columns,
                                                  const Vector& column_scores) {
  std::vector<FeatureScore> by_origin;
  std::unordered_map<int, std::size_t> slot;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    auto [it, inserted] = slot.emplace(columns[j].origin_index, by_origin.size());
    if (inserted) {
      by_origin.push_back({columns[j].origin, columns[j].origin_index, 0.0});
    }
    by_origin[it->second].score += column_scores(static_cast<Eigen::Index>(j));
  }
  std::stable_sort(by_origin.begin(), by_origin.end(), [](const FeatureScore& a, const FeatureScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.origin_index < b.origin_index;
  });
  return by_origin;
}

}  // namespace detail

/// Saliency of each original feature: eigenvalue-weighted squared loadings of
/// the discriminant directions, one-hot blocks summed.
inline std::vector<FeatureScore> rank_features_lda(const LdaModel& model) {
  if (model.columns.empty()) throw DataError("rank_features_lda: model carries no feature metadata");
  Vector scores = Vector::Zero(model.projection.rows());
  for (Eigen::Index i = 0; i < model.projection.cols(); ++i) {
    scores += model.eigenvalues(i) * model.projection.col(i).array().square().matrix();
  }
  return detail::aggregate_scores(model.columns, scores);
}

}  // namespace kda
