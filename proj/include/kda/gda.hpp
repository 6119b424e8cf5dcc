#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "kda/dataset.hpp"
#include "kda/eigencore.hpp"
#include "kda/kernels.hpp"
#include "kda/lda.hpp"

namespace kda {

/// Block-diagonal class-membership matrix: the block for class c is the
/// M_c x M_c constant matrix 1/M_c. Symmetric, idempotent, row sums 1,
/// trace C. Stored implicitly through the class sizes.
struct BlockDiagD {
  std::vector<long> class_sizes;

  long order() const { return std::accumulate(class_sizes.begin(), class_sizes.end(), 0L); }

  Matrix dense() const {
    const long m = order();
    Matrix d = Matrix::Zero(m, m);
    long start = 0;
    for (long size : class_sizes) {
      d.block(start, start, size, size).setConstant(1.0 / static_cast<double>(size));
      start += size;
    }
    return d;
  }

  // D * X without materializing D: replaces each class block of rows by its mean
  Matrix apply(const Matrix& x) const {
    if (x.rows() != order()) throw NumericError("BlockDiagD::apply: row count mismatch");
    Matrix out(x.rows(), x.cols());
    long start = 0;
    for (long size : class_sizes) {
      out.block(start, 0, size, x.cols()).rowwise() =
          x.block(start, 0, size, x.cols()).colwise().mean();
      start += size;
    }
    return out;
  }
};

inline BlockDiagD build_d_matrix(const std::vector<long>& class_sizes) {
  if (class_sizes.empty()) throw DataError("build_d_matrix: no classes");
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    if (class_sizes[c] <= 0) {
      throw DataError("build_d_matrix: class " + std::to_string(c) + " has size " +
                      std::to_string(class_sizes[c]));
    }
  }
  return BlockDiagD{class_sizes};
}

/// Overload validating a row -> class map: rows must be grouped contiguously
/// in class order, consistent with the sizes.
inline BlockDiagD build_d_matrix(const std::vector<long>& class_sizes, const std::vector<int>& row_classes) {
  BlockDiagD d = build_d_matrix(class_sizes);
  if (static_cast<long>(row_classes.size()) != d.order()) {
    throw DataError("build_d_matrix: row map length does not match class sizes");
  }
  std::size_t r = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    for (long i = 0; i < class_sizes[c]; ++i, ++r) {
      if (row_classes[r] != static_cast<int>(c)) {
        throw DataError("build_d_matrix: rows are not grouped contiguously by class (row " +
                        std::to_string(r) + ")");
      }
    }
  }
  return d;
}

/// Kernel discriminant model: expansion coefficients over a retained training
/// basis. Each alpha column is normalized so the corresponding feature-space
/// direction has unit norm (alpha^T K' alpha = 1), eigenvalues lie in (0, 1]
/// (the discriminant criterion is a ratio of a projected to a full scatter).
struct GdaModel {
  Matrix basis;               // M' x d, grouped by class
  std::vector<int> basis_labels;
  std::vector<long> class_sizes;
  KernelSpec kernel;
  Matrix alphas;              // M' x r
  Vector eigenvalues;         // descending
  CenteringStats centering;
  std::vector<long> permutation;  // basis row i came from input row permutation[i]
  double ridge = 0.0;
  double rank_tol = 0.0;
  std::vector<EncodedColumnInfo> columns;

  long components() const { return static_cast<long>(alphas.cols()); }
};

struct GdaOptions {
  std::optional<double> ridge;  // default: 1e-8 * trace(K'K') / M
  double rank_tol = 1e-10;      // discard Gram eigenvalues below rank_tol * lambda_max
};

/// Fit the kernel discriminant: build the class-grouped Gram matrix, center
/// it, and solve the coefficient-space problem K'DK' a = lambda K'K' a
/// restricted to the numerical range of K'.
inline GdaModel fit_gda(const NumericDataset& ds, const KernelSpec& spec, int r,
                        const GdaOptions& options = {}) {
  spec.validate();
  if (r < 1) throw DataError("fit_gda: requested components must be >= 1");
  if (ds.classes() < 2) throw DataError("fit_gda: need at least 2 classes");
  if (!(options.rank_tol > 0.0)) throw DataError("fit_gda: rank_tol must be positive");

  GdaModel model;
  model.kernel = spec;
  model.rank_tol = options.rank_tol;
  model.columns = ds.columns;

  // regroup rows by class; within a class rows are ordered lexicographically
  // so any permutation of the same sample set builds the same basis (and the
  // same projections, bit for bit)
  const long m = ds.rows();
  model.permutation.resize(static_cast<std::size_t>(m));
  std::iota(model.permutation.begin(), model.permutation.end(), 0L);
  std::stable_sort(model.permutation.begin(), model.permutation.end(), [&](long a, long b) {
    const int la = ds.labels[static_cast<std::size_t>(a)];
    const int lb = ds.labels[static_cast<std::size_t>(b)];
    if (la != lb) return la < lb;
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) {
      if (ds.x(a, j) != ds.x(b, j)) return ds.x(a, j) < ds.x(b, j);
    }
    return false;
  });
  model.basis.resize(m, ds.dims());
  model.basis_labels.resize(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) {
    model.basis.row(i) = ds.x.row(model.permutation[static_cast<std::size_t>(i)]);
    model.basis_labels[static_cast<std::size_t>(i)] =
        ds.labels[static_cast<std::size_t>(model.permutation[static_cast<std::size_t>(i)])];
  }
  model.class_sizes = ds.class_sizes;
  const BlockDiagD d = build_d_matrix(model.class_sizes, model.basis_labels);

  const Matrix gram = gram_matrix(model.basis, model.basis, spec);
  auto [centered, stats] = center_kernel(SymmetricMatrix(gram));
  model.centering = std::move(stats);

  const EigenPairs gram_eig = sym_eig(SymmetricMatrix(centered));
  const double lead = gram_eig.eigenvalues.size() > 0 ? gram_eig.eigenvalues(0) : 0.0;
  const double kernel_scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if (!(lead > 1e-12 * kernel_scale)) {
    throw NumericError("fit_gda: centered kernel matrix is numerically zero (degenerate kernel)");
  }

  long rank = 0;
  while (rank < gram_eig.eigenvalues.size() && gram_eig.eigenvalues(rank) > options.rank_tol * lead) {
    ++rank;
  }
  const Matrix v = gram_eig.eigenvectors.leftCols(rank);
  const Vector lam = gram_eig.eigenvalues.head(rank);

  // restricted problem: with a = V beta,
  //   a^T K'DK' a = beta^T (Lam V^T D V Lam) beta,   a^T K'K' a = beta^T Lam^2 beta
  const Matrix q = v.transpose() * d.apply(v);
  const Matrix numerator = lam.asDiagonal() * q * lam.asDiagonal();
  const Matrix denominator = Matrix(lam.array().square().matrix().asDiagonal());
  const double rho = options.ridge.value_or(1e-8 * gram_eig.eigenvalues.array().square().sum() /
                                            static_cast<double>(m));

  const EigenPairs pairs =
      generalized_sym_eig(SymmetricMatrix(numerator), SymmetricMatrix(denominator), rho);
  model.ridge = rho;

  const long keep = std::min<long>(std::min<long>(r, ds.classes() - 1), rank);
  model.eigenvalues = pairs.eigenvalues.head(keep);
  model.alphas = v * pairs.eigenvectors.leftCols(keep);
  for (Eigen::Index i = 0; i < model.alphas.cols(); ++i) {
    const Vector kv = centered * model.alphas.col(i);
    const double norm2 = model.alphas.col(i).dot(kv);
    if (!(norm2 > 0.0)) throw NumericError("fit_gda: component " + std::to_string(i) + " has zero feature-space norm");
    model.alphas.col(i) /= std::sqrt(norm2);
  }
  detail::fix_column_signs(model.alphas);
  return model;
}

/// Project rows of x_test onto the fitted directions (kernel evaluations
/// against the basis, centered with the training statistics, times alphas).
/// A model with empty centering stats projects the raw kernel sums.
inline Matrix project_gda(const GdaModel& model, const Matrix& x_test) {
  if (x_test.cols() != model.basis.cols()) {
    throw DataError("project_gda: input has " + std::to_string(x_test.cols()) + " columns, model expects " +
                    std::to_string(model.basis.cols()));
  }
  const Matrix k_test = gram_matrix(x_test, model.basis, model.kernel);
  if (model.centering.col_means.size() == 0) return k_test * model.alphas;
  return center_test_kernel(k_test, model.centering) * model.alphas;
}

/// The discriminant criterion exactly as the solved problem states it:
/// (a^T K'DK' a) / (a^T K'K' a) on the centered Gram matrix.
inline double rayleigh_quotient(const SymmetricMatrix& k_centered, const BlockDiagD& d, const Vector& alpha) {
  if (alpha.size() != k_centered.order() || d.order() != k_centered.order()) {
    throw NumericError("rayleigh_quotient: dimension mismatch");
  }
  const Vector v = k_centered.data() * alpha;
  const double den = v.squaredNorm();
  if (den <= 1e-18 * std::max(1.0, alpha.squaredNorm()) * std::max(1.0, k_centered.data().squaredNorm())) {
    throw NumericError("rayleigh_quotient: alpha lies in the null space of the centered kernel");
  }
  const Vector dv = d.apply(v);
  return v.dot(dv) / den;
}

/// Sensitivity ranking of the original input features: mean absolute partial
/// derivative of the projections with respect to each input coordinate,
/// averaged over training points and components, using the analytic kernel
/// gradient. One-hot blocks are aggregated by sum.
inline std::vector<FeatureScore> rank_features_gda(const GdaModel& model, const NumericDataset& ds) {
  if (model.kernel.family == KernelFamily::linear) {
    throw NumericError("rank_features_gda: sensitivity ranking needs a gaussian or polynomial kernel");
  }
  if (ds.dims() != model.basis.cols()) {
    throw DataError("rank_features_gda: dataset does not match the fitted basis");
  }
  const long m_basis = model.basis.rows();
  const long r = model.components();
  const long d = ds.dims();

  // centering makes the projection depend on alpha only through its
  // column-centered form
  Matrix alpha_c = model.alphas;
  if (model.centering.col_means.size() > 0) alpha_c.rowwise() -= model.alphas.colwise().mean();

  Vector scores = Vector::Zero(d);
  for (long row = 0; row < ds.rows(); ++row) {
    const Vector x = ds.x.row(row).transpose();
    Matrix grad(d, r);  // d(projection_i)/dx_j
    if (model.kernel.family == KernelFamily::gaussian) {
      Vector k(m_basis);
      for (long l = 0; l < m_basis; ++l) {
        k(l) = std::exp(-(x - model.basis.row(l).transpose()).squaredNorm() / model.kernel.gaussian_s);
      }
      const Matrix weighted = k.asDiagonal() * alpha_c;           // M' x r
      const Vector sums = weighted.colwise().sum();               // r
      grad = (-2.0 / model.kernel.gaussian_s) * (x * sums.transpose() - model.basis.transpose() * weighted);
    } else {  // polynomial
      Vector u(m_basis);
      for (long l = 0; l < m_basis; ++l) {
        u(l) = std::pow(x.dot(model.basis.row(l).transpose()) + model.kernel.poly_offset,
                        model.kernel.poly_degree - 1);
      }
      grad = static_cast<double>(model.kernel.poly_degree) * model.basis.transpose() *
             (u.asDiagonal() * alpha_c);
    }
    scores += grad.cwiseAbs().rowwise().sum();
  }
  scores /= static_cast<double>(ds.rows() * std::max<long>(r, 1));
  return detail::aggregate_scores(model.columns, scores);
}

}  // namespace kda
