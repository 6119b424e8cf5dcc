#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "kda/eigencore.hpp"

namespace kda {

enum class KernelFamily { gaussian, linear, polynomial };

inline std::string kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::linear: return "linear";
    case KernelFamily::polynomial: return "polynomial";
  }
  return "?";
}

inline KernelFamily parse_kernel_family(const std::string& s) {
  if (s == "gaussian") return KernelFamily::gaussian;
  if (s == "linear") return KernelFamily::linear;
  if (s == "polynomial") return KernelFamily::polynomial;
  throw ConfigError("unknown kernel family: '" + s + "'");
}

/// Kernel description. Gaussian uses the plain-denominator form
/// k(x, y) = exp(-||x - y||^2 / s); polynomial is (x.y + offset)^degree.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double gaussian_s = 0.1;
  int poly_degree = 2;
  double poly_offset = 1.0;

  void validate() const {
    if (family == KernelFamily::gaussian && !(gaussian_s > 0.0)) {
      throw ConfigError("gaussian kernel denominator must be positive");
    }
    if (family == KernelFamily::polynomial && poly_degree < 1) {
      throw ConfigError("polynomial kernel degree must be >= 1");
    }
  }

  double eval(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const {
    switch (family) {
      case KernelFamily::gaussian: return std::exp(-(x - y).squaredNorm() / gaussian_s);
      case KernelFamily::linear: return x.dot(y);
      case KernelFamily::polynomial: return std::pow(x.dot(y) + poly_offset, poly_degree);
    }
    return 0.0;
  }
};

/// Pairwise kernel evaluations: entry (i, j) = k(x_i, y_j) over the rows of
/// X and Y. When X and Y alias the same data the result is exactly symmetric.
inline Matrix gram_matrix(const Matrix& x, const Matrix& y, const KernelSpec& spec) {
  spec.validate();
  if (x.cols() != y.cols()) {
    throw NumericError("gram_matrix: dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                       std::to_string(y.cols()) + ")");
  }
  const bool same = (&x == &y) || (x.rows() == y.rows() && x.data() == y.data());
  Matrix k(x.rows(), y.rows());
  if (same) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      k(i, i) = spec.eval(x.row(i), x.row(i));
      for (Eigen::Index j = i + 1; j < y.rows(); ++j) {
        const double v = spec.eval(x.row(i), y.row(j));
        k(i, j) = v;
        k(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        k(i, j) = spec.eval(x.row(i), y.row(j));
      }
    }
  }
  return k;
}

/// Column means and grand mean of a training Gram matrix; what the test-side
/// centering needs to reproduce the training-side transform.
struct CenteringStats {
  Vector col_means;
  double grand_mean = 0.0;
};

/// Double centering K' = K - 1K/M - K1/M + 1K1/M^2, i.e. the Gram matrix of
/// the feature-space-mean-subtracted data. Returns the centered matrix and
/// the statistics needed to center test rows consistently.
inline std::pair<Matrix, CenteringStats> center_kernel(const SymmetricMatrix& k_train) {
  const Eigen::Index m = k_train.order();
  if (m == 0) throw NumericError("center_kernel: empty matrix");
  CenteringStats stats;
  stats.col_means = k_train.data().colwise().mean();
  stats.grand_mean = stats.col_means.mean();
  Matrix centered = k_train.data();
  centered.colwise() -= stats.col_means;
  centered.rowwise() -= stats.col_means.transpose();
  centered.array() += stats.grand_mean;
  return {std::move(centered), std::move(stats)};
}

/// Test-side counterpart of center_kernel: rows are test points, columns the
/// training basis the stats were computed on.
inline Matrix center_test_kernel(const Matrix& k_test, const CenteringStats& stats) {
  if (k_test.cols() != stats.col_means.size()) {
    throw NumericError("center_test_kernel: column count " + std::to_string(k_test.cols()) +
                       " does not match centering stats size " + std::to_string(stats.col_means.size()));
  }
  const Vector row_means = k_test.rowwise().mean();
  Matrix centered = k_test;
  centered.colwise() -= row_means;
  centered.rowwise() -= stats.col_means.transpose();
  centered.array() += stats.grand_mean;
  return centered;
}

}  // namespace kda
