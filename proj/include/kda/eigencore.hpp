#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "kda/common.hpp"

namespace kda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric matrix, validated on construction and stored in exactly
/// symmetric form ((A + A^T)/2 after the asymmetry check passes).
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix a) {
    if (a.rows() != a.cols()) {
      throw NumericError("SymmetricMatrix: matrix is not square (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ")");
    }
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
        const double tol = 1e-12 * std::max(1.0, std::abs(a(i, j)));
        if (!(std::abs(a(i, j) - a(j, i)) <= tol)) {
          throw NumericError("SymmetricMatrix: asymmetric entry at (" + std::to_string(i) + "," +
                             std::to_string(j) + ")");
        }
      }
    }
    a_ = ((a + a.transpose()) * 0.5).eval();
  }

  Eigen::Index order() const { return a_.rows(); }
  const Matrix& data() const { return a_; }

 private:
  Matrix a_;
};

/// Eigenvalues sorted descending with eigenvector columns aligned.
/// Plain problems carry unit-norm vectors; generalized problems carry
/// (M + ridge*I)-orthonormal vectors. residual_bound is the largest
/// ||A v - lambda v|| (resp. ||A v - lambda M' v||) over all pairs.
struct EigenPairs {
  Vector eigenvalues;
  Matrix eigenvectors;
  double residual_bound = 0.0;
};

/// Scale-invariant jitter for rank-deficient mass matrices: 1e-8 * trace/n.
inline double default_ridge(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return 1e-8 * m.trace() / static_cast<double>(m.rows());
}

namespace detail {

inline EigenPairs descending(const Eigen::SelfAdjointEigenSolver<Matrix>& solver) {
  const Eigen::Index n = solver.eigenvalues().size();
  EigenPairs out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

}  // namespace detail

/// Full symmetric eigendecomposition A = V diag(lambda) V^T.
inline EigenPairs sym_eig(const SymmetricMatrix& a) {
  if (!a.data().allFinite()) throw NumericError("sym_eig: matrix contains non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.data());
  if (solver.info() != Eigen::Success) throw NumericError("sym_eig: eigendecomposition failed to converge");
  EigenPairs out = detail::descending(solver);
  if (a.order() > 0) {
    const Matrix resid = a.data() * out.eigenvectors - out.eigenvectors * out.eigenvalues.asDiagonal();
    out.residual_bound = resid.colwise().norm().maxCoeff();
  }
  return out;
}

/// Generalized symmetric-definite problem A v = lambda (M + ridge*I) v.
/// Solved by Cholesky-factoring the mass matrix, reducing to a standard
/// symmetric problem, and back-transforming. Eigenvectors satisfy
/// v^T (M + ridge*I) v = 1.
inline EigenPairs generalized_sym_eig(const SymmetricMatrix& a, const SymmetricMatrix& m, double ridge) {
  if (a.order() != m.order()) {
    throw NumericError("generalized_sym_eig: operand orders differ");
  }
  if (!a.data().allFinite() || !m.data().allFinite()) {
    throw NumericError("generalized_sym_eig: matrix contains non-finite entries");
  }
  if (ridge < 0.0) throw NumericError("generalized_sym_eig: ridge must be nonnegative");

  const Eigen::Index n = m.order();
  Matrix mass = m.data();
  mass.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(mass);
  if (llt.info() != Eigen::Success) {
    throw NumericError(
        "generalized_sym_eig: mass matrix + ridge*I is not positive definite; "
        "increase the ridge");
  }

  const auto l = llt.matrixL();
  // C = L^-1 A L^-T, symmetrized against round-off before decomposing
  Matrix c = l.solve(a.data());
  c = l.solve(c.transpose()).transpose().eval();
  c = ((c + c.transpose()) * 0.5).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(c);
  if (solver.info() != Eigen::Success) {
    throw NumericError("generalized_sym_eig: eigendecomposition failed to converge");
  }
  EigenPairs out = detail::descending(solver);
  out.eigenvectors = l.transpose().solve(out.eigenvectors).eval();
  if (n > 0) {
    const Matrix resid = a.data() * out.eigenvectors - mass * out.eigenvectors * out.eigenvalues.asDiagonal();
    out.residual_bound = resid.colwise().norm().maxCoeff();
  }
  return out;
}

}  // namespace kda
