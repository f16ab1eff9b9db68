// Copyright 2026 The obsctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OBSCTL_LINALG_HPP_
#define OBSCTL_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "obsctl/error.hpp"

namespace oc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteError(std::string(what) + " is not finite");
}

inline Matrix block_diagonal(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

// Moore-Penrose inverse of a symmetric matrix via eigendecomposition.
// Eigenvalues with |lambda| <= rel_tol * max|lambda| are treated as zero, so
// the result is symmetric and exact on the retained subspace.
struct SymmetricPseudoInverse {
  Matrix inverse;
  Matrix range_basis;  // orthonormal columns spanning the retained subspace
  Vector eigenvalues;  // retained eigenvalues, same order as range_basis
  Index rank = 0;
};

inline SymmetricPseudoInverse symmetric_pinv(const Matrix& m,
                                             double rel_tol = 1e-10) {
  detail::require_dims(m.rows() == m.cols(), "symmetric_pinv: matrix not square");
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector& lam = es.eigenvalues();
  const double scale = lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0;
  const double cut = rel_tol * scale;
  SymmetricPseudoInverse out;
  out.inverse = Matrix::Zero(m.rows(), m.cols());
  // Eigen orders eigenvalues ascending; keep the largest first so ties are
  // broken toward dropping the smaller direction.
  out.range_basis.resize(m.rows(), 0);
  std::vector<Index> keep;
  for (Index i = lam.size() - 1; i >= 0; --i) {
    if (std::abs(lam(i)) > cut && scale > 0.0) keep.push_back(i);
  }
  out.rank = static_cast<Index>(keep.size());
  out.range_basis.resize(m.rows(), out.rank);
  out.eigenvalues.resize(out.rank);
  for (Index j = 0; j < out.rank; ++j) {
    const Index i = keep[static_cast<std::size_t>(j)];
    out.range_basis.col(j) = es.eigenvectors().col(i);
    out.eigenvalues(j) = lam(i);
    out.inverse.noalias() +=
        es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / lam(i);
  }
  return out;
}

inline Matrix pinv_sym(const Matrix& m, double rel_tol = 1e-10) {
  return symmetric_pinv(m, rel_tol).inverse;
}

// rhs * P^+ for symmetric PSD P. A Cholesky solve is used whenever P is
// numerically nonsingular (reciprocal condition above kCholeskyRcond, about
// 1e3 eps); otherwise the eigen pseudo-inverse with the given relative cut.
// On ill-conditioned priors the Cholesky solve is far more accurate than the
// eigen route, because rhs and P carry correlated rounding errors.
inline constexpr double kCholeskyRcond = 1e-13;

inline Matrix right_solve_psd(const Matrix& rhs, const Matrix& p, double rel_tol = 1e-10) {
  detail::require_dims(p.rows() == p.cols() && rhs.cols() == p.rows(), "right_solve_psd: shape");
  const Eigen::LLT<Matrix> llt(p);
  if (llt.info() == Eigen::Success && llt.rcond() > kCholeskyRcond)
    return llt.solve(rhs.transpose()).transpose();
  return rhs * pinv_sym(p, rel_tol);
}

// Largest singular value, from the smaller Gram matrix (only the top value is
// needed, which the Gram form resolves to full precision).
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  const Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues()(gram.rows() - 1)));
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double min_symmetric_eigenvalue(const Matrix& m) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m),
                                                 Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Inverse of a symmetric positive-definite matrix; throws if the Cholesky
// factorization fails.
inline Matrix spd_inverse(const Matrix& m, const char* what) {
  const Eigen::LLT<Matrix> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) {
    throw SingularObjectiveError(std::string(what) + " is not positive definite");
  }
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

// Rows of the identity selected by `rows`, i.e. a selection matrix.
template <class Rows>
Matrix selection_matrix(const Rows& rows, Index dim) {
  Matrix h = Matrix::Zero(static_cast<Index>(std::size(rows)), dim);
  Index r = 0;
  for (auto idx : rows) {
    detail::require_dims(idx >= 0 && idx < dim, "selection row out of range");
    h(r++, idx) = 1.0;
  }
  return h;
}

}  // namespace oc

#endif  // OBSCTL_LINALG_HPP_
