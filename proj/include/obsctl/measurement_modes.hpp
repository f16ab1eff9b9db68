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

#ifndef OBSCTL_MEASUREMENT_MODES_HPP_
#define OBSCTL_MEASUREMENT_MODES_HPP_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "obsctl/error.hpp"
#include "obsctl/linalg.hpp"

namespace oc {

// Residual r, sensitivity H and covariance R-grave fed to one filter update.
// The residual follows the r = z - h(chi) convention: the filter moves the
// estimate along +K r, so r points toward lower cost.
struct MeasurementTriple {
  Vector residual;    // mu
  Matrix sensitivity;  // mu x eta
  Matrix covariance;   // mu x mu

  Index rows() const { return residual.size(); }

  void validate(Index eta) const {
    const Index mu = residual.size();
    detail::require_dims(sensitivity.rows() == mu && sensitivity.cols() == eta,
                         "MeasurementTriple: H must be mu x eta");
    detail::require_dims(covariance.rows() == mu && covariance.cols() == mu,
                         "MeasurementTriple: R must be mu x mu");
    require_finite(residual, "measurement residual");
    require_finite(sensitivity, "measurement sensitivity");
    require_finite(covariance, "measurement covariance");
  }
};

// Per-horizon-step measurement source: step index and the prior mean at that
// step. Evaluated once per step, at the prior.
using MeasurementSource = std::function<MeasurementTriple(Index k, const Vector& prior)>;

// ---------------------------------------------------------------------------
// Duality-based measurement: target residual on a selected set of rows.

template <class Rows>
MeasurementTriple duality_measurement(const Vector& target, const Vector& prior,
                                      const Rows& rows, const Matrix& covariance) {
  if (std::size(rows) == 0) throw DomainError("duality_measurement: empty selection");
  detail::require_dims(target.size() == prior.size(),
                       "duality_measurement: target and prior sizes differ");
  Matrix h = selection_matrix(rows, prior.size());
  detail::require_dims(covariance.rows() == h.rows() && covariance.cols() == h.rows(),
                       "duality_measurement: covariance must match selection");
  Vector r = h * (target - prior);
  return {std::move(r), std::move(h), covariance};
}

inline std::vector<Index> all_rows(Index eta) {
  std::vector<Index> rows(static_cast<std::size_t>(eta));
  for (Index i = 0; i < eta; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

inline std::vector<Index> leading_rows(Index count) { return all_rows(count); }

// Time-varying target z_k (augmented, length eta) measured on `rows` with a
// fixed covariance.
struct DualityObjective {
  std::function<Vector(Index k)> target;
  std::vector<Index> rows;
  Matrix covariance;

  Vector measured_target(Index k) const {
    const Vector z = target(k);
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = z(rows[i]);
    return out;
  }

  Matrix sensitivity(Index eta) const { return selection_matrix(rows, eta); }

  bool measures_full_state(Index eta) const {
    if (static_cast<Index>(rows.size()) != eta) return false;
    for (Index i = 0; i < eta; ++i)
      if (rows[static_cast<std::size_t>(i)] != i) return false;
    return true;
  }

  MeasurementTriple operator()(Index k, const Vector& prior) const {
    return duality_measurement(target(k), prior, rows, covariance);
  }
};

// ---------------------------------------------------------------------------
// One-step SQP measurement from a scalar objective.

struct ScalarObjective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

// Newton step expressed as a measurement. The Hessian pseudo-inverse is taken
// on its row space (relative cut rel_tol * sigma_max). A full-rank Hessian
// yields r = -Hess^-1 g, H = I, R = Hess^-1. A rank-deficient Hessian yields
// the same measurement written in an orthonormal row-space basis V_r:
// r = V_r^T(-Hess^+ g), H = V_r^T, R = diag(1/lambda_r). Null-space rows carry
// no information and are dropped so the innovation stays invertible.
inline MeasurementTriple sqp_measurement_from(const Vector& gradient, const Matrix& hessian,
                                              double rel_tol = 1e-10) {
  const Index eta = gradient.size();
  detail::require_dims(hessian.rows() == eta && hessian.cols() == eta,
                       "sqp_measurement: Hessian must be eta x eta");
  require_finite(gradient, "objective gradient");
  require_finite(hessian, "objective Hessian");
  const double hmax = hessian.cwiseAbs().maxCoeff();
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + hmax))
    throw DomainError("sqp_measurement: Hessian not symmetric");
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(hessian));
  const Vector& lam = es.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  if (lam(0) < -1e-8 * std::max(1.0, scale))
    throw NotMinimumError("sqp_measurement: Hessian has a negative eigenvalue");
  const SymmetricPseudoInverse pinv = symmetric_pinv(hessian, rel_tol);
  const Vector step = -(pinv.inverse * gradient);
  if (pinv.rank == eta) {
    return {step, Matrix::Identity(eta, eta), symmetrized(pinv.inverse)};
  }
  const Matrix& v = pinv.range_basis;
  Vector r = v.transpose() * step;
  Matrix h = v.transpose();
  Matrix cov = pinv.eigenvalues.cwiseInverse().asDiagonal();
  return {std::move(r), std::move(h), std::move(cov)};
}

inline MeasurementTriple sqp_measurement(const ScalarObjective& objective, const Vector& prior,
                                         double rel_tol = 1e-10) {
  return sqp_measurement_from(objective.gradient(prior), objective.hessian(prior), rel_tol);
}

// Expands a measurement with orthonormal sensitivity rows back to the full
// eta-dimensional projector form (H^T r, H^T H, H^T R H). For SQP triples this
// is (-Hess^+ g, Hess^+ Hess, Hess^+).
inline MeasurementTriple projector_form(const MeasurementTriple& t) {
  const Matrix& h = t.sensitivity;
  if (!(h * h.transpose()).isIdentity(1e-9))
    throw DomainError("projector_form: sensitivity rows are not orthonormal");
  return {h.transpose() * t.residual, h.transpose() * h, h.transpose() * t.covariance * h};
}

struct SqpObjective {
  std::function<Vector(Index k, const Vector& chi)> gradient;
  std::function<Matrix(Index k, const Vector& chi)> hessian;
  double rel_tol = 1e-10;

  MeasurementTriple operator()(Index k, const Vector& prior) const {
    return sqp_measurement_from(gradient(k, prior), hessian(k, prior), rel_tol);
  }
};

// ---------------------------------------------------------------------------
// Gradient-based measurement from a residual ("direction to better") oracle.

struct ResidualOracle {
  std::function<Vector(const Vector&)> residual;  // zero at the desired condition
  std::function<Matrix(const Vector&)> jacobian;  // d residual / d chi
};

// r = r(chi), H = -dr/dchi (sensitivity of the implied prediction h(chi) =
// z - r(chi)), R = alpha * I or alpha * block_covariance.
inline MeasurementTriple gradient_measurement(const ResidualOracle& oracle, const Vector& prior,
                                              double alpha, const Matrix& block_covariance = {}) {
  if (!(alpha > 0.0)) throw DomainError("gradient_measurement: alpha must be positive");
  Vector r = oracle.residual(prior);
  Matrix jac = oracle.jacobian(prior);
  if (!r.allFinite() || !jac.allFinite())
    throw NonFiniteError("gradient_measurement: residual or gradient not finite");
  detail::require_dims(jac.rows() == r.size() && jac.cols() == prior.size(),
                       "gradient_measurement: Jacobian must be rows(r) x eta");
  Matrix cov;
  if (block_covariance.size() == 0) {
    cov = alpha * Matrix::Identity(r.size(), r.size());
  } else {
    detail::require_dims(block_covariance.rows() == r.size() && block_covariance.cols() == r.size(),
                         "gradient_measurement: block covariance must match residual");
    cov = alpha * block_covariance;
  }
  return {std::move(r), -jac, std::move(cov)};
}

struct GradientObjective {
  std::function<Vector(Index k, const Vector& chi)> residual;
  std::function<Matrix(Index k, const Vector& chi)> jacobian;
  double alpha = 1.0;
  Matrix block_covariance;  // empty = identity

  MeasurementTriple operator()(Index k, const Vector& prior) const {
    const ResidualOracle oracle{[&](const Vector& c) { return residual(k, c); },
                                [&](const Vector& c) { return jacobian(k, c); }};
    return gradient_measurement(oracle, prior, alpha, block_covariance);
  }
};

}  // namespace oc

#endif  // OBSCTL_MEASUREMENT_MODES_HPP_
