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

#ifndef OBSCTL_LQR_ORACLE_HPP_
#define OBSCTL_LQR_ORACLE_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "obsctl/augmented_model.hpp"
#include "obsctl/error.hpp"
#include "obsctl/linalg.hpp"

namespace oc {

// Infinite-horizon discrete LQR for x+ = A x + B u with stage cost
// x'Qx + 2 x'M u + u'Ru. The optimal policy is u = -K x.
struct LqrSolution {
  Matrix gain;      // K
  Matrix riccati;   // P
  int iterations = 0;
  double residual = 0.0;  // max-abs Riccati defect
};

struct DareOptions {
  // On the relative fixed-point change. Once below 1e-10 the iteration also
  // stops when the change stalls at the rounding floor.
  double tolerance = 1e-15;
  int max_iterations = 100000;
  std::optional<Matrix> initial;  // P seed, default Q
};

namespace detail {

inline Matrix riccati_map(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                          const Matrix& m, const Matrix& p, Matrix* gain) {
  const Matrix bp = b.transpose() * p;
  const Matrix lhs = symmetrized(r + bp * b);
  const Matrix rhs = bp * a + m.transpose();
  const Eigen::LLT<Matrix> llt(lhs);
  if (llt.info() != Eigen::Success)
    throw SingularObjectiveError("solve_dare: R + B'PB is not positive definite");
  Matrix k = llt.solve(rhs);
  Matrix next = symmetrized(q + a.transpose() * p * a - rhs.transpose() * k);
  if (gain) *gain = std::move(k);
  return next;
}

}  // namespace detail

inline LqrSolution solve_dare(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r,
                              const Matrix& m, const DareOptions& opts = {}) {
  const Index n = a.rows();
  const Index nu = b.cols();
  detail::require_dims(a.cols() == n && b.rows() == n, "solve_dare: A/B shape");
  detail::require_dims(q.rows() == n && q.cols() == n, "solve_dare: Q must be n x n");
  detail::require_dims(r.rows() == nu && r.cols() == nu, "solve_dare: R must be m x m");
  detail::require_dims(m.rows() == n && m.cols() == nu, "solve_dare: M must be n x m");
  Matrix p = opts.initial ? *opts.initial : q;
  detail::require_dims(p.rows() == n && p.cols() == n, "solve_dare: initial P shape");
  LqrSolution sol;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Matrix next = detail::riccati_map(a, b, q, r, m, p, nullptr);
    if (!next.allFinite()) throw ConvergenceError("solve_dare: Riccati iteration diverged");
    const double change = (next - p).cwiseAbs().maxCoeff();
    const double scale = 1.0 + next.cwiseAbs().maxCoeff();
    p = std::move(next);
    sol.iterations = it;
    if (change <= opts.tolerance * scale) break;
    if (change < best) {
      best = change;
      stalled = 0;
    } else if (change <= 1e-10 * scale && ++stalled >= 20) {
      break;
    }
    if (scale > 1e100) throw ConvergenceError("solve_dare: Riccati iteration diverged");
  }
  Matrix k;
  const Matrix again = detail::riccati_map(a, b, q, r, m, p, &k);
  sol.residual = (again - p).cwiseAbs().maxCoeff();
  if (!(sol.residual <= 1e-10 * (1.0 + p.cwiseAbs().maxCoeff())))
    throw ConvergenceError("solve_dare: no fixed point within the iteration budget");
  if (spectral_radius(a - b * k) >= 1.0)
    throw ConvergenceError("solve_dare: closed loop is not stable (pair not stabilizable?)");
  sol.gain = std::move(k);
  sol.riccati = std::move(p);
  return sol;
}

inline LqrSolution solve_dare(const Matrix& a, const Matrix& b, const Matrix& q,
                              const Matrix& r) {
  return solve_dare(a, b, q, r, Matrix::Zero(a.rows(), b.cols()));
}

// First-stage gain of the finite-horizon problem with `stages` decisions and
// zero terminal cost.
inline Matrix finite_horizon_gain(const Matrix& a, const Matrix& b, const Matrix& q,
                                  const Matrix& r, const Matrix& m, int stages) {
  if (stages < 1) throw DomainError("finite_horizon_gain: stages must be >= 1");
  Matrix p = Matrix::Zero(a.rows(), a.rows());
  Matrix k;
  for (int i = 0; i < stages; ++i) p = detail::riccati_map(a, b, q, r, m, p, &k);
  return k;
}

// LQR problem equivalent to smoothing with the augmented model. With
// y_k = Phi chi_{k-1} the pre-increment augmented state and w_k the control
// increment, y_{k+1} = Phi y_k + Phi E w_k with E = [0; I] and stage cost
// (y + E w)' W (y + E w) + w' Rtilde w, W = H' Rgrave^-1 H.
struct AugmentedLqrProblem {
  Matrix a;
  Matrix b;
  Matrix q;
  Matrix r;
  Matrix m;
};

inline AugmentedLqrProblem augmented_lqr_problem(const AugmentedModel& model, const Matrix& h,
                                                 const Matrix& measurement_cov) {
  const Index eta = model.eta();
  detail::require_dims(h.cols() == eta, "augmented_lqr_problem: H must have eta columns");
  const Matrix w = symmetrized(h.transpose() * spd_inverse(measurement_cov, "measurement covariance") * h);
  Matrix e = Matrix::Zero(eta, model.m);
  e.bottomRows(model.m).setIdentity();
  return {model.transition, model.transition * e, w,
          symmetrized(e.transpose() * w * e + model.rate_weight()), w * e};
}

// Reactive gain K_lqr (m x eta): the optimal first increment is
// u_0 - u_last = K_lqr (z_0 - chi_0) for an equilibrium-consistent target.
inline LqrSolution augmented_lqr(const AugmentedModel& model, const Matrix& h,
                                 const Matrix& measurement_cov, const DareOptions& opts = {}) {
  const AugmentedLqrProblem p = augmented_lqr_problem(model, h, measurement_cov);
  return solve_dare(p.a, p.b, p.q, p.r, p.m, opts);
}

// u_ss = B^+ (I - A) x_ref, the least-squares solution of x_ref = A x_ref + B u.
inline Vector steady_state_control(const Matrix& a, const Matrix& b, const Vector& x_ref) {
  detail::require_dims(a.rows() == a.cols() && b.rows() == a.rows() && x_ref.size() == a.rows(),
                       "steady_state_control: shape mismatch");
  const Eigen::ColPivHouseholderQR<Matrix> qr(b);
  if (qr.rank() < b.cols())
    throw SingularObjectiveError("steady_state_control: B is rank deficient");
  const Vector rhs = (Matrix::Identity(a.rows(), a.cols()) - a) * x_ref;
  return qr.solve(rhs);
}

// N = ceil(log(eps) / (2 log(lambda_max))).
inline int estimate_horizon(double lambda_max, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("estimate_horizon: eps must lie in (0, 1)");
  if (!(lambda_max > 0.0)) throw DomainError("estimate_horizon: lambda_max must be positive");
  if (lambda_max >= 1.0)
    throw DomainError("estimate_horizon: lambda_max >= 1, no finite horizon estimate");
  return static_cast<int>(std::ceil(std::log(eps) / (2.0 * std::log(lambda_max))));
}

}  // namespace oc

#endif  // OBSCTL_LQR_ORACLE_HPP_
