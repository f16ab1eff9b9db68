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

#ifndef OBSCTL_AUGMENTED_MODEL_HPP_
#define OBSCTL_AUGMENTED_MODEL_HPP_

#include <functional>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

#include "obsctl/error.hpp"
#include "obsctl/integration.hpp"
#include "obsctl/linalg.hpp"

namespace oc {

// Plant state concatenated with the held control: chi = [x; u].
struct AugmentedState {
  Vector x;
  Vector u;

  Index state_dim() const { return x.size(); }
  Index control_dim() const { return u.size(); }
  Index dim() const { return x.size() + u.size(); }

  Vector stacked() const {
    Vector chi(dim());
    chi << x, u;
    return chi;
  }

  static AugmentedState split(const Vector& chi, Index n) {
    detail::require_dims(n >= 0 && n <= chi.size(), "AugmentedState::split: bad n");
    return {chi.head(n), chi.tail(chi.size() - n)};
  }
};

// Phi = [[A, B], [0, I]] and H = [[C, D], [0, I]].
struct AugmentedMatrices {
  Matrix transition;
  Matrix sensitivity;
};

inline Matrix augmented_transition(const Matrix& a, const Matrix& b) {
  detail::require_dims(a.rows() == a.cols(), "augmented_transition: A not square");
  detail::require_dims(b.rows() == a.rows(), "augmented_transition: B rows != n");
  const Index n = a.rows();
  const Index m = b.cols();
  Matrix phi = Matrix::Zero(n + m, n + m);
  phi.topLeftCorner(n, n) = a;
  phi.topRightCorner(n, m) = b;
  phi.bottomRightCorner(m, m).setIdentity();
  return phi;
}

inline AugmentedMatrices build_augmented(const Matrix& a, const Matrix& b,
                                         const Matrix& c, const Matrix& d) {
  const Index n = a.rows();
  const Index m = b.cols();
  detail::require_dims(c.cols() == n, "build_augmented: C cols != n");
  detail::require_dims(d.rows() == c.rows() && d.cols() == m,
                       "build_augmented: D must be nu x m");
  const Index nu = c.rows();
  Matrix h = Matrix::Zero(nu + m, n + m);
  h.topLeftCorner(nu, n) = c;
  h.topRightCorner(nu, m) = d;
  h.bottomRightCorner(m, m).setIdentity();
  return {augmented_transition(a, b), std::move(h)};
}

// Quadratic objective weights: state, control, state-control cross term and
// control-rate penalty.
struct LqrWeights {
  Matrix state;    // n x n
  Matrix control;  // m x m
  Matrix cross;    // n x m
  Matrix rate;     // m x m

  Index state_dim() const { return state.rows(); }
  Index control_dim() const { return control.rows(); }

  Matrix blocked() const {
    const Index n = state.rows();
    const Index m = control.rows();
    Matrix w(n + m, n + m);
    w << state, cross, cross.transpose(), control;
    return w;
  }

  void validate() const {
    const Index n = state.rows();
    const Index m = control.rows();
    detail::require_dims(state.cols() == n, "LqrWeights: state weight not square");
    detail::require_dims(control.cols() == m, "LqrWeights: control weight not square");
    detail::require_dims(cross.rows() == n && cross.cols() == m,
                         "LqrWeights: cross weight must be n x m");
    detail::require_dims(rate.rows() == m && rate.cols() == m,
                         "LqrWeights: rate weight must be m x m");
    const Matrix w = blocked();
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + w.cwiseAbs().maxCoeff()))
      throw DomainError("LqrWeights: blocked penalty not symmetric");
    if (min_symmetric_eigenvalue(w) < -1e-10 * (1.0 + w.cwiseAbs().maxCoeff()))
      throw DomainError("LqrWeights: blocked penalty not positive semidefinite");
    if ((rate - rate.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + rate.cwiseAbs().maxCoeff()))
      throw DomainError("LqrWeights: rate penalty not symmetric");
  }
};

struct FilterCovariances {
  Matrix process;      // eta x eta, zero state block
  Matrix measurement;  // mu x mu
};

// blkdiag(0_n, rate^-1). The state block is exactly zero: the dynamics are a
// hard constraint.
inline Matrix process_noise_from_rate(Index n, const Matrix& rate) {
  detail::require_dims(rate.rows() == rate.cols(), "rate penalty not square");
  return block_diagonal(Matrix::Zero(n, n), spd_inverse(rate, "control-rate penalty"));
}

// Measurement covariance is the inverse of the blocked penalty; process
// covariance carries the inverse control-rate penalty.
inline FilterCovariances map_lqr_weights(const LqrWeights& w) {
  w.validate();
  return {process_noise_from_rate(w.state_dim(), w.rate),
          symmetrized(spd_inverse(w.blocked(), "blocked state/control penalty"))};
}

struct DiscreteLti {
  Matrix a;
  Matrix b;
};

// Zero-order-hold discretization: exp([[Ac, Bc], [0, 0]] dt) = [[A, B], [0, I]].
inline DiscreteLti discretize_lti(const Matrix& ac, const Matrix& bc, double dt) {
  if (!(dt > 0.0)) throw DomainError("discretize_lti: dt must be positive");
  detail::require_dims(ac.rows() == ac.cols(), "discretize_lti: A_c not square");
  detail::require_dims(bc.rows() == ac.rows(), "discretize_lti: B_c rows != n");
  const Index n = ac.rows();
  const Index m = bc.cols();
  Matrix blk = Matrix::Zero(n + m, n + m);
  blk.topLeftCorner(n, n) = ac * dt;
  blk.topRightCorner(n, m) = bc * dt;
  const Matrix e = blk.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

// Linear-time-invariant augmented model used by the Kalman backend.
struct AugmentedModel {
  Matrix transition;     // Phi, eta x eta
  Matrix process_noise;  // Q-grave, eta x eta
  double dt = 0.0;
  Index n = 0;
  Index m = 0;

  Index eta() const { return n + m; }
  Matrix plant_a() const { return transition.topLeftCorner(n, n); }
  Matrix plant_b() const { return transition.topRightCorner(n, m); }
  Matrix rate_weight() const {
    return spd_inverse(process_noise.bottomRightCorner(m, m), "control block of Q");
  }

  void validate() const {
    const Index e = eta();
    detail::require_dims(transition.rows() == e && transition.cols() == e,
                         "AugmentedModel: Phi must be eta x eta");
    detail::require_dims(process_noise.rows() == e && process_noise.cols() == e,
                         "AugmentedModel: Q must be eta x eta");
    if (!transition.bottomLeftCorner(m, n).isZero(0.0) ||
        !transition.bottomRightCorner(m, m).isIdentity(0.0))
      throw DomainError("AugmentedModel: control rows of Phi must be [0 I]");
    if (!process_noise.topLeftCorner(n, n).isZero(0.0) ||
        !process_noise.topRightCorner(n, m).isZero(0.0))
      throw DomainError("AugmentedModel: state block of Q must be exactly zero");
    if (min_symmetric_eigenvalue(process_noise) < -1e-12)
      throw DomainError("AugmentedModel: Q not positive semidefinite");
  }
};

inline AugmentedModel make_augmented_model(const Matrix& a, const Matrix& b,
                                           const Matrix& rate, double dt) {
  AugmentedModel model{augmented_transition(a, b),
                       process_noise_from_rate(a.rows(), rate), dt, a.rows(),
                       b.cols()};
  model.validate();
  return model;
}

using Jacobian = std::function<Matrix(const Vector& x, const Vector& u)>;

// Continuous nonlinear plant xdot = g(x, u) with analytic Jacobians.
struct NonlinearPlant {
  Index n = 0;
  Index m = 0;
  double dt = 0.0;
  Dynamics dynamics;
  Jacobian jacobian_x;
  Jacobian jacobian_u;
  // RK4 substeps used for one controller step.
  int substeps = 4;
};

inline NonlinearPlant make_linear_plant(const Matrix& ac, const Matrix& bc, double dt) {
  NonlinearPlant p;
  p.n = ac.rows();
  p.m = bc.cols();
  p.dt = dt;
  p.dynamics = [ac, bc](const Vector& x, const Vector& u) -> Vector { return ac * x + bc * u; };
  p.jacobian_x = [ac](const Vector&, const Vector&) -> Matrix { return ac; };
  p.jacobian_u = [bc](const Vector&, const Vector&) -> Matrix { return bc; };
  return p;
}

// Discrete step x_{k+1} = f(x_k, u_k) by fixed-step RK4.
inline Vector propagate(const NonlinearPlant& plant, const Vector& x, const Vector& u) {
  return rk4_integrate(plant.dynamics, x, u, plant.dt, plant.substeps);
}

struct StepLinearization {
  Vector x_next;
  Matrix state_sensitivity;    // F_x
  Matrix control_sensitivity;  // F_u
};

// Integrates xdot = g, Fx' = g_x Fx, Fu' = g_x Fu + g_u jointly from
// (x, I, 0) over one controller period.
inline StepLinearization linearize_step(const NonlinearPlant& plant, const Vector& x,
                                        const Vector& u) {
  detail::require_dims(x.size() == plant.n && u.size() == plant.m,
                       "linearize_step: state/control size mismatch");
  struct Joint {
    Vector x;
    Matrix fx;
    Matrix fu;
  };
  const auto deriv = [&](const Joint& s) -> Joint {
    const Matrix gx = plant.jacobian_x(s.x, u);
    const Matrix gu = plant.jacobian_u(s.x, u);
    Joint d{plant.dynamics(s.x, u), gx * s.fx, gx * s.fu + gu};
    if (!d.x.allFinite() || !d.fx.allFinite() || !d.fu.allFinite())
      throw NonFiniteError("linearize_step: dynamics evaluation is not finite");
    return d;
  };
  const auto axpy = [](const Joint& s, double h, const Joint& d) -> Joint {
    return {s.x + h * d.x, s.fx + h * d.fx, s.fu + h * d.fu};
  };
  Joint s{x, Matrix::Identity(plant.n, plant.n), Matrix::Zero(plant.n, plant.m)};
  const double h = plant.dt / plant.substeps;
  for (int i = 0; i < plant.substeps; ++i) {
    const Joint k1 = deriv(s);
    const Joint k2 = deriv(axpy(s, 0.5 * h, k1));
    const Joint k3 = deriv(axpy(s, 0.5 * h, k2));
    const Joint k4 = deriv(axpy(s, h, k3));
    s.x += (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    s.fx += (h / 6.0) * (k1.fx + 2.0 * k2.fx + 2.0 * k3.fx + k4.fx);
    s.fu += (h / 6.0) * (k1.fu + 2.0 * k2.fu + 2.0 * k3.fu + k4.fu);
  }
  return {std::move(s.x), std::move(s.fx), std::move(s.fu)};
}

}  // namespace oc

#endif  // OBSCTL_AUGMENTED_MODEL_HPP_
