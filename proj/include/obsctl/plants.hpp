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

#ifndef OBSCTL_PLANTS_HPP_
#define OBSCTL_PLANTS_HPP_

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "obsctl/augmented_model.hpp"
#include "obsctl/error.hpp"
#include "obsctl/linalg.hpp"

namespace oc {

struct ContinuousLti {
  Matrix a;
  Matrix b;
};

// ---------------------------------------------------------------------------
// Mass-spring-damper: m xdd + b xd + k x = F.

struct MsdParams {
  double mass = 1.0;
  double damping = 1.0;
  double stiffness = 2.0;
};

inline ContinuousLti msd_continuous(const MsdParams& p = {}) {
  if (!(p.mass > 0.0)) throw DomainError("msd: mass must be positive");
  Matrix a(2, 2);
  a << 0.0, 1.0, -p.stiffness / p.mass, -p.damping / p.mass;
  Matrix b(2, 1);
  b << 0.0, 1.0 / p.mass;
  return {a, b};
}

inline LqrWeights msd_weights() {
  LqrWeights w;
  w.state = Eigen::Vector2d(10.0, 1.0).asDiagonal();
  w.control = Matrix::Constant(1, 1, 0.1);
  w.cross = Matrix::Zero(2, 1);
  w.rate = Matrix::Constant(1, 1, 0.1);
  return w;
}

inline NonlinearPlant msd_plant(double dt, const MsdParams& p = {}) {
  const ContinuousLti c = msd_continuous(p);
  return make_linear_plant(c.a, c.b, dt);
}

// ---------------------------------------------------------------------------
// Linear drag: m [xdd; ydd] + b [xd; yd] = [Fx; Fy]; state (x, y, xd, yd).

struct LinearDragParams {
  double mass = 1.0;
  double drag = 1.0;
};

inline ContinuousLti linear_drag_continuous(const LinearDragParams& p = {}) {
  if (!(p.mass > 0.0)) throw DomainError("linear drag: mass must be positive");
  Matrix a = Matrix::Zero(4, 4);
  a(0, 2) = 1.0;
  a(1, 3) = 1.0;
  a(2, 2) = -p.drag / p.mass;
  a(3, 3) = -p.drag / p.mass;
  Matrix b = Matrix::Zero(4, 2);
  b(2, 0) = 1.0 / p.mass;
  b(3, 1) = 1.0 / p.mass;
  return {a, b};
}

inline NonlinearPlant linear_drag_plant(double dt, const LinearDragParams& p = {}) {
  const ContinuousLti c = linear_drag_continuous(p);
  return make_linear_plant(c.a, c.b, dt);
}

struct Obstacle {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

// Potential field C(d) = s ((2 dz / (pi (d - dz))) tan(pi (d - dz) / (2 dz)) - 1)
// on 0 < d < dz, zero for d >= dz and +inf for d <= 0. With
// y = pi (d - dz) / (2 dz), C = s (tan(y)/y - 1); near y = 0 a series is used.
struct ObstacleCost {
  double zero_distance = 0.5;
  double scale = 0.01;

  double y_of(double d) const { return std::numbers::pi * (d - zero_distance) / (2.0 * zero_distance); }
  double dy_dd() const { return std::numbers::pi / (2.0 * zero_distance); }

  double value(double d) const {
    if (d >= zero_distance) return 0.0;
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    const double y = y_of(d);
    double f1;  // tan(y)/y - 1
    if (std::abs(y) < 1e-2) {
      const double y2 = y * y;
      f1 = y2 / 3.0 + 2.0 * y2 * y2 / 15.0 + 17.0 * y2 * y2 * y2 / 315.0;
    } else {
      f1 = std::tan(y) / y - 1.0;
    }
    return scale * f1;
  }

  double derivative(double d) const {
    if (d >= zero_distance) return 0.0;
    if (d <= 0.0) return -std::numeric_limits<double>::infinity();
    const double y = y_of(d);
    double fp;
    if (std::abs(y) < 1e-2) {
      const double y2 = y * y;
      fp = 2.0 * y / 3.0 + 8.0 * y * y2 / 15.0 + 102.0 * y * y2 * y2 / 315.0;
    } else {
      const double sec2 = 1.0 / (std::cos(y) * std::cos(y));
      fp = (y * sec2 - std::tan(y)) / (y * y);
    }
    return scale * fp * dy_dd();
  }

  double second_derivative(double d) const {
    if (d >= zero_distance) return 0.0;
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    const double y = y_of(d);
    double fpp;
    if (std::abs(y) < 1e-2) {
      const double y2 = y * y;
      fpp = 2.0 / 3.0 + 24.0 * y2 / 15.0 + 510.0 * y2 * y2 / 315.0;
    } else {
      const double t = std::tan(y);
      const double sec2 = 1.0 + t * t;
      fpp = (2.0 * y * y * sec2 * t - 2.0 * y * sec2 + 2.0 * t) / (y * y * y);
    }
    return scale * fpp * dy_dd() * dy_dd();
  }
};

inline double obstacle_cost(double d, double zero_distance = 0.5) {
  return ObstacleCost{zero_distance, 0.01}.value(d);
}

struct NearestObstacle {
  double distance = std::numeric_limits<double>::infinity();
  double gx = 0.0;  // d distance / d x
  double gy = 0.0;  // d distance / d y
  int index = -1;
};

// Distance to the nearest obstacle surface; ties go to the lowest index.
inline NearestObstacle nearest_obstacle(const std::vector<Obstacle>& obstacles, double x, double y) {
  NearestObstacle out;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const Obstacle& o = obstacles[i];
    const double dx = x - o.cx;
    const double dy = y - o.cy;
    const double rho = std::hypot(dx, dy);
    const double d = rho - o.radius;
    if (d < out.distance) {
      out.distance = d;
      out.index = static_cast<int>(i);
      if (rho > 0.0) {
        out.gx = dx / rho;
        out.gy = dy / rho;
      } else {
        out.gx = 0.0;
        out.gy = 0.0;
      }
    }
  }
  return out;
}

// Per-step objective on chi = (x, y, xd, yd, Fx, Fy):
// J = 1/2 ||s - s_ref||^2_W + 1/2 W_o C(d).
struct LinearDragObjective {
  Matrix state_weight = Eigen::Vector4d(100.0, 1.0, 0.1, 0.1).asDiagonal();
  double obstacle_weight = 20000.0;
  ObstacleCost cost{};
  std::vector<Obstacle> obstacles;

  static constexpr Index kStates = 4;
  static constexpr Index kEta = 6;

  NearestObstacle nearest(const Vector& chi) const {
    return nearest_obstacle(obstacles, chi(0), chi(1));
  }

  double value(const Vector& chi, const Vector& ref) const {
    const Vector e = chi.head(kStates) - ref.head(kStates);
    return 0.5 * e.dot(state_weight * e) + 0.5 * obstacle_weight * cost.value(nearest(chi).distance);
  }

  Vector gradient(const Vector& chi, const Vector& ref) const {
    Vector g = Vector::Zero(kEta);
    g.head(kStates) = state_weight * (chi.head(kStates) - ref.head(kStates));
    const NearestObstacle nb = nearest(chi);
    const double c1 = cost.derivative(nb.distance);
    if (c1 != 0.0) {
      g(0) += 0.5 * obstacle_weight * c1 * nb.gx;
      g(1) += 0.5 * obstacle_weight * c1 * nb.gy;
    }
    return g;
  }

  // Gauss-Newton Hessian: the curvature of the distance itself is dropped so
  // the Hessian stays positive semidefinite.
  Matrix hessian(const Vector& chi, const Vector& /*ref*/) const {
    Matrix h = Matrix::Zero(kEta, kEta);
    h.topLeftCorner(kStates, kStates) = state_weight;
    const NearestObstacle nb = nearest(chi);
    const double c2 = cost.second_derivative(nb.distance);
    if (c2 != 0.0) {
      const double w = 0.5 * obstacle_weight * c2;
      h(0, 0) += w * nb.gx * nb.gx;
      h(0, 1) += w * nb.gx * nb.gy;
      h(1, 0) += w * nb.gx * nb.gy;
      h(1, 1) += w * nb.gy * nb.gy;
    }
    return h;
  }

  // Direction-to-better residual: tracking rows ref - s, then the negated
  // position gradient of C (two rows).
  Vector residual(const Vector& chi, const Vector& ref) const {
    Vector r = Vector::Zero(kStates + 2);
    r.head(kStates) = ref.head(kStates) - chi.head(kStates);
    const NearestObstacle nb = nearest(chi);
    const double c1 = cost.derivative(nb.distance);
    if (c1 != 0.0) {
      r(kStates) = -c1 * nb.gx;
      r(kStates + 1) = -c1 * nb.gy;
    }
    return r;
  }

  // d residual / d chi. The obstacle block is minus the position Hessian of C,
  // C'' g g^T + C' (I - g g^T) / rho with g the unit direction from the center.
  Matrix residual_jacobian(const Vector& chi, const Vector& /*ref*/) const {
    Matrix j = Matrix::Zero(kStates + 2, kEta);
    j.topLeftCorner(kStates, kStates) = -Matrix::Identity(kStates, kStates);
    const NearestObstacle nb = nearest(chi);
    const double c1 = cost.derivative(nb.distance);
    if (c1 == 0.0) return j;
    const double c2 = cost.second_derivative(nb.distance);
    const Obstacle& o = obstacles[static_cast<std::size_t>(nb.index)];
    const double rho = std::hypot(chi(0) - o.cx, chi(1) - o.cy);
    Eigen::Matrix2d gg;
    gg << nb.gx * nb.gx, nb.gx * nb.gy, nb.gx * nb.gy, nb.gy * nb.gy;
    Eigen::Matrix2d hess = c2 * gg;
    if (rho > 0.0) hess += c1 * (Eigen::Matrix2d::Identity() - gg) / rho;
    j.block(kStates, 0, 2, 2) = -hess;
    return j;
  }

  // blkdiag(W^-1, I_2 / W_o); scaled by alpha in the gradient mode.
  Matrix residual_covariance() const {
    Matrix c = Matrix::Zero(kStates + 2, kStates + 2);
    c.topLeftCorner(kStates, kStates) = spd_inverse(state_weight, "state weight");
    c(kStates, kStates) = 1.0 / obstacle_weight;
    c(kStates + 1, kStates + 1) = 1.0 / obstacle_weight;
    return c;
  }

  double min_distance(const Vector& chi) const { return nearest(chi).distance; }
};

// ---------------------------------------------------------------------------
// Cart-pole with a point-mass pole; theta = 0 upright, state (x, v, theta, omega).

struct CartPoleParams {
  double cart_mass = 0.25;
  double pole_mass = 0.2;
  double length = 0.45;
  double linear_damping = 0.05;
  double angular_damping = 0.015;
  double gravity = 9.81;
};

struct CartPoleAccel {
  double xdd = 0.0;
  double thdd = 0.0;
};

inline CartPoleAccel cartpole_accelerations(const CartPoleParams& p, double v, double th,
                                            double w, double f) {
  const double s = std::sin(th);
  const double c = std::cos(th);
  const double mc = p.cart_mass, mp = p.pole_mass, l = p.length;
  const double den = mp * s * s + mc;
  const double n1 = l * f - p.linear_damping * l * v - mp * l * l * w * w * s -
                    (p.angular_damping * w - p.gravity * mp * l * s) * c;
  const double n2 = (mp * l * f - p.linear_damping * mp * l * v) * c -
                    p.angular_damping * (mc + mp) * w +
                    (-mp * mp * l * l * w * w * c + p.gravity * mp * mp * l + p.gravity * mc * mp * l) * s;
  return {n1 / (l * den), n2 / (mp * l * l * den)};
}

inline Vector cartpole_dynamics(const CartPoleParams& p, const Vector& x, const Vector& u) {
  const CartPoleAccel a = cartpole_accelerations(p, x(1), x(2), x(3), u(0));
  Vector d(4);
  d << x(1), a.xdd, x(3), a.thdd;
  return d;
}

inline Matrix cartpole_jacobian_x(const CartPoleParams& p, const Vector& x, const Vector& u) {
  const double v = x(1), th = x(2), w = x(3), f = u(0);
  const double s = std::sin(th), c = std::cos(th);
  const double mc = p.cart_mass, mp = p.pole_mass, l = p.length;
  const double dv = p.linear_damping, dw = p.angular_damping, g = p.gravity;
  const double den = mp * s * s + mc;
  const double dden = 2.0 * mp * s * c;
  const double n1 = l * f - dv * l * v - mp * l * l * w * w * s - (dw * w - g * mp * l * s) * c;
  const double n2 = (mp * l * f - dv * mp * l * v) * c - dw * (mc + mp) * w +
                    (-mp * mp * l * l * w * w * c + g * mp * mp * l + g * mc * mp * l) * s;
  const double n1_v = -dv * l;
  const double n1_th = -mp * l * l * w * w * c + dw * w * s + g * mp * l * (c * c - s * s);
  const double n1_w = -2.0 * mp * l * l * w * s - dw * c;
  const double n2_v = -dv * mp * l * c;
  const double n2_th = -(mp * l * f - dv * mp * l * v) * s - mp * mp * l * l * w * w * (c * c - s * s) +
                       g * mp * l * (mp + mc) * c;
  const double n2_w = -dw * (mc + mp) - 2.0 * mp * mp * l * l * w * c * s;
  const double k1 = l, k2 = mp * l * l;
  Matrix j = Matrix::Zero(4, 4);
  j(0, 1) = 1.0;
  j(2, 3) = 1.0;
  j(1, 1) = n1_v / (k1 * den);
  j(1, 2) = (n1_th * den - n1 * dden) / (k1 * den * den);
  j(1, 3) = n1_w / (k1 * den);
  j(3, 1) = n2_v / (k2 * den);
  j(3, 2) = (n2_th * den - n2 * dden) / (k2 * den * den);
  j(3, 3) = n2_w / (k2 * den);
  return j;
}

inline Matrix cartpole_jacobian_u(const CartPoleParams& p, const Vector& x, const Vector& /*u*/) {
  const double s = std::sin(x(2)), c = std::cos(x(2));
  const double mc = p.cart_mass, mp = p.pole_mass, l = p.length;
  const double den = mp * s * s + mc;
  Matrix j = Matrix::Zero(4, 1);
  j(1, 0) = l / (l * den);
  j(3, 0) = mp * l * c / (mp * l * l * den);
  return j;
}

inline NonlinearPlant cartpole_plant(double dt, const CartPoleParams& p = {}) {
  NonlinearPlant plant;
  plant.n = 4;
  plant.m = 1;
  plant.dt = dt;
  plant.dynamics = [p](const Vector& x, const Vector& u) -> Vector { return cartpole_dynamics(p, x, u); };
  plant.jacobian_x = [p](const Vector& x, const Vector& u) -> Matrix { return cartpole_jacobian_x(p, x, u); };
  plant.jacobian_u = [p](const Vector& x, const Vector& u) -> Matrix { return cartpole_jacobian_u(p, x, u); };
  return plant;
}

// Total mechanical energy (pole tip at (x - l sin th, l cos th)).
inline double cartpole_energy(const CartPoleParams& p, const Vector& x) {
  const double v = x(1), th = x(2), w = x(3);
  const double mc = p.cart_mass, mp = p.pole_mass, l = p.length;
  return 0.5 * (mc + mp) * v * v - mp * l * std::cos(th) * v * w + 0.5 * mp * l * l * w * w +
         mp * p.gravity * l * std::cos(th);
}

inline Matrix cartpole_state_weight() { return Eigen::Vector4d(1000.0, 1.0, 300.0, 25.0).asDiagonal(); }
inline constexpr double kCartPoleRateWeight = 20.0;

// ---------------------------------------------------------------------------
// Discrete companion-form systems with poles taken in order from a fixed set.

inline const std::vector<double>& companion_pole_set() {
  static const std::vector<double> poles{-0.1, -0.2, -0.3, -0.4, -0.5};
  return poles;
}

// Controllable canonical form: ones on the superdiagonal, last row holds the
// negated characteristic-polynomial coefficients, B = e_n.
inline DiscreteLti companion_system(int order) {
  const auto& set = companion_pole_set();
  if (order < 1 || order > static_cast<int>(set.size()))
    throw DomainError("companion_system: order must lie in [1, 5]");
  // Coefficients of prod (z - p_i), highest power first.
  std::vector<double> coeff{1.0};
  for (int i = 0; i < order; ++i) {
    std::vector<double> next(coeff.size() + 1, 0.0);
    for (std::size_t j = 0; j < coeff.size(); ++j) {
      next[j] += coeff[j];
      next[j + 1] -= set[static_cast<std::size_t>(i)] * coeff[j];
    }
    coeff = std::move(next);
  }
  const Index n = order;
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  for (Index j = 0; j < n; ++j) a(n - 1, j) = -coeff[static_cast<std::size_t>(n - j)];
  Matrix b = Matrix::Zero(n, 1);
  b(n - 1, 0) = 1.0;
  return {a, b};
}

inline Matrix controllability_matrix(const Matrix& a, const Matrix& b, int steps) {
  const Index n = a.rows();
  Matrix c(n, b.cols() * steps);
  Matrix blk = b;
  for (int i = 0; i < steps; ++i) {
    c.middleCols(i * b.cols(), b.cols()) = blk;
    blk = a * blk;
  }
  return c;
}

// Smallest k with rank [B, AB, ..., A^{k-1}B] == n; -1 if never.
inline int controllability_index(const Matrix& a, const Matrix& b, double tol = 1e-10) {
  const Index n = a.rows();
  for (int k = 1; k <= static_cast<int>(n); ++k) {
    Eigen::FullPivLU<Matrix> lu(controllability_matrix(a, b, k));
    lu.setThreshold(tol);
    if (lu.rank() == n) return k;
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Piecewise-linear reference through timed waypoints. The reference velocity
// is the segment slope; before the first and after the last waypoint the
// reference holds still.

class PiecewiseLinearPath {
 public:
  PiecewiseLinearPath() = default;
  PiecewiseLinearPath(std::vector<double> times, std::vector<Vector> points)
      : times_(std::move(times)), points_(std::move(points)) {
    if (times_.empty() || times_.size() != points_.size())
      throw DomainError("PiecewiseLinearPath: need matching non-empty times and points");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) throw DomainError("PiecewiseLinearPath: times must increase");
      detail::require_dims(points_[i].size() == points_[0].size(), "PiecewiseLinearPath: point sizes");
    }
  }

  Index dim() const { return points_.empty() ? 0 : points_[0].size(); }

  Vector position(double t) const {
    if (t <= times_.front()) return points_.front();
    if (t >= times_.back()) return points_.back();
    const std::size_t i = segment(t);
    const double a = (t - times_[i]) / (times_[i + 1] - times_[i]);
    return (1.0 - a) * points_[i] + a * points_[i + 1];
  }

  Vector velocity(double t) const {
    if (t < times_.front() || t >= times_.back() || times_.size() < 2) return Vector::Zero(dim());
    const std::size_t i = segment(t);
    return (points_[i + 1] - points_[i]) / (times_[i + 1] - times_[i]);
  }

  // Stacked (position, velocity).
  Vector state(double t) const {
    Vector s(2 * dim());
    s << position(t), velocity(t);
    return s;
  }

  const std::vector<double>& times() const { return times_; }

 private:
  std::size_t segment(double t) const {
    std::size_t i = 0;
    while (i + 2 < times_.size() && t >= times_[i + 1]) ++i;
    return i;
  }

  std::vector<double> times_;
  std::vector<Vector> points_;
};

}  // namespace oc

#endif  // OBSCTL_PLANTS_HPP_
