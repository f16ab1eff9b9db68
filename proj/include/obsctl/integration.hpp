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

#ifndef OBSCTL_INTEGRATION_HPP_
#define OBSCTL_INTEGRATION_HPP_

#include <functional>

#include "obsctl/linalg.hpp"

namespace oc {

// Continuous-time dynamics xdot = g(x, u).
using Dynamics = std::function<Vector(const Vector& x, const Vector& u)>;

// One classical fourth-order Runge-Kutta step with the control held constant.
template <class F>
Vector rk4_step(const F& g, const Vector& x, const Vector& u, double dt) {
  if (!(dt > 0.0)) throw DomainError("rk4_step: dt must be positive");
  const Vector k1 = g(x, u);
  const Vector k2 = g(x + 0.5 * dt * k1, u);
  const Vector k3 = g(x + 0.5 * dt * k2, u);
  const Vector k4 = g(x + dt * k3, u);
  Vector out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  require_finite(out, "rk4_step result");
  return out;
}

// `substeps` RK4 steps covering dt.
template <class F>
Vector rk4_integrate(const F& g, Vector x, const Vector& u, double dt,
                     int substeps) {
  if (substeps < 1) throw DomainError("rk4_integrate: substeps must be >= 1");
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) x = rk4_step(g, x, u, h);
  return x;
}

}  // namespace oc

#endif  // OBSCTL_INTEGRATION_HPP_
