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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "obsctl/lqr_oracle.hpp"
#include "obsctl/plants.hpp"
#include "obsctl/scenarios.hpp"
#include "test_support.hpp"

namespace oc {
namespace {

using testing::max_abs;
using testing::random_matrix;
using testing::random_spd;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(SolveDare, ScalarClosedForm) {
  const double a = 0.5, b = 1.0, q = 1.0, r = 1.0;
  const LqrSolution s = solve_dare(scalar(a), scalar(b), scalar(q), scalar(r));
  // P^2 + P (r - q - a^2 r) - q r = 0 with b = 1.
  const double c = r - q - a * a * r;
  const double p = 0.5 * (-c + std::sqrt(c * c + 4.0 * q * r));
  EXPECT_NEAR(s.riccati(0, 0), p, 1e-12);
  EXPECT_NEAR(s.gain(0, 0), b * p * a / (r + b * p * b), 1e-12);
  EXPECT_LT(s.residual, 1e-12);
}

TEST(SolveDare, NoStatePenaltyGivesZeroGain) {
  Matrix a(2, 2);
  a << 0.5, 0.1, 0.0, -0.3;
  const LqrSolution s = solve_dare(a, Matrix::Identity(2, 1), Matrix::Zero(2, 2), scalar(1.0));
  EXPECT_LT(max_abs(s.gain), 1e-15);
  EXPECT_LT(max_abs(s.riccati), 1e-15);
}

TEST(SolveDare, UnstabilizableThrows) {
  EXPECT_THROW(solve_dare(scalar(2.0), scalar(0.0), scalar(1.0), scalar(1.0)), ConvergenceError);
}

TEST(SolveDare, CrossTermCompletion) {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(gen, 3, 3) * 0.5;
    const Matrix b = random_matrix(gen, 3, 2);
    const Matrix w = random_spd(gen, 5);
    const Matrix q = w.topLeftCorner(3, 3), r = w.bottomRightCorner(2, 2), m = w.topRightCorner(3, 2);
    const LqrSolution s = solve_dare(a, b, q, r, m);
    const Matrix rinv_mt = r.inverse() * m.transpose();
    const LqrSolution t = solve_dare(a - b * rinv_mt, b, q - m * rinv_mt, r);
    EXPECT_LT(max_abs(s.riccati - t.riccati), 1e-9 * std::max(1.0, max_abs(s.riccati)));
    EXPECT_LT(max_abs(s.gain - (t.gain + rinv_mt)), 1e-9 * std::max(1.0, max_abs(s.gain)));
  }
}

TEST(SolveDare, IndependentOfSeedAndStable) {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_matrix(gen, 4, 4);
    a *= 1.3 / spectral_radius(a);
    const Matrix b = random_matrix(gen, 4, 2);
    const Matrix q = random_spd(gen, 4), r = random_spd(gen, 2);
    const Matrix m = Matrix::Zero(4, 2);
    const LqrSolution s1 = solve_dare(a, b, q, r, m);
    DareOptions opts;
    opts.initial = 50.0 * Matrix::Identity(4, 4);
    const LqrSolution s2 = solve_dare(a, b, q, r, m, opts);
    EXPECT_LT(max_abs(s1.riccati - s2.riccati), 1e-10 * std::max(1.0, max_abs(s1.riccati)));
    EXPECT_LT(spectral_radius(a - b * s1.gain), 1.0);
    EXPECT_LE(s1.residual, 1e-10 * (1.0 + max_abs(s1.riccati)));
  }
}

TEST(FiniteHorizonGain, ConvergesToDare) {
  Matrix a(2, 2);
  a << 1.0, 0.1, -0.2, 0.9;
  const Matrix b = (Matrix(2, 1) << 0.0, 0.1).finished();
  const LqrSolution s = solve_dare(a, b, Matrix::Identity(2, 2), scalar(0.1));
  EXPECT_LT(max_abs(finite_horizon_gain(a, b, Matrix::Identity(2, 2), scalar(0.1), Matrix::Zero(2, 1), 2000) -
                    s.gain),
            1e-10);
  // One stage with zero terminal cost: only the immediate penalty matters.
  EXPECT_LT(max_abs(finite_horizon_gain(a, b, Matrix::Identity(2, 2), scalar(0.1), Matrix::Zero(2, 1), 1)), 1e-15);
  EXPECT_THROW(finite_horizon_gain(a, b, Matrix::Identity(2, 2), scalar(0.1), Matrix::Zero(2, 1), 0), DomainError);
}

TEST(AugmentedLqr, MsdGainStabilizes) {
  MsdStepTask task;
  task.penalize_control = true;
  const AugmentedModel model = task.model();
  const LqrSolution s = augmented_lqr(model, Matrix::Identity(3, 3), task.measurement_cov());
  EXPECT_EQ(s.gain.rows(), 1);
  EXPECT_EQ(s.gain.cols(), 3);
  const AugmentedLqrProblem p = augmented_lqr_problem(model, Matrix::Identity(3, 3), task.measurement_cov());
  EXPECT_LT(spectral_radius(p.a - p.b * s.gain), 1.0);
  // W = blocked penalty when every row is measured.
  EXPECT_LT(max_abs(p.q - task.weights.blocked()), 1e-12);
}

TEST(SteadyStateControl, ZeroReference) {
  const DiscreteLti d = MsdStepTask{}.discrete();
  EXPECT_EQ(steady_state_control(d.a, d.b, Vector::Zero(2)), Vector::Zero(1));
}

TEST(SteadyStateControl, MsdSpringBalance) {
  const DiscreteLti d = MsdStepTask{}.discrete();
  const Vector xr = (Vector(2) << 1.0, 0.0).finished();
  const Vector u = steady_state_control(d.a, d.b, xr);
  EXPECT_LE(((Matrix::Identity(2, 2) - d.a) * xr - d.b * u).norm(), 1e-10);
  EXPECT_NEAR(u(0), 2.0, 1e-10);  // k x_ref
}

TEST(SteadyStateControl, IntegratorNeedsNoControl) {
  std::mt19937 gen(3);
  const Vector u = steady_state_control(Matrix::Identity(3, 3), random_matrix(gen, 3, 2), random_matrix(gen, 3, 1));
  EXPECT_LT(max_abs(u), 1e-14);
}

TEST(SteadyStateControl, RankDeficientThrows) {
  EXPECT_THROW(steady_state_control(Matrix::Identity(2, 2), Matrix::Zero(2, 1), Vector::Ones(2)),
               SingularObjectiveError);
}

}  // namespace
}  // namespace oc
