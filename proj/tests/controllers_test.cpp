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

#include "obsctl/controllers.hpp"
#include "obsctl/lqr_oracle.hpp"
#include "obsctl/scenarios.hpp"
#include "test_support.hpp"

namespace oc {
namespace {

using testing::max_abs;
using testing::random_instance;
using testing::random_matrix;
using testing::RandomInstance;

MsdStepTask full_msd(bool predictive = true) {
  MsdStepTask t;
  t.penalize_control = true;
  t.predictive = predictive;
  return t;
}

TEST(NaiveOc, ZeroHorizonOnTarget) {
  const MsdStepTask task = full_msd(false);
  const KalmanBackend kf(task.model());
  const Vector x = Vector::Zero(2);
  const Vector u = Vector::Zero(1);
  const ControllerOutput out = naive_oc(kf, x, u, task.objective_at(0.0), ControllerConfig::fixed(0));
  EXPECT_LT(max_abs(out.u0 - u), 1e-15);
  EXPECT_EQ(out.steps_used, 0);
}

TEST(NaiveOc, ReactiveMsdMatchesLqr) {
  const MsdStepTask task = full_msd(false);
  const KalmanBackend kf(task.model());
  const Matrix k = task.k_lqr();
  std::mt19937 gen(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_matrix(gen, 2, 1);
    const Vector u = random_matrix(gen, 1, 1);
    const double t = trial % 2 ? 2.0 : 0.0;
    const ControllerOutput out = naive_oc(kf, x, u, task.objective_at(t), ControllerConfig::fixed(50));
    const Vector lqr = u + k * (task.target(t) - stack_state(x, u));
    EXPECT_LT(max_abs(out.u0 - lqr), 1e-6) << "trial " << trial;
  }
}

TEST(Controllers, AlgorithmsAgreeOnRandomInstances) {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 40; ++trial) {
    const RandomInstance inst = random_instance(gen, 8, 25);
    const KalmanBackend kf(inst.model);
    const ControllerConfig cfg = ControllerConfig::fixed(inst.horizon);
    const MeasurementSource src = inst.refs;
    const Vector a1 = naive_oc(kf, inst.x, inst.u_last, src, cfg).u0;
    const Vector a2 = forward_only_oc(kf, inst.x, inst.u_last, src, cfg).u0;
    const Vector a3 = efficient_oc(kf, inst.x, inst.u_last, src, cfg).u0;
    const Vector batch = batch_oracle(inst.model, inst.x, inst.u_last, src, inst.horizon);
    const double scale = std::max(1.0, max_abs(a1));
    EXPECT_LT(max_abs(a1 - a2), 1e-9 * scale) << "trial " << trial;
    EXPECT_LT(max_abs(a1 - a3), 1e-9 * scale) << "trial " << trial;
    EXPECT_LT(max_abs(a1 - batch), 1e-8 * scale) << "trial " << trial;
  }
}

TEST(Controllers, SmoothedTraceAgrees) {
  std::mt19937 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    const RandomInstance inst = random_instance(gen, 6, 20);
    const KalmanBackend kf(inst.model);
    const ControllerConfig cfg = ControllerConfig::fixed(inst.horizon);
    const double t1 = naive_oc(kf, inst.x, inst.u_last, inst.refs, cfg).trace_p0s;
    const double t2 = forward_only_oc(kf, inst.x, inst.u_last, inst.refs, cfg).trace_p0s;
    EXPECT_NEAR(t1, t2, 1e-9 * std::max(1.0, t1));
  }
}

TEST(ForwardOnlyOc, TerminationBarelyChangesOutput) {
  const MsdStepTask task;
  const KalmanBackend kf(task.model());
  ControllerConfig on;
  on.horizon = 100;
  on.tau_tol = 1e-8;
  const ControllerConfig off = ControllerConfig::fixed(100);
  for (double t : {0.0, 0.5, 0.9, 1.5}) {
    const Vector x = Vector::Constant(2, 0.1);
    const Vector u = Vector::Constant(1, 0.2);
    const ControllerOutput a = forward_only_oc(kf, x, u, task.objective_at(t), on);
    const ControllerOutput b = forward_only_oc(kf, x, u, task.objective_at(t), off);
    EXPECT_TRUE(a.terminated) << "t=" << t;
    EXPECT_LT(a.steps_used, 100);
    EXPECT_LT(max_abs(a.u0 - b.u0), 1e-5) << "t=" << t;
  }
}

TEST(EfficientOc, OneFactorizationPerStep) {
  std::mt19937 gen(4);
  const RandomInstance inst = random_instance(gen, 6, 30);
  const KalmanBackend kf(inst.model);
  for (int n : {0, 1, inst.horizon / 2, inst.horizon}) {
    const ControllerOutput out = efficient_oc(kf, inst.x, inst.u_last, inst.refs, ControllerConfig::fixed(n));
    EXPECT_EQ(out.factorizations, static_cast<std::size_t>(n + 1));
    EXPECT_EQ(out.rho.size(), static_cast<std::size_t>(n + 1));
  }
}

TEST(EfficientOc, RefinementBoundedByRho) {
  const MsdStepTask task = full_msd();
  const KalmanBackend kf(task.model());
  const Vector x = Vector::Constant(2, -0.3);
  const Vector u = Vector::Constant(1, 0.4);
  const MeasurementSource src = task.objective_at(0.6);
  const ControllerOutput full = efficient_oc(kf, x, u, src, ControllerConfig::fixed(30));
  Vector prev = efficient_oc(kf, x, u, src, ControllerConfig::fixed(0)).u0;
  for (int n = 1; n <= 30; ++n) {
    const Vector cur = efficient_oc(kf, x, u, src, ControllerConfig::fixed(n)).u0;
    const auto i = static_cast<std::size_t>(n);
    EXPECT_LE((cur - prev).norm(), full.rho[i] * full.residual_norms[i] * (1 + 1e-9) + 1e-15) << "n=" << n;
    prev = cur;
  }
}

TEST(EfficientOc, TraceNonIncreasingInHorizon) {
  const MsdStepTask task = full_msd();
  const KalmanBackend kf(task.model());
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= 40; ++n) {
    const double tr =
        efficient_oc(kf, Vector::Zero(2), Vector::Zero(1), task.objective_at(0.0), ControllerConfig::fixed(n))
            .trace_p0s;
    EXPECT_LE(tr, prev + 1e-14);
    EXPECT_GT(tr, 0.0);
    prev = tr;
  }
}

TEST(EfficientOc, UnsupportedWithUkf) {
  const CartPoleTask task;
  const UkfBackend ukf(task.plant(), task.process_noise());
  EXPECT_THROW(efficient_oc(ukf, task.x0, Vector::Zero(1), task.source(), ControllerConfig::fixed(5)),
               UnsupportedError);
}

TEST(EfficientOc, EkfAgreesWithNaive) {
  const CartPoleTask task;
  const EkfBackend ekf(task.plant(), task.process_noise());
  const ControllerConfig cfg = ControllerConfig::fixed(40);
  Vector x = task.x0;
  x(2) -= 0.3;
  const Vector u = Vector::Constant(1, 0.5);
  const Vector a1 = naive_oc(ekf, x, u, task.source(), cfg).u0;
  const Vector a2 = forward_only_oc(ekf, x, u, task.source(), cfg).u0;
  const Vector a3 = efficient_oc(ekf, x, u, task.source(), cfg).u0;
  const double scale = std::max(1.0, max_abs(a1));
  EXPECT_LT(max_abs(a1 - a2), 1e-9 * scale);
  EXPECT_LT(max_abs(a1 - a3), 1e-9 * scale);
}

TEST(AnytimeOc, ZeroHorizonIsReactiveLaw) {
  const MsdStepTask task = full_msd();
  const KalmanBackend kf(task.model());
  const Matrix k = task.k_lqr();
  const Vector x = Vector::Constant(2, 0.2);
  const Vector u = Vector::Constant(1, -0.1);
  const Vector z0 = task.target(1.0);
  const ControllerOutput out =
      anytime_oc(kf, x, u, z0, task.objective_at(1.0), ControllerConfig::fixed(0), k);
  EXPECT_LT(max_abs(out.u0 - (u + k * (z0 - stack_state(x, u)))), 1e-12);
}

TEST(AnytimeOc, RegulationConvergesToLqr) {
  const MsdStepTask task = full_msd(false);
  const KalmanBackend kf(task.model());
  const Matrix k = task.k_lqr();
  const Vector x = Vector::Constant(2, 0.5);
  const Vector u = Vector::Constant(1, 0.3);
  // Constant equilibrium reference after the step.
  const Vector z0 = task.target(2.0);
  const Vector lqr = u + k * (z0 - stack_state(x, u));
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {1, 5, 10, 20, 40, 80}) {
    const ControllerOutput out = anytime_oc(kf, x, u, z0, task.objective_at(2.0), ControllerConfig::fixed(n), k);
    const double err = max_abs(out.u0 - lqr);
    EXPECT_LE(err, prev + 1e-12);
    prev = err;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(AnytimeOc, FullHorizonMatchesEfficient) {
  const MsdStepTask task = full_msd();
  const KalmanBackend kf(task.model());
  const Matrix k = task.k_lqr();
  for (double t : {0.0, 0.5, 0.9}) {
    const Vector x = Vector::Constant(2, 0.1 * t);
    const Vector u = Vector::Constant(1, 0.05);
    const ControllerConfig cfg = ControllerConfig::fixed(80);
    const Vector a = anytime_oc(kf, x, u, task.target(t), task.objective_at(t), cfg, k).u0;
    const Vector e = efficient_oc(kf, x, u, task.objective_at(t), cfg).u0;
    EXPECT_LT(max_abs(a - e), 1e-6) << "t=" << t;
  }
}

TEST(AnytimeOc, RejectsNonlinearBackend) {
  const CartPoleTask task;
  const EkfBackend ekf(task.plant(), task.process_noise());
  EXPECT_THROW(anytime_oc(ekf, task.x0, Vector::Zero(1), Vector::Zero(5), task.source(),
                          ControllerConfig::fixed(3), Matrix::Zero(1, 5)),
               UnsupportedError);
}

TEST(ComputeRhoTau, ConvergedLimit) {
  const RhoTau rt = compute_rho_tau(Matrix::Zero(1, 3), Matrix::Identity(3, 3), Matrix::Ones(3, 2),
                                    Matrix::Ones(2, 3), 1.0);
  EXPECT_EQ(rt.rho, 0.0);
  EXPECT_EQ(rt.tau, 0.0);
  EXPECT_THROW(compute_rho_tau(Matrix::Zero(1, 3), Matrix::Identity(3, 3), Matrix::Ones(3, 2),
                               Matrix::Ones(2, 3), 0.0),
               DomainError);
}

TEST(ComputeRhoTau, SpectralNormOfRefinementGain) {
  std::mt19937 gen(5);
  const Matrix g = random_matrix(gen, 2, 4);
  const Matrix phi = random_matrix(gen, 4, 4);
  const Matrix s = random_matrix(gen, 4, 3);
  const Matrix h = random_matrix(gen, 3, 4);
  const RhoTau rt = compute_rho_tau(g, phi, s, h, 2.5);
  const Eigen::JacobiSVD<Matrix> svd(g * phi.transpose() * s);
  EXPECT_NEAR(rt.rho, svd.singularValues()(0), 1e-12 * svd.singularValues()(0));
  EXPECT_NEAR(rt.tau, (g * phi.transpose() * s * h * phi * g.transpose()).trace() / 2.5, 1e-12);
}

TEST(TerminationMonitor, BothThresholdsAndPeakGuard) {
  ControllerConfig cfg;
  cfg.rho_tol = 1.0;
  cfg.tau_tol = 1.0;
  TerminationMonitor mon(cfg);
  EXPECT_FALSE(mon.stop(0.5, 0.5));  // below both, but rho has not peaked yet
  EXPECT_FALSE(mon.stop(0.8, 0.5));
  EXPECT_TRUE(mon.stop(0.6, 0.5));
  TerminationMonitor mon2(cfg);
  mon2.stop(0.9, 2.0);
  EXPECT_FALSE(mon2.stop(0.5, 2.0));  // tau still above its threshold
  cfg.peak_guard = false;
  TerminationMonitor mon3(cfg);
  EXPECT_TRUE(mon3.stop(0.5, 0.5));
}

TEST(CompanionStudy, RhoPeaksAtControllabilityIndex) {
  for (int n = 1; n <= 5; ++n) {
    CompanionStudy s;
    s.order = n;
    const StudyTrace tr = s.run(60, 20);
    EXPECT_EQ(tr.rho_argmax, n) << "order " << n;
    const DiscreteLti d = companion_system(n);
    EXPECT_EQ(controllability_index(d.a, d.b), n);
  }
}

TEST(CompanionStudy, TauSlopeFollowsFilterRadius) {
  for (int n = 1; n <= 5; ++n) {
    CompanionStudy s;
    s.order = n;
    const StudyTrace tr = s.run(60, 20);
    EXPECT_NEAR(tr.tau_slope / tr.predicted_slope, 1.0, 0.1) << "order " << n;
  }
}

TEST(EstimateHorizon, ClosedForms) {
  EXPECT_EQ(estimate_horizon(0.5, 1e-6), 10);
  EXPECT_EQ(estimate_horizon(0.9, 1e-2), 22);
  EXPECT_THROW(estimate_horizon(1.0, 1e-6), DomainError);
  EXPECT_THROW(estimate_horizon(0.5, 0.0), DomainError);
}

TEST(EstimateHorizon, MsdWithinFactorTwoOfTauCrossing) {
  const MsdStepTask task = full_msd();
  const AugmentedModel model = task.model();
  const DualityObjective obj = task.objective_at(5.0);
  const StudyTrace tr = termination_trace(model, obj, Vector::Zero(2), 150, 10);
  const double eps = 1e-6;
  const int predicted = estimate_horizon(tr.lambda_max, eps);
  // First step at which tau falls below eps.
  int crossing = -1;
  for (std::size_t k = 1; k < tr.tau.size(); ++k) {
    if (tr.tau[k] < eps) {
      crossing = static_cast<int>(k);
      break;
    }
  }
  ASSERT_GT(crossing, 0);
  EXPECT_LE(predicted, 2 * crossing);
  EXPECT_GE(2 * predicted, crossing);
}

TEST(KeffLambda, ConvergesMonotonicallyToLqr) {
  const MsdStepTask task = full_msd();
  const AugmentedModel model = task.model();
  const Matrix k = task.k_lqr();
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= 60; ++n) {
    const SeparableGains g = compute_keff_lambda(model, task.objective_at(0.0), n);
    const double err = (g.k_eff - k).norm();
    EXPECT_LE(err, prev * (1 + 1e-12) + 1e-13) << "n=" << n;
    prev = err;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(KeffLambda, SuperpositionMatchesEfficient) {
  const MsdStepTask task = full_msd();
  const AugmentedModel model = task.model();
  const KalmanBackend kf(model);
  std::mt19937 gen(6);
  const int n = 25;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> targets;
    for (int k = 0; k <= n; ++k) targets.push_back(random_matrix(gen, 3, 1));
    DualityObjective refs = task.objective_at(0.0);
    refs.target = [targets](Index k) { return targets[static_cast<std::size_t>(k)]; };
    const SeparableGains g = compute_keff_lambda(model, refs, n);
    const Vector x = random_matrix(gen, 2, 1);
    const Vector u = random_matrix(gen, 1, 1);
    const Vector e = efficient_oc(kf, x, u, refs, ControllerConfig::fixed(n)).u0;
    EXPECT_LT(max_abs(apply_separable_gains(g, refs, x, u) - e), 1e-8) << "trial " << trial;
  }
}

TEST(KeffLambda, ZeroReferenceIsRegulation) {
  const MsdStepTask task = full_msd(false);
  const AugmentedModel model = task.model();
  const DualityObjective refs = task.objective_at(0.0);  // zero target before the step
  const SeparableGains g = compute_keff_lambda(model, refs, 80);
  const Vector x = Vector::Constant(2, 0.4);
  const Vector u = Vector::Constant(1, -0.2);
  const Vector lqr = u + task.k_lqr() * (Vector::Zero(3) - stack_state(x, u));
  EXPECT_LT(max_abs(apply_separable_gains(g, refs, x, u) - lqr), 1e-8);
}

TEST(KeffLambda, RequiresFullRows) {
  const MsdStepTask task;  // state-only rows
  EXPECT_THROW(compute_keff_lambda(task.model(), task.objective_at(0.0), 5), DomainError);
}

TEST(BatchOracle, ZeroHorizonSingleUpdate) {
  std::mt19937 gen(7);
  const RandomInstance inst = random_instance(gen, 5, 0);
  const KalmanBackend kf(inst.model);
  const FilterBelief prior = initial_belief(stack_state(inst.x, inst.u_last), inst.model.process_noise);
  const UpdateResult up = kf_update(prior, inst.refs(0, prior.mean));
  const Vector b = batch_oracle(inst.model, inst.x, inst.u_last, inst.refs, 0);
  EXPECT_LT(max_abs(b - up.posterior.mean.tail(inst.model.m)), 1e-10);
}

TEST(BatchOracle, ReactiveMsdMatchesFiniteHorizonRiccati) {
  const MsdStepTask task = full_msd(false);
  const AugmentedModel model = task.model();
  const Matrix h = Matrix::Identity(3, 3);
  const AugmentedLqrProblem p = augmented_lqr_problem(model, h, task.measurement_cov());
  const Vector x = Vector::Constant(2, 0.3);
  const Vector u = Vector::Constant(1, 0.1);
  for (int n : {0, 3, 12}) {
    // Decisions are the N + 1 control increments; the problem is posed on
    // y_0 = Phi chi_{-1} = chi_0 with the target shifted to the origin.
    const Matrix k = finite_horizon_gain(p.a, p.b, p.q, p.r, p.m, n + 1);
    const Vector e = stack_state(x, u) - task.target(2.0);
    const Vector expected = u - k * e;
    const Vector b = batch_oracle(model, x, u, task.objective_at(2.0), n);
    EXPECT_LT(max_abs(b - expected), 1e-9) << "n=" << n;
  }
}

TEST(ObservedController, CarriesLastControl) {
  const MsdStepTask task;
  ObservedController<KalmanBackend> ctl(KalmanBackend(task.model()), Algorithm::efficient,
                                        ControllerConfig::fixed(10),
                                        [task](double t) -> MeasurementSource { return task.objective_at(t); });
  EXPECT_EQ(ctl.last_control(), Vector::Zero(1));
  const ControllerOutput a = ctl.update(1.0, Vector::Zero(2));
  EXPECT_EQ(ctl.last_control(), a.u0);
  const KalmanBackend kf(task.model());
  const ControllerOutput b = ctl.update(1.1, Vector::Constant(2, 0.01));
  const Vector expected =
      efficient_oc(kf, Vector::Constant(2, 0.01), a.u0, task.objective_at(1.1), ControllerConfig::fixed(10)).u0;
  EXPECT_LT(max_abs(b.u0 - expected), 1e-15);
}

TEST(ControllerConfig, Validation) {
  ControllerConfig c;
  c.horizon = -1;
  EXPECT_THROW(c.validate(), DomainError);
  c.horizon = 3;
  c.tau_tol = -1.0;
  EXPECT_THROW(c.validate(), DomainError);
}

}  // namespace
}  // namespace oc
