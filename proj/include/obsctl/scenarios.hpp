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

#ifndef OBSCTL_SCENARIOS_HPP_
#define OBSCTL_SCENARIOS_HPP_

// Ready-made closed-loop tasks built from the plants: an MSD step response,
// the linear-drag obstacle course, cart-pole swing-up and the companion-form
// termination study.

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "obsctl/augmented_model.hpp"
#include "obsctl/controllers.hpp"
#include "obsctl/filter_backend.hpp"
#include "obsctl/harness.hpp"
#include "obsctl/lqr_oracle.hpp"
#include "obsctl/measurement_modes.hpp"
#include "obsctl/plants.hpp"

namespace oc {

template <FilterBackend B>
Policy make_policy(std::shared_ptr<ObservedController<B>> ctl) {
  return [ctl](double t, const Vector& x) { return ctl->update(t, x); };
}

// ---------------------------------------------------------------------------
// MSD step task. The target is chi_ref = [x_ref; u_ss(x_ref)]. By default only
// the plant state is measured (R-grave = Q^-1); penalize_control measures the
// full augmented state with R-grave = blkdiag(Q, R)^-1. In predictive mode the
// horizon sees the future reference; in reactive mode it holds the current one.

struct MsdStepTask {
  MsdParams params{};
  LqrWeights weights = msd_weights();
  double dt = 0.1;
  double step_time = 1.0;
  double step_size = 1.0;
  double t_end = 7.5;
  int substeps = 10;
  bool predictive = true;
  // false: measure the plant state only (no control penalty in the filter).
  bool penalize_control = false;
  Vector x0 = Vector::Zero(2);

  DiscreteLti discrete() const {
    const ContinuousLti c = msd_continuous(params);
    return discretize_lti(c.a, c.b, dt);
  }
  AugmentedModel model() const {
    const DiscreteLti d = discrete();
    return make_augmented_model(d.a, d.b, weights.rate, dt);
  }
  Matrix measurement_cov() const {
    if (!penalize_control) return spd_inverse(weights.state, "MSD state weight");
    return map_lqr_weights(weights).measurement;
  }
  std::vector<Index> measured_rows() const { return penalize_control ? all_rows(3) : leading_rows(2); }

  Vector x_ref(double t) const {
    Vector r = Vector::Zero(2);
    if (t >= step_time - 1e-12) r(0) = step_size;
    return r;
  }
  Vector target(double t) const {
    const DiscreteLti d = discrete();
    const Vector xr = x_ref(t);
    return stack_state(xr, steady_state_control(d.a, d.b, xr));
  }

  DualityObjective objective_at(double t) const {
    const Vector t0 = target(t);
    const Vector t1 = target(step_time);
    const double ts = step_time;
    const double h = dt;
    const bool pred = predictive;
    std::function<Vector(Index)> f = [=](Index k) -> Vector {
      const double tk = pred ? t + static_cast<double>(k) * h : t;
      return tk >= ts - 1e-12 ? t1 : Vector(Vector::Zero(t0.size()));
    };
    return {std::move(f), measured_rows(), measurement_cov()};
  }

  Matrix k_lqr() const {
    return augmented_lqr(model(), selection_matrix(measured_rows(), 3), measurement_cov()).gain;
  }

  Policy policy(Algorithm alg, const ControllerConfig& cfg) const {
    auto ctl = std::make_shared<ObservedController<KalmanBackend>>(
        KalmanBackend(model()), alg, cfg,
        [task = *this](double t) -> MeasurementSource { return task.objective_at(t); });
    if (alg == Algorithm::anytime)
      ctl->set_reactive(k_lqr(), [task = *this](double t) { return task.target(t); });
    return make_policy(ctl);
  }

  // Reactive LQR with steady-state feed-forward: u = u_last + K_lqr (chi_ref - chi).
  Policy lqr_baseline() const {
    const Matrix k = k_lqr();
    auto u_last = std::make_shared<Vector>(Vector::Zero(1));
    return [k, u_last, task = *this](double t, const Vector& x) {
      ControllerOutput out;
      out.u0 = *u_last + k * (task.target(t) - stack_state(x, *u_last));
      *u_last = out.u0;
      return out;
    };
  }

  CostWeights cost_weights() const {
    return {weights.blocked(), weights.rate, [task = *this](double t) { return task.target(t); }, {}};
  }

  SimResult simulate(const Policy& p, int sim_substeps = -1) const {
    const ContinuousLti c = msd_continuous(params);
    SimOptions o;
    o.t_end = t_end;
    o.dt = dt;
    o.substeps = sim_substeps > 0 ? sim_substeps : substeps;
    o.u_initial = Vector::Zero(1);
    return run_closed_loop([c](const Vector& x, const Vector& u) -> Vector { return c.a * x + c.b * u; },
                           x0, p, o);
  }

  double cost(const SimResult& r) const { return integrated_cost(r, cost_weights(), dt); }
};

// ---------------------------------------------------------------------------
// Linear-drag obstacle course.

enum class ObjectiveMode { duality, sqp, gradient };

inline const char* mode_name(ObjectiveMode m) {
  switch (m) {
    case ObjectiveMode::duality: return "duality";
    case ObjectiveMode::sqp: return "sqp";
    case ObjectiveMode::gradient: return "gradient";
  }
  return "?";
}

struct ObstacleTask {
  LinearDragParams params{};
  LinearDragObjective objective{};
  PiecewiseLinearPath path;
  double dt = 0.1;
  double t_end = 12.0;
  int substeps = 10;
  Matrix rate = 0.1 * Matrix::Identity(2, 2);
  Vector x0 = Vector::Zero(4);

  static ObstacleTask standard() {
    ObstacleTask t;
    Vector p0(2), p1(2), p2(2), p3(2);
    p0 << 0.0, 0.0;
    p1 << 2.0, 0.0;
    p2 << 2.0, 2.0;
    p3 << 4.0, 2.0;
    t.path = PiecewiseLinearPath({0.0, 3.0, 6.0, 9.0}, {p0, p1, p2, p3});
    t.objective.obstacles = {{1.0, 0.05, 0.25}, {2.05, 1.1, 0.3}, {3.0, 1.95, 0.25}};
    return t;
  }

  AugmentedModel model() const {
    const ContinuousLti c = linear_drag_continuous(params);
    const DiscreteLti d = discretize_lti(c.a, c.b, dt);
    return make_augmented_model(d.a, d.b, rate, dt);
  }

  Vector reference(double t) const { return path.state(t); }

  MeasurementSource source_at(double t, ObjectiveMode mode, double alpha) const {
    const double h = dt;
    const LinearDragObjective obj = objective;
    const PiecewiseLinearPath ref = path;
    if (mode == ObjectiveMode::sqp) {
      SqpObjective s;
      s.gradient = [=](Index k, const Vector& chi) { return obj.gradient(chi, ref.state(t + k * h)); };
      s.hessian = [=](Index k, const Vector& chi) { return obj.hessian(chi, ref.state(t + k * h)); };
      return s;
    }
    if (mode == ObjectiveMode::gradient) {
      GradientObjective g;
      g.residual = [=](Index k, const Vector& chi) { return obj.residual(chi, ref.state(t + k * h)); };
      g.jacobian = [=](Index k, const Vector& chi) { return obj.residual_jacobian(chi, ref.state(t + k * h)); };
      g.alpha = alpha;
      g.block_covariance = obj.residual_covariance();
      return g;
    }
    // Tracking only, no obstacle term.
    DualityObjective d;
    const Vector zero_u = Vector::Zero(2);
    d.target = [=](Index k) { return stack_state(ref.state(t + k * h), zero_u); };
    d.rows = leading_rows(4);
    d.covariance = alpha * spd_inverse(obj.state_weight, "state weight");
    return d;
  }

  Policy policy(Algorithm alg, const ControllerConfig& cfg, ObjectiveMode mode, double alpha) const {
    auto ctl = std::make_shared<ObservedController<KalmanBackend>>(
        KalmanBackend(model()), alg, cfg,
        [task = *this, mode, alpha](double t) { return task.source_at(t, mode, alpha); });
    return make_policy(ctl);
  }

  SimResult simulate(const Policy& p) const {
    const ContinuousLti c = linear_drag_continuous(params);
    SimOptions o;
    o.t_end = t_end;
    o.dt = dt;
    o.substeps = substeps;
    o.u_initial = Vector::Zero(2);
    return run_closed_loop([c](const Vector& x, const Vector& u) -> Vector { return c.a * x + c.b * u; },
                           x0, p, o);
  }

  // Time integral of the per-step objective along the simulated trajectory.
  double trajectory_cost(const SimResult& r) const {
    if (r.unstable) return std::numeric_limits<double>::infinity();
    double cost = 0.0;
    const auto stage = [&](double t, const Vector& x, const Vector& u) {
      return objective.value(stack_state(x, u), reference(t));
    };
    for (std::size_t i = 0; i + 1 < r.state.size(); ++i) {
      const double h = r.time[i + 1] - r.time[i];
      cost += 0.5 * h * (stage(r.time[i], r.state[i], r.control[i]) +
                         stage(r.time[i + 1], r.state[i + 1], r.control[i]));
    }
    return cost;
  }

  double min_distance(const SimResult& r) const {
    double d = std::numeric_limits<double>::infinity();
    for (const Vector& x : r.state) d = std::min(d, nearest_obstacle(objective.obstacles, x(0), x(1)).distance);
    return d;
  }
};

// ---------------------------------------------------------------------------
// Cart-pole swing-up from the hanging rest state in the gradient mode.

enum class BackendKind { kf, ekf, ukf };

inline const char* backend_name(BackendKind b) {
  switch (b) {
    case BackendKind::kf: return "kf";
    case BackendKind::ekf: return "ekf";
    case BackendKind::ukf: return "ukf";
  }
  return "?";
}

struct CartPoleTask {
  CartPoleParams params{};
  double dt = 0.05;
  double t_end = 10.0;
  int substeps = 10;
  int controller_substeps = 4;
  double alpha = 1.0;
  Matrix state_weight = cartpole_state_weight();
  double rate_weight = kCartPoleRateWeight;
  Vector x0 = (Vector(4) << 0.0, 0.0, std::numbers::pi, 0.0).finished();
  UkfParams ukf{};

  NonlinearPlant plant() const {
    NonlinearPlant p = cartpole_plant(dt, params);
    p.substeps = controller_substeps;
    return p;
  }
  Matrix process_noise() const { return process_noise_from_rate(4, Matrix::Constant(1, 1, rate_weight)); }

  // Direction to better for J = sum ||chi||^2_W: r = -grad_scale W s, with
  // R-grave = alpha I.
  double grad_scale = 1.0;
  MeasurementSource source() const {
    GradientObjective g;
    const Matrix w = grad_scale * state_weight;
    g.residual = [w](Index, const Vector& chi) -> Vector { return -(w * chi.head(4)); };
    g.jacobian = [w](Index, const Vector& chi) -> Matrix {
      Matrix j = Matrix::Zero(4, chi.size());
      j.leftCols(4) = -w;
      return j;
    };
    g.alpha = alpha;
    return g;
  }

  Policy policy(BackendKind kind, Algorithm alg, const ControllerConfig& cfg) const {
    const MeasurementSource src = source();
    const ReferenceProvider refs = [src](double) { return src; };
    if (kind == BackendKind::ukf) {
      return make_policy(std::make_shared<ObservedController<UkfBackend>>(
          UkfBackend(plant(), process_noise(), ukf), alg, cfg, refs));
    }
    if (kind == BackendKind::ekf) {
      return make_policy(std::make_shared<ObservedController<EkfBackend>>(
          EkfBackend(plant(), process_noise()), alg, cfg, refs));
    }
    throw UnsupportedError("cart-pole needs a nonlinear backend (ekf or ukf)");
  }

  SimResult simulate(const Policy& p) const {
    SimOptions o;
    o.t_end = t_end;
    o.dt = dt;
    o.substeps = substeps;
    o.u_initial = Vector::Zero(1);
    const CartPoleParams cp = params;
    return run_closed_loop([cp](const Vector& x, const Vector& u) { return cartpole_dynamics(cp, x, u); },
                           x0, p, o);
  }

  // First time after which |theta| < theta_tol and |x| < x_tol for the rest of
  // the run; negative if never.
  static double settle_time(const SimResult& r, double theta_tol, double x_tol) {
    double t = -1.0;
    for (std::size_t i = r.state.size(); i-- > 0;) {
      const Vector& s = r.state[i];
      if (std::abs(s(2)) < theta_tol && std::abs(s(0)) < x_tol) {
        t = r.time[i];
      } else {
        break;
      }
    }
    return t;
  }
};

// ---------------------------------------------------------------------------
// Companion-form termination study.

struct CompanionStudy {
  int order = 1;
  double state_weight = 1.0;
  double rate_weight = 100.0;
  double dt = 1.0;

  AugmentedModel model() const {
    const DiscreteLti d = companion_system(order);
    return make_augmented_model(d.a, d.b, Matrix::Constant(1, 1, rate_weight), dt);
  }

  // State-only regulation to zero.
  DualityObjective objective() const {
    const Index n = order;
    DualityObjective o;
    o.target = [n](Index) { return Vector(Vector::Zero(n + 1)); };
    o.rows = leading_rows(n);
    o.covariance = Matrix::Identity(n, n) / state_weight;
    return o;
  }

  StudyTrace run(int horizon, int fit_from) const {
    Vector x0 = Vector::Ones(order);
    return termination_trace(model(), objective(), x0, horizon, fit_from);
  }
};

// ---------------------------------------------------------------------------
// Timing cases: one controller update at a representative state with a fixed
// horizon (termination disabled).

enum class PlantKind { msd, linear_drag, cartpole };

inline const char* plant_name(PlantKind p) {
  switch (p) {
    case PlantKind::msd: return "msd";
    case PlantKind::linear_drag: return "linear_drag";
    case PlantKind::cartpole: return "cartpole";
  }
  return "?";
}

struct BenchmarkCase {
  PlantKind plant = PlantKind::msd;
  Algorithm algorithm = Algorithm::efficient;
  BackendKind backend = BackendKind::kf;
  ObjectiveMode mode = ObjectiveMode::duality;
  double alpha = 1.0;
};

inline std::string case_label(const BenchmarkCase& c) {
  return std::string(plant_name(c.plant)) + "/" + algorithm_name(c.algorithm) + "/" +
         backend_name(c.backend) + "/" + mode_name(c.mode);
}

namespace detail {

template <FilterBackend B>
std::function<ControllerOutput()> bind_update(B backend, Algorithm alg, Vector x, Vector u,
                                              MeasurementSource src, int horizon,
                                              std::optional<Matrix> k_lqr = {},
                                              std::optional<Vector> z0 = {}) {
  const ControllerConfig cfg = ControllerConfig::fixed(horizon);
  return [=]() {
    return run_algorithm(alg, backend, x, u, src, cfg, k_lqr ? &*k_lqr : nullptr, z0 ? &*z0 : nullptr);
  };
}

}  // namespace detail

inline std::function<ControllerOutput()> benchmark_update(const BenchmarkCase& c, int horizon) {
  switch (c.plant) {
    case PlantKind::msd: {
      if (c.backend != BackendKind::kf) throw UnsupportedError("msd benchmark uses the kf backend");
      const MsdStepTask task;
      const double t = task.step_time - 0.5;
      const Vector x = Vector::Zero(2);
      const Vector u = Vector::Zero(1);
      std::optional<Matrix> k;
      std::optional<Vector> z0;
      if (c.algorithm == Algorithm::anytime) {
        k = task.k_lqr();
        z0 = task.target(t);
      }
      return detail::bind_update(KalmanBackend(task.model()), c.algorithm, x, u,
                                 MeasurementSource(task.objective_at(t)), horizon, k, z0);
    }
    case PlantKind::linear_drag: {
      if (c.backend != BackendKind::kf) throw UnsupportedError("linear-drag benchmark uses the kf backend");
      if (c.algorithm == Algorithm::anytime)
        throw UnsupportedError("the any-time algorithm needs duality measurements");
      const ObstacleTask task = ObstacleTask::standard();
      const double t = 1.0;
      const Vector x = task.reference(t);
      return detail::bind_update(KalmanBackend(task.model()), c.algorithm, x, Vector::Zero(2),
                                 task.source_at(t, c.mode, c.alpha), horizon);
    }
    case PlantKind::cartpole: {
      const CartPoleTask task;
      Vector x = task.x0;
      x(2) -= 0.1;
      const Vector u = Vector::Zero(1);
      if (c.backend == BackendKind::ekf)
        return detail::bind_update(EkfBackend(task.plant(), task.process_noise()), c.algorithm, x, u,
                                   task.source(), horizon);
      if (c.backend == BackendKind::ukf)
        return detail::bind_update(UkfBackend(task.plant(), task.process_noise(), task.ukf), c.algorithm,
                                   x, u, task.source(), horizon);
      throw UnsupportedError("cart-pole needs a nonlinear backend (ekf or ukf)");
    }
  }
  throw DomainError("unknown plant");
}

struct BenchmarkSeries {
  BenchmarkCase spec;
  std::vector<int> horizons;
  std::vector<double> median_ns;
  ScalingFit fit;
};

// Repetitions are interleaved round-robin over every (case, N) point so slow
// drifts in machine speed spread evenly instead of biasing one point.
inline std::vector<BenchmarkSeries> run_benchmark(const std::vector<BenchmarkCase>& cases,
                                                  const std::vector<int>& horizons, int repetitions,
                                                  int warmup) {
  if (repetitions < 1) throw DomainError("run_benchmark: repetitions must be >= 1");
  std::vector<std::vector<std::function<ControllerOutput()>>> calls;
  std::vector<std::vector<std::vector<std::int64_t>>> samples;
  for (const BenchmarkCase& c : cases) {
    calls.emplace_back();
    samples.emplace_back(horizons.size());
    for (int n : horizons) calls.back().push_back(benchmark_update(c, n));
  }
  volatile double sink = 0.0;
  for (auto& row : calls)
    for (auto& f : row)
      for (int w = 0; w < warmup; ++w) sink = sink + f().u0(0);
  for (int r = 0; r < repetitions; ++r) {
    for (std::size_t i = 0; i < calls.size(); ++i) {
      for (std::size_t j = 0; j < horizons.size(); ++j) {
        samples[i][j].push_back(time_call_ns([&] { sink = sink + calls[i][j]().u0(0); }));
      }
    }
  }
  std::vector<BenchmarkSeries> out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    BenchmarkSeries s;
    s.spec = cases[i];
    s.horizons = horizons;
    for (auto& v : samples[i]) {
      std::sort(v.begin(), v.end());
      const std::size_t mid = v.size() / 2;
      s.median_ns.push_back(v.size() % 2 ? static_cast<double>(v[mid])
                                         : 0.5 * static_cast<double>(v[mid - 1] + v[mid]));
    }
    s.fit = fit_scaling(horizons, s.median_ns);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace oc

#endif  // OBSCTL_SCENARIOS_HPP_
