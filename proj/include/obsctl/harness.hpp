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

#ifndef OBSCTL_HARNESS_HPP_
#define OBSCTL_HARNESS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "obsctl/augmented_model.hpp"
#include "obsctl/controllers.hpp"
#include "obsctl/error.hpp"
#include "obsctl/integration.hpp"
#include "obsctl/linalg.hpp"

namespace oc {

// Closed-loop policy: current time and plant state to a controller output.
using Policy = std::function<ControllerOutput(double t, const Vector& x)>;

struct SimOptions {
  double t_end = 7.5;
  double dt = 0.1;     // control period
  int substeps = 10;   // RK4 substeps of the simulated plant per tick
  Vector u_initial;    // control held before the first tick; default zero
};

struct SimResult {
  // Per substep sample. control[i] is the control held on [time[i], time[i+1]]
  // (the last entry repeats the final control).
  std::vector<double> time;
  std::vector<Vector> state;
  std::vector<Vector> control;
  // Per control tick.
  std::vector<double> tick_time;
  std::vector<Vector> tick_control;
  std::vector<int> steps_used;
  std::vector<double> rho;  // last rho evaluated at the tick (NaN if none)
  std::vector<double> tau;
  std::vector<std::int64_t> update_ns;
  bool unstable = false;
  std::string failure;

  const Vector& final_state() const { return state.back(); }
};

template <class F>
std::int64_t time_call_ns(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
}

inline SimResult run_closed_loop(const Dynamics& plant, const Vector& x0, const Policy& policy,
                                 const SimOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.t_end >= 0.0)) throw DomainError("run_closed_loop: bad timing");
  if (opts.substeps < 1) throw DomainError("run_closed_loop: substeps must be >= 1");
  const auto ticks = static_cast<long>(std::llround(opts.t_end / opts.dt));
  if (std::abs(static_cast<double>(ticks) * opts.dt - opts.t_end) > 1e-9 * (1.0 + opts.t_end))
    throw DomainError("run_closed_loop: dt must divide t_end");
  SimResult res;
  Vector x = x0;
  const double h = opts.dt / opts.substeps;
  res.time.push_back(0.0);
  res.state.push_back(x);
  for (long i = 0; i < ticks; ++i) {
    const double t = static_cast<double>(i) * opts.dt;
    ControllerOutput out;
    try {
      res.update_ns.push_back(time_call_ns([&] { out = policy(t, x); }));
    } catch (const Error& e) {
      res.unstable = true;
      res.failure = e.what();
      break;
    }
    const Vector u = out.u0;
    if (!u.allFinite()) {
      res.unstable = true;
      res.failure = "non-finite control";
      break;
    }
    res.tick_time.push_back(t);
    res.tick_control.push_back(u);
    res.steps_used.push_back(out.steps_used);
    res.rho.push_back(out.rho.empty() ? std::numeric_limits<double>::quiet_NaN() : out.rho.back());
    res.tau.push_back(out.tau.empty() ? std::numeric_limits<double>::quiet_NaN() : out.tau.back());
    for (int s = 0; s < opts.substeps; ++s) {
      res.control.push_back(u);
      Vector next;
      try {
        next = rk4_step(plant, x, u, h);
      } catch (const NonFiniteError&) {
        next = Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
      }
      if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e12) {
        res.unstable = true;
        res.failure = "state diverged";
        break;
      }
      x = std::move(next);
      res.time.push_back(t + (s + 1) * h);
      res.state.push_back(x);
    }
    if (res.unstable) break;
  }
  const Vector last = res.tick_control.empty() ? opts.u_initial : res.tick_control.back();
  res.control.resize(res.state.size(), last);
  return res;
}

struct CostWeights {
  Matrix blocked;  // eta x eta weight on chi - chi_ref
  Matrix rate;     // m x m weight on the per-tick control change
  std::function<Vector(double t)> reference;  // chi_ref(t); empty = zero
  Vector u_initial;  // control before the first tick; default zero
};

// Trapezoidal quadrature of the deviation cost over substep intervals (with
// the control held on each interval) plus ||du||^2_rate * dt per tick.
inline double integrated_cost(const SimResult& res, const CostWeights& w, double dt) {
  if (res.unstable) return std::numeric_limits<double>::infinity();
  if (res.state.empty()) return 0.0;
  const Index n = res.state.front().size();
  const Index m = w.rate.rows();
  detail::require_dims(w.blocked.rows() == n + m && w.blocked.cols() == n + m,
                       "integrated_cost: weight must be eta x eta");
  const auto stage = [&](double t, const Vector& x, const Vector& u) {
    Vector chi(n + m);
    chi << x, u;
    if (w.reference) chi -= w.reference(t);
    return chi.dot(w.blocked * chi);
  };
  double cost = 0.0;
  for (std::size_t i = 0; i + 1 < res.state.size(); ++i) {
    const Vector& u = res.control[i];
    detail::require_dims(u.size() == m, "integrated_cost: control size");
    const double h = res.time[i + 1] - res.time[i];
    // Right end uses the reference's left limit so a step on the grid does not
    // leak into the interval before it.
    cost += 0.5 * h * (stage(res.time[i], res.state[i], u) +
                       stage(res.time[i + 1] - 1e-6 * h, res.state[i + 1], u));
  }
  Vector prev = w.u_initial.size() ? w.u_initial : Vector::Zero(m);
  for (const Vector& u : res.tick_control) {
    const Vector du = u - prev;
    cost += du.dot(w.rate * du) * dt;
    prev = u;
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Termination study on a linear model with duality measurements.

struct StudyTrace {
  std::vector<double> rho;
  std::vector<double> tau;
  int rho_argmax = -1;
  double tau_slope = 0.0;       // least-squares slope of log(tau_k) for k > fit_from
  double predicted_slope = 0.0;  // 2 log(lambda_max)
  double lambda_max = 0.0;
};

// Steady-state measurement-update gain of the linear filter.
inline Matrix steady_state_kalman_gain(const AugmentedModel& model, const Matrix& h,
                                       const Matrix& r, int max_iter = 100000) {
  Matrix p = model.process_noise;
  Matrix k;
  const Index eta = model.eta();
  for (int i = 0; i < max_iter; ++i) {
    const Matrix s = (h * p * h.transpose() + r).llt().solve(h).transpose();
    k = p * s;
    const Matrix post = symmetrized((Matrix::Identity(eta, eta) - k * h) * p);
    const Matrix next = symmetrized(model.transition * post * model.transition.transpose() +
                                    model.process_noise);
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change <= 1e-15 * (1.0 + p.cwiseAbs().maxCoeff())) break;
  }
  return k;
}

// Spectral radius of Phi (I - K H) for the converged filter; governs the
// geometric decay of the accumulators.
inline double closed_loop_filter_radius(const AugmentedModel& model, const Matrix& h,
                                        const Matrix& r) {
  const Matrix k = steady_state_kalman_gain(model, h, r);
  return spectral_radius(model.transition *
                         (Matrix::Identity(model.eta(), model.eta()) - k * h));
}

inline double fit_log_slope(const std::vector<double>& y, int from, int to) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int k = from; k <= to && k < static_cast<int>(y.size()); ++k) {
    if (!(y[static_cast<std::size_t>(k)] > 0.0)) continue;
    const double ly = std::log(y[static_cast<std::size_t>(k)]);
    sx += k;
    sy += ly;
    sxx += static_cast<double>(k) * k;
    sxy += k * ly;
    ++cnt;
  }
  if (cnt < 2) return std::numeric_limits<double>::quiet_NaN();
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

inline StudyTrace termination_trace(const AugmentedModel& model, const DualityObjective& refs,
                                    const Vector& x0, int horizon, int fit_from) {
  const KalmanBackend backend(model);
  const ControllerOutput out = efficient_oc(backend, x0, Vector::Zero(model.m), MeasurementSource(refs),
                                            ControllerConfig::fixed(horizon));
  StudyTrace st;
  st.rho = out.rho;
  st.tau = out.tau;
  st.rho_argmax = static_cast<int>(std::max_element(st.rho.begin(), st.rho.end()) - st.rho.begin());
  st.tau_slope = fit_log_slope(st.tau, fit_from + 1, horizon);
  st.lambda_max = closed_loop_filter_radius(model, refs.sensitivity(model.eta()), refs.covariance);
  st.predicted_slope = 2.0 * std::log(st.lambda_max);
  return st;
}

// ---------------------------------------------------------------------------
// Benchmark helpers.

template <class F>
double median_time_ns(F&& f, int repetitions, int warmup) {
  for (int i = 0; i < warmup; ++i) f();
  std::vector<std::int64_t> t(static_cast<std::size_t>(std::max(1, repetitions)));
  for (auto& v : t) v = time_call_ns(f);
  std::sort(t.begin(), t.end());
  const std::size_t mid = t.size() / 2;
  return t.size() % 2 ? static_cast<double>(t[mid]) : 0.5 * static_cast<double>(t[mid - 1] + t[mid]);
}

struct ScalingFit {
  double intercept = 0.0;
  double linear = 0.0;
  double quadratic = 0.0;
  double quadratic_share = 0.0;  // quadratic * N_last^2 / t(N_last)
};

inline ScalingFit fit_scaling(const std::vector<int>& ns, const std::vector<double>& times) {
  detail::require_dims(ns.size() == times.size() && ns.size() >= 3, "fit_scaling: need >= 3 points");
  Matrix a(static_cast<Index>(ns.size()), 3);
  Vector y(static_cast<Index>(ns.size()));
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double n = ns[i];
    a.row(static_cast<Index>(i)) << 1.0, n, n * n;
    y(static_cast<Index>(i)) = times[i];
  }
  const Vector c = a.colPivHouseholderQr().solve(y);
  ScalingFit f{c(0), c(1), c(2), 0.0};
  const double nl = ns.back();
  f.quadratic_share = f.quadratic * nl * nl / times.back();
  return f;
}

// ---------------------------------------------------------------------------
// RFC-4180 CSV output.

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& cols) { row(cols); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os_ << ',';
      os_ << quote(fields[i]);
    }
    os_ << "\r\n";
  }

  static std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
  }
  static std::string num(long long v) { return std::to_string(v); }
  static std::string num(int v) { return std::to_string(v); }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
    return out;
  }

 private:
  std::ostream& os_;
};

}  // namespace oc

#endif  // OBSCTL_HARNESS_HPP_
