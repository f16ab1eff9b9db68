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

#ifndef OBSCTL_CONTROLLERS_HPP_
#define OBSCTL_CONTROLLERS_HPP_

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "obsctl/augmented_model.hpp"
#include "obsctl/error.hpp"
#include "obsctl/filter_backend.hpp"
#include "obsctl/linalg.hpp"
#include "obsctl/measurement_modes.hpp"

namespace oc {

enum class Algorithm { naive, forward_only, efficient, anytime };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::naive: return "naive";
    case Algorithm::forward_only: return "forward_only";
    case Algorithm::efficient: return "efficient";
    case Algorithm::anytime: return "anytime";
  }
  return "?";
}

struct ControllerConfig {
  int horizon = 50;  // N: measurements at k = 0..N
  double rho_tol = 1e-4;
  double tau_tol = 1e-7;
  bool termination = true;
  // Only allow termination once rho has started to decrease.
  bool peak_guard = true;
  CovarianceForm covariance_form = CovarianceForm::standard;

  void validate() const {
    if (horizon < 0) throw DomainError("ControllerConfig: horizon must be >= 0");
    if (!(rho_tol >= 0.0) || !(tau_tol >= 0.0))
      throw DomainError("ControllerConfig: thresholds must be non-negative");
  }

  static ControllerConfig fixed(int horizon) {
    ControllerConfig c;
    c.horizon = horizon;
    c.termination = false;
    return c;
  }
};

struct ControllerOutput {
  Vector u0;
  double trace_p0s = 0.0;  // trace of the smoothed covariance of u0
  int steps_used = 0;      // last horizon step processed
  bool terminated = false;
  std::vector<double> rho;
  std::vector<double> tau;
  std::vector<double> residual_norms;
  std::size_t factorizations = 0;
};

struct RhoTau {
  double rho = 0.0;
  double tau = 0.0;
};

// rho = ||G Phi^T S||_2, tau = tr(Psi) / trace_p0s with
// Psi = G Phi^T S H Phi G^T.
inline RhoTau compute_rho_tau(const Matrix& g_prev, const Matrix& phi_prev, const Matrix& s,
                              const Matrix& h, double trace_p0s) {
  if (!(trace_p0s > 0.0)) throw DomainError("compute_rho_tau: trace of P0[s] must be positive");
  const Matrix a = g_prev * phi_prev.transpose() * s;
  const Matrix psi = a * h * phi_prev * g_prev.transpose();
  return {spectral_norm(a), psi.trace() / trace_p0s};
}

class TerminationMonitor {
 public:
  explicit TerminationMonitor(const ControllerConfig& c) : cfg_(c) {}

  bool stop(double rho, double tau) {
    if (has_prev_ && rho < prev_) peaked_ = true;
    prev_ = rho;
    has_prev_ = true;
    if (!cfg_.termination) return false;
    if (cfg_.peak_guard && !peaked_) return false;
    return rho <= cfg_.rho_tol && tau <= cfg_.tau_tol;
  }

 private:
  ControllerConfig cfg_;
  double prev_ = 0.0;
  bool has_prev_ = false;
  bool peaked_ = false;
};

inline FilterBelief initial_belief(const Vector& mean, const Matrix& q) {
  detail::require_dims(q.rows() == mean.size() && q.cols() == mean.size(),
                       "initial_belief: Q must be eta x eta");
  return {mean, q, Phase::prior};
}

inline Vector stack_state(const Vector& x, const Vector& u) {
  Vector chi(x.size() + u.size());
  chi << x, u;
  return chi;
}

namespace detail {

template <class B>
void check_inputs(const B& backend, const Vector& x, const Vector& u_last,
                  const ControllerConfig& cfg) {
  cfg.validate();
  require_dims(x.size() == backend.state_dim(), "controller: state size mismatch");
  require_dims(u_last.size() == backend.control_dim(), "controller: control size mismatch");
  require_finite(x, "controller state");
  require_finite(u_last, "controller last control");
}

inline Matrix control_selector(Index n, Index m) {
  Matrix e = Matrix::Zero(m, n + m);
  e.rightCols(m).setIdentity();
  return e;
}

inline Matrix cross_of(const Prediction& pred, const FilterBelief& post) {
  if (pred.cross.size()) return pred.cross;
  return post.cov * pred.transition.transpose();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward filter plus full RTS backward pass.

template <FilterBackend B>
ControllerOutput naive_oc(const B& backend, const Vector& x, const Vector& u_last,
                          const MeasurementSource& refs, const ControllerConfig& cfg) {
  detail::check_inputs(backend, x, u_last, cfg);
  const std::size_t f0 = innovation_factorization_count();
  const Index m = backend.control_dim();
  const auto horizon = static_cast<std::size_t>(cfg.horizon);
  std::vector<FilterBelief> priors;
  std::vector<FilterBelief> posts;
  std::vector<Matrix> crosses;
  priors.reserve(horizon + 1);
  posts.reserve(horizon + 1);
  crosses.reserve(horizon);
  ControllerOutput out;

  FilterBelief prior = initial_belief(stack_state(x, u_last), backend.process_noise());
  for (int k = 0; k <= cfg.horizon; ++k) {
    if (k > 0) {
      Prediction pred = backend.predict(posts.back());
      crosses.push_back(detail::cross_of(pred, posts.back()));
      prior = std::move(pred.prior);
    }
    const MeasurementTriple t = refs(k, prior.mean);
    UpdateResult up = kf_update(prior, t, cfg.covariance_form);
    out.residual_norms.push_back(up.residual.norm());
    priors.push_back(std::move(prior));
    posts.push_back(std::move(up.posterior));
  }
  FilterBelief smoothed = posts.back();
  for (int k = cfg.horizon - 1; k >= 0; --k) {
    const auto i = static_cast<std::size_t>(k);
    smoothed = rts_backward_step_cross(posts[i], priors[i + 1], crosses[i], smoothed).smoothed;
  }
  out.u0 = smoothed.mean.tail(m);
  out.trace_p0s = smoothed.cov.bottomRightCorner(m, m).trace();
  out.steps_used = cfg.horizon;
  out.factorizations = innovation_factorization_count() - f0;
  return out;
}

// ---------------------------------------------------------------------------
// Single forward pass with the smoother-gain accumulator Gamma.

template <FilterBackend B>
ControllerOutput forward_only_oc(const B& backend, const Vector& x, const Vector& u_last,
                                 const MeasurementSource& refs, const ControllerConfig& cfg) {
  detail::check_inputs(backend, x, u_last, cfg);
  const std::size_t f0 = innovation_factorization_count();
  const Index n = backend.state_dim();
  const Index m = backend.control_dim();
  ControllerOutput out;
  TerminationMonitor monitor(cfg);

  Matrix gamma = detail::control_selector(n, m);
  FilterBelief prior = initial_belief(stack_state(x, u_last), backend.process_noise());
  FilterBelief post;
  Vector u0 = u_last;
  Matrix puu = backend.process_noise().bottomRightCorner(m, m);
  for (int k = 0; k <= cfg.horizon; ++k) {
    if (k > 0) {
      Prediction pred = backend.predict(post);
      gamma = right_solve_psd(Matrix(gamma * detail::cross_of(pred, post)), pred.prior.cov, kPriorPinvTol);
      prior = std::move(pred.prior);
    }
    const MeasurementTriple t = refs(k, prior.mean);
    UpdateResult up = kf_update(prior, t, cfg.covariance_form);
    post = std::move(up.posterior);
    u0 += gamma * (post.mean - prior.mean);
    const Matrix dp = gamma * (post.cov - prior.cov) * gamma.transpose();
    puu = symmetrized(puu + dp);
    const double tr = puu.trace();
    if (!(tr > 0.0)) throw DomainError("forward_only_oc: trace of P0[s] must be positive");
    out.rho.push_back(spectral_norm(gamma * up.gain));
    out.tau.push_back(-dp.trace() / tr);
    out.residual_norms.push_back(up.residual.norm());
    out.steps_used = k;
    if (monitor.stop(out.rho.back(), out.tau.back())) {
      out.terminated = true;
      break;
    }
  }
  out.u0 = std::move(u0);
  out.trace_p0s = puu.trace();
  out.factorizations = innovation_factorization_count() - f0;
  return out;
}

namespace detail {

struct EfficientPass {
  Vector du;
  double trace = 0.0;
};

// Inverse-free accumulation from a given initial prior mean.
template <FilterBackend B>
EfficientPass efficient_pass(const B& backend, const Vector& chi0, const MeasurementSource& refs,
                             const ControllerConfig& cfg, ControllerOutput& out) {
  const Index n = backend.state_dim();
  const Index m = backend.control_dim();
  const Index eta = n + m;
  const Matrix& q = backend.process_noise();
  TerminationMonitor monitor(cfg);
  Matrix g = control_selector(n, m) * q;
  Matrix phi_prev = Matrix::Identity(eta, eta);
  double trace = q.trace();
  if (!(trace > 0.0)) throw DomainError("efficient_oc: process covariance has zero trace");
  FilterBelief prior = initial_belief(chi0, q);
  FilterBelief post;
  Vector du = Vector::Zero(m);
  for (int k = 0; k <= cfg.horizon; ++k) {
    if (k > 0) {
      Prediction pred = backend.predict(post);
      phi_prev = std::move(pred.transition);
      prior = std::move(pred.prior);
    }
    const MeasurementTriple t = refs(k, prior.mean);
    UpdateResult up = kf_update(prior, t, cfg.covariance_form);
    const Matrix gphi = g * phi_prev.transpose();
    const Matrix a = gphi * up.innovation_map;
    const double psi_trace = (a * t.sensitivity * gphi.transpose()).trace();
    du += a * up.residual;
    trace -= psi_trace;
    if (!(trace > 0.0)) throw DomainError("efficient_oc: trace of P0[s] must be positive");
    out.rho.push_back(spectral_norm(a));
    out.tau.push_back(psi_trace / trace);
    out.residual_norms.push_back(up.residual.norm());
    out.steps_used = k;
    if (monitor.stop(out.rho.back(), out.tau.back())) {
      out.terminated = true;
      break;
    }
    g = gphi * (Matrix::Identity(eta, eta) - up.gain * t.sensitivity).transpose();
    post = std::move(up.posterior);
  }
  return {std::move(du), trace};
}

}  // namespace detail

template <FilterBackend B>
ControllerOutput efficient_oc(const B& backend, const Vector& x, const Vector& u_last,
                              const MeasurementSource& refs, const ControllerConfig& cfg) {
  if constexpr (!B::exact_transition) {
    throw UnsupportedError("efficient_oc requires a backend with an explicit transition (KF/EKF)");
  } else {
    detail::check_inputs(backend, x, u_last, cfg);
    const std::size_t f0 = innovation_factorization_count();
    ControllerOutput out;
    detail::EfficientPass pass =
        detail::efficient_pass(backend, stack_state(x, u_last), refs, cfg, out);
    out.u0 = u_last + pass.du;
    out.trace_p0s = pass.trace;
    out.factorizations = innovation_factorization_count() - f0;
    return out;
  }
}

// Reactive LQR term on the true state plus the state-independent anticipatory
// sum obtained by filtering from chi_0(-) = z_0.
template <FilterBackend B>
ControllerOutput anytime_oc(const B& backend, const Vector& x, const Vector& u_last,
                            const Vector& z0, const MeasurementSource& refs,
                            const ControllerConfig& cfg, const Matrix& k_lqr) {
  if constexpr (!B::time_invariant || !B::exact_transition) {
    throw UnsupportedError("anytime_oc requires a linear time-invariant model");
  } else {
    detail::check_inputs(backend, x, u_last, cfg);
    const Index eta = backend.state_dim() + backend.control_dim();
    detail::require_dims(z0.size() == eta, "anytime_oc: z0 must be eta-dimensional");
    detail::require_dims(k_lqr.rows() == backend.control_dim() && k_lqr.cols() == eta,
                         "anytime_oc: K_lqr must be m x eta");
    const std::size_t f0 = innovation_factorization_count();
    ControllerOutput out;
    detail::EfficientPass pass = detail::efficient_pass(backend, z0, refs, cfg, out);
    out.u0 = u_last + k_lqr * (z0 - stack_state(x, u_last)) + pass.du;
    out.trace_p0s = pass.trace;
    out.factorizations = innovation_factorization_count() - f0;
    return out;
  }
}

// ---------------------------------------------------------------------------
// Reactive / anticipatory gain sequences for an LTI model with duality
// measurements: u0 = u_last + K_eff r_0 + sum_k Lambda_k z_k.

struct SeparableGains {
  Matrix k_eff;                 // m x eta
  std::vector<Matrix> lambda;   // Lambda_0 (m x eta), Lambda_k (m x mu_k)
};

inline SeparableGains compute_keff_lambda(const AugmentedModel& model, const DualityObjective& refs,
                                          int horizon) {
  model.validate();
  if (horizon < 0) throw DomainError("compute_keff_lambda: horizon must be >= 0");
  const Index n = model.n;
  const Index m = model.m;
  const Index eta = model.eta();
  if (!refs.measures_full_state(eta))
    throw DomainError("compute_keff_lambda: the first measurement must observe the full state");
  const Matrix& phi = model.transition;
  const Matrix& q = model.process_noise;
  const Matrix h = refs.sensitivity(eta);
  const auto count = static_cast<std::size_t>(horizon) + 1;
  std::vector<Matrix> gk(count);
  std::vector<Matrix> kk(count);
  Matrix p = q;
  Matrix g = detail::control_selector(n, m) * q;
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0) p = symmetrized(phi * p * phi.transpose() + q);
    const Matrix innovation = symmetrized(h * p * h.transpose() + refs.covariance);
    const Eigen::LLT<Matrix> llt(innovation);
    if (llt.info() != Eigen::Success)
      throw SingularObjectiveError("compute_keff_lambda: innovation not positive definite");
    const Matrix s = llt.solve(h).transpose();
    kk[k] = p * s;
    const Matrix gphi = k == 0 ? g : Matrix(g * phi.transpose());
    gk[k] = gphi * s;
    g = gphi * (Matrix::Identity(eta, eta) - kk[k] * h).transpose();
    p = symmetrized((Matrix::Identity(eta, eta) - kk[k] * h) * p);
  }
  SeparableGains out;
  out.lambda.resize(count);
  Matrix b = Matrix::Zero(m, eta);  // B_N
  for (std::size_t i = count; i-- > 0;) {
    // b holds B_i here.
    out.lambda[i] = i == 0 ? Matrix(-b * phi) : Matrix(gk[i] - b * phi * kk[i]);
    b = gk[i] * h + b * phi * (Matrix::Identity(eta, eta) - kk[i] * h);
  }
  out.k_eff = std::move(b);
  return out;
}

// u0 predicted by the separable gains.
inline Vector apply_separable_gains(const SeparableGains& gains, const DualityObjective& refs,
                                    const Vector& x, const Vector& u_last) {
  const Vector chi0 = stack_state(x, u_last);
  const Vector z0 = refs.target(0);
  Vector u = u_last + gains.k_eff * (z0 - chi0);
  u += gains.lambda[0] * z0;
  for (std::size_t k = 1; k < gains.lambda.size(); ++k)
    u += gains.lambda[k] * refs.measured_target(static_cast<Index>(k));
  return u;
}

// ---------------------------------------------------------------------------
// Dense reference solution of the smoothing problem with the dynamics imposed
// exactly. Decision variables are u_0..u_N; x_0 is fixed and
// x_{k+1} = A x_k + B u_k. Measurement targets are read from the source at a
// zero prior, so the source must be affine in chi.

inline Vector batch_oracle(const AugmentedModel& model, const Vector& x, const Vector& u_last,
                           const MeasurementSource& refs, int horizon) {
  model.validate();
  if (horizon < 0) throw DomainError("batch_oracle: horizon must be >= 0");
  const Index n = model.n;
  const Index m = model.m;
  const Index eta = model.eta();
  detail::require_dims(x.size() == n && u_last.size() == m, "batch_oracle: input sizes");
  const Index steps = horizon + 1;
  const Index nv = steps * m;
  const Matrix a = model.plant_a();
  const Matrix b = model.plant_b();
  const Matrix rate = model.rate_weight();
  const Eigen::LLT<Matrix> rate_llt(rate);

  std::vector<Matrix> rows;
  std::vector<Vector> rhs;
  // chi_k = c + M U.
  Vector xc = x;
  Matrix xm = Matrix::Zero(n, nv);
  const Vector zero = Vector::Zero(eta);
  for (Index k = 0; k < steps; ++k) {
    Vector c(eta);
    c << xc, Vector::Zero(m);
    Matrix mk = Matrix::Zero(eta, nv);
    mk.topRows(n) = xm;
    mk.block(n, k * m, m, m).setIdentity();
    const MeasurementTriple t = refs(k, zero);
    t.validate(eta);
    if (t.rows() > 0) {
      const Eigen::LLT<Matrix> llt(symmetrized(t.covariance));
      if (llt.info() != Eigen::Success)
        throw SingularObjectiveError("batch_oracle: measurement covariance not positive definite");
      // Whitened rows: L^-1 (z - H (c + M U)).
      const Matrix lower = llt.matrixL();
      rows.push_back(lower.triangularView<Eigen::Lower>().solve(Matrix(t.sensitivity * mk)));
      rhs.push_back(lower.triangularView<Eigen::Lower>().solve(Vector(t.residual - t.sensitivity * c)));
    }
    // Control-rate rows: U_k - U_{k-1} weighted by Rtilde^(1/2).
    const Matrix upper = rate_llt.matrixU();
    Matrix dr = Matrix::Zero(m, nv);
    dr.block(0, k * m, m, m) = upper;
    Vector dv = Vector::Zero(m);
    if (k > 0) {
      dr.block(0, (k - 1) * m, m, m) = -upper;
    } else {
      dv = upper * u_last;
    }
    rows.push_back(std::move(dr));
    rhs.push_back(std::move(dv));
    // Advance dynamics.
    xc = a * xc;
    xm = a * xm;
    xm.block(0, k * m, n, m) += b;
  }
  Index total = 0;
  for (const auto& r : rows) total += r.rows();
  Matrix big(total, nv);
  Vector vec(total);
  Index off = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    big.middleRows(off, rows[i].rows()) = rows[i];
    vec.segment(off, rhs[i].size()) = rhs[i];
    off += rows[i].rows();
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(big);
  if (qr.rank() < nv) throw SingularObjectiveError("batch_oracle: normal equations are rank deficient");
  const Vector u = qr.solve(vec);
  return u.head(m);
}

// ---------------------------------------------------------------------------
// Stateful controller carrying u_last between ticks.

// Measurement source for the horizon starting at time t.
using ReferenceProvider = std::function<MeasurementSource(double t)>;
// Augmented target z_0 at time t (any-time algorithm only).
using TargetProvider = std::function<Vector(double t)>;

template <FilterBackend B>
ControllerOutput run_algorithm(Algorithm alg, const B& backend, const Vector& x,
                               const Vector& u_last, const MeasurementSource& refs,
                               const ControllerConfig& cfg, const Matrix* k_lqr = nullptr,
                               const Vector* z0 = nullptr) {
  switch (alg) {
    case Algorithm::naive: return naive_oc(backend, x, u_last, refs, cfg);
    case Algorithm::forward_only: return forward_only_oc(backend, x, u_last, refs, cfg);
    case Algorithm::efficient: return efficient_oc(backend, x, u_last, refs, cfg);
    case Algorithm::anytime:
      if (!k_lqr || !z0) throw DomainError("anytime algorithm needs K_lqr and z0");
      return anytime_oc(backend, x, u_last, *z0, refs, cfg, *k_lqr);
  }
  throw DomainError("unknown algorithm");
}

template <FilterBackend B>
class ObservedController {
 public:
  ObservedController(B backend, Algorithm alg, ControllerConfig cfg, ReferenceProvider refs)
      : backend_(std::move(backend)), alg_(alg), cfg_(cfg), refs_(std::move(refs)),
        u_last_(Vector::Zero(backend_.control_dim())) {
    cfg_.validate();
  }

  void set_reactive(Matrix k_lqr, TargetProvider target) {
    k_lqr_ = std::move(k_lqr);
    target_ = std::move(target);
  }

  ControllerOutput update(double t, const Vector& x) {
    const MeasurementSource src = refs_(t);
    ControllerOutput out;
    if (alg_ == Algorithm::anytime) {
      if (!k_lqr_ || !target_) throw DomainError("anytime controller needs set_reactive()");
      const Vector z0 = target_(t);
      out = run_algorithm(alg_, backend_, x, u_last_, src, cfg_, &*k_lqr_, &z0);
    } else {
      out = run_algorithm(alg_, backend_, x, u_last_, src, cfg_);
    }
    u_last_ = out.u0;
    return out;
  }

  const Vector& last_control() const { return u_last_; }
  void reset(Vector u) { u_last_ = std::move(u); }
  const B& backend() const { return backend_; }
  const ControllerConfig& config() const { return cfg_; }
  ControllerConfig& config() { return cfg_; }

 private:
  B backend_;
  Algorithm alg_;
  ControllerConfig cfg_;
  ReferenceProvider refs_;
  Vector u_last_;
  std::optional<Matrix> k_lqr_;
  TargetProvider target_;
};

}  // namespace oc

#endif  // OBSCTL_CONTROLLERS_HPP_
