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

#ifndef OBSCTL_FILTER_BACKEND_HPP_
#define OBSCTL_FILTER_BACKEND_HPP_

#include <cmath>
#include <concepts>
#include <cstddef>
#include <utility>

#include "obsctl/augmented_model.hpp"
#include "obsctl/error.hpp"
#include "obsctl/linalg.hpp"
#include "obsctl/measurement_modes.hpp"

namespace oc {

enum class Phase { prior, posterior };

struct FilterBelief {
  Vector mean;
  Matrix cov;
  Phase phase = Phase::prior;

  Index dim() const { return mean.size(); }
};

// Posterior covariance form. `standard` is (I - K H) P; `joseph` is
// (I - K H) P (I - K H)^T + K R K^T.
enum class CovarianceForm { standard, joseph };

namespace detail {

// Number of innovation factorizations performed by kf_update on this thread.
// Used to instrument controllers.
inline thread_local std::size_t innovation_factorizations = 0;

inline void check_belief(const FilterBelief& b, const char* what) {
  detail::require_dims(b.cov.rows() == b.mean.size() && b.cov.cols() == b.mean.size(),
                       std::string(what) + ": covariance must be eta x eta");
  require_finite(b.mean, what);
  require_finite(b.cov, what);
}

}  // namespace detail

inline std::size_t innovation_factorization_count() { return detail::innovation_factorizations; }

inline FilterBelief kf_predict(const FilterBelief& posterior, const Matrix& phi, const Matrix& q) {
  detail::check_belief(posterior, "kf_predict belief");
  const Index eta = posterior.dim();
  detail::require_dims(phi.rows() == eta && phi.cols() == eta, "kf_predict: Phi must be eta x eta");
  detail::require_dims(q.rows() == eta && q.cols() == eta, "kf_predict: Q must be eta x eta");
  require_finite(phi, "kf_predict transition");
  require_finite(q, "kf_predict process covariance");
  FilterBelief out;
  out.mean = phi * posterior.mean;
  out.cov = symmetrized(phi * posterior.cov * phi.transpose() + q);
  out.phase = Phase::prior;
  return out;
}

struct UpdateResult {
  FilterBelief posterior;
  Matrix gain;            // K = P S, eta x mu
  Matrix innovation_map;  // S = H^T (H P H^T + R)^-1, eta x mu
  Vector residual;        // r
};

inline UpdateResult kf_update(const FilterBelief& prior, const MeasurementTriple& t,
                              CovarianceForm form = CovarianceForm::standard) {
  detail::check_belief(prior, "kf_update belief");
  const Index eta = prior.dim();
  t.validate(eta);
  const Matrix& h = t.sensitivity;
  const Matrix& p = prior.cov;
  UpdateResult out;
  out.residual = t.residual;
  if (t.rows() == 0) {
    out.posterior = prior;
    out.posterior.phase = Phase::posterior;
    out.gain = Matrix::Zero(eta, 0);
    out.innovation_map = Matrix::Zero(eta, 0);
    return out;
  }
  const Matrix innovation = symmetrized(h * p * h.transpose() + t.covariance);
  const Eigen::LLT<Matrix> llt(innovation);
  ++detail::innovation_factorizations;
  if (llt.info() != Eigen::Success)
    throw SingularObjectiveError("kf_update: innovation matrix is not positive definite");
  // S^T = (H P H^T + R)^-1 H.
  out.innovation_map = llt.solve(h).transpose();
  out.gain = p * out.innovation_map;
  out.posterior.mean = prior.mean + out.gain * t.residual;
  const Matrix ikh = Matrix::Identity(eta, eta) - out.gain * h;
  if (form == CovarianceForm::joseph) {
    out.posterior.cov = symmetrized(ikh * p * ikh.transpose() +
                                    out.gain * t.covariance * out.gain.transpose());
  } else {
    out.posterior.cov = symmetrized(ikh * p);
  }
  out.posterior.phase = Phase::posterior;
  return out;
}

inline UpdateResult kf_update(const FilterBelief& prior, const Vector& z, const Matrix& h,
                              const Matrix& r, CovarianceForm form = CovarianceForm::standard) {
  detail::require_dims(h.cols() == prior.dim() && h.rows() == z.size(),
                       "kf_update: H must be mu x eta");
  return kf_update(prior, MeasurementTriple{z - h * prior.mean, h, r}, form);
}

// ---------------------------------------------------------------------------
// RTS smoothing.

// Relative eigenvalue cut used when inverting a prior covariance. Priors early
// in the horizon are exactly singular because the state block of Q is zero;
// every correction lies in the prior's range, so the pseudo-inverse is exact.
inline constexpr double kPriorPinvTol = 1e-12;

struct SmoothedStep {
  FilterBelief smoothed;
  Matrix gain;  // L_k
};

// cross = cov(chi_k, chi_{k+1}) under the posterior at k; equal to P_k(+) Phi^T
// for a linear(ized) transition.
inline Matrix smoother_gain(const Matrix& cross, const Matrix& prior_next_cov,
                            double rel_tol = kPriorPinvTol) {
  return right_solve_psd(cross, prior_next_cov, rel_tol);
}

inline SmoothedStep rts_backward_step_cross(const FilterBelief& post_k, const FilterBelief& prior_k1,
                                            const Matrix& cross, const FilterBelief& smoothed_k1,
                                            double rel_tol = kPriorPinvTol) {
  detail::check_belief(post_k, "rts posterior");
  detail::check_belief(prior_k1, "rts prior");
  detail::check_belief(smoothed_k1, "rts smoothed");
  detail::require_dims(cross.rows() == post_k.dim() && cross.cols() == prior_k1.dim(),
                       "rts_backward_step: cross covariance shape");
  detail::require_dims(smoothed_k1.dim() == prior_k1.dim(),
                       "rts_backward_step: smoothed/prior size mismatch");
  SmoothedStep out;
  out.gain = smoother_gain(cross, prior_k1.cov, rel_tol);
  out.smoothed.mean = post_k.mean + out.gain * (smoothed_k1.mean - prior_k1.mean);
  out.smoothed.cov =
      symmetrized(post_k.cov + out.gain * (smoothed_k1.cov - prior_k1.cov) * out.gain.transpose());
  out.smoothed.phase = Phase::posterior;
  return out;
}

inline SmoothedStep rts_backward_step(const FilterBelief& post_k, const FilterBelief& prior_k1,
                                      const Matrix& phi_k, const FilterBelief& smoothed_k1,
                                      double rel_tol = kPriorPinvTol) {
  return rts_backward_step_cross(post_k, prior_k1, post_k.cov * phi_k.transpose(), smoothed_k1,
                                 rel_tol);
}

// ---------------------------------------------------------------------------
// Backends. All controllers consume a backend through predict(); the
// returned transition is exact for KF/EKF and statistically linearized for
// the UKF.

struct Prediction {
  FilterBelief prior;
  Matrix transition;  // Phi_k (or its statistical linearization)
  Matrix cross;       // cov(chi_k(+), chi_{k+1}(-)), eta x eta
};

template <class B>
concept FilterBackend = requires(const B& b, const FilterBelief& f) {
  { b.predict(f) } -> std::same_as<Prediction>;
  { b.state_dim() } -> std::convertible_to<Index>;
  { b.control_dim() } -> std::convertible_to<Index>;
  { b.process_noise() } -> std::convertible_to<const Matrix&>;
  { B::exact_transition } -> std::convertible_to<bool>;
  { B::time_invariant } -> std::convertible_to<bool>;
};

// Backends whose transition is an explicit linear(ized) map, required by the
// inverse-free accumulators.
template <class B>
concept ExactTransitionBackend = FilterBackend<B> && B::exact_transition;

class KalmanBackend {
 public:
  static constexpr bool exact_transition = true;
  static constexpr bool time_invariant = true;

  explicit KalmanBackend(AugmentedModel model) : model_(std::move(model)) { model_.validate(); }

  Index state_dim() const { return model_.n; }
  Index control_dim() const { return model_.m; }
  const Matrix& process_noise() const { return model_.process_noise; }
  const Matrix& transition() const { return model_.transition; }
  const AugmentedModel& model() const { return model_; }

  Prediction predict(const FilterBelief& post) const {
    return {kf_predict(post, model_.transition, model_.process_noise), model_.transition,
            post.cov * model_.transition.transpose()};
  }

 private:
  AugmentedModel model_;
};

inline Matrix augmented_step_transition(const StepLinearization& lin) {
  return augmented_transition(lin.state_sensitivity, lin.control_sensitivity);
}

class EkfBackend {
 public:
  static constexpr bool exact_transition = true;
  static constexpr bool time_invariant = false;

  EkfBackend(NonlinearPlant plant, Matrix process_noise)
      : plant_(std::move(plant)), q_(std::move(process_noise)) {
    detail::require_dims(q_.rows() == plant_.n + plant_.m && q_.cols() == plant_.n + plant_.m,
                         "EkfBackend: process covariance must be eta x eta");
  }

  Index state_dim() const { return plant_.n; }
  Index control_dim() const { return plant_.m; }
  const Matrix& process_noise() const { return q_; }
  const NonlinearPlant& plant() const { return plant_; }

  Prediction predict(const FilterBelief& post) const {
    detail::check_belief(post, "ekf predict belief");
    const Vector x = post.mean.head(plant_.n);
    const Vector u = post.mean.tail(plant_.m);
    const StepLinearization lin = linearize_step(plant_, x, u);
    Prediction out;
    out.transition = augmented_step_transition(lin);
    out.prior.mean.resize(post.dim());
    out.prior.mean << lin.x_next, u;
    out.prior.cov = symmetrized(out.transition * post.cov * out.transition.transpose() + q_);
    out.prior.phase = Phase::prior;
    out.cross = post.cov * out.transition.transpose();
    return out;
  }

 private:
  NonlinearPlant plant_;
  Matrix q_;
};

struct UkfParams {
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;
  bool kappa_default = true;  // kappa = 3 - eta

  static UkfParams standard() { return {}; }
  static UkfParams with(double alpha, double beta, double kappa) {
    return {alpha, beta, kappa, false};
  }

  double kappa_for(Index eta) const {
    return kappa_default ? 3.0 - static_cast<double>(eta) : kappa;
  }
  double lambda_for(Index eta) const {
    const double e = static_cast<double>(eta);
    return alpha * alpha * (e + kappa_for(eta)) - e;
  }
  void validate(Index eta) const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("UkfParams: alpha must lie in (0, 1]");
    if (!(static_cast<double>(eta) + lambda_for(eta) > 0.0))
      throw DomainError("UkfParams: eta + lambda must be positive");
  }
};

struct UnscentedMoments {
  Vector mean;
  Matrix cov;    // output covariance (no additive noise)
  Matrix cross;  // cov(input, output)
};

// Unscented transform with 2 eta + 1 sigma points. The square root of the
// input covariance comes from its eigendecomposition with negative
// eigenvalues clamped to zero, so singular covariances are allowed.
template <class F>
UnscentedMoments unscented_transform(const Vector& mean, const Matrix& cov, const F& f,
                                     const UkfParams& params = {}) {
  const Index eta = mean.size();
  detail::require_dims(cov.rows() == eta && cov.cols() == eta,
                       "unscented_transform: covariance must be eta x eta");
  params.validate(eta);
  const double lambda = params.lambda_for(eta);
  const double c = static_cast<double>(eta) + lambda;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov));
  const Vector& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.size() && ev(0) < -1e-8 * scale)
    throw DomainError("unscented_transform: covariance has a negative eigenvalue");
  const Matrix root =
      es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * std::sqrt(c);

  const double wm0 = lambda / c;
  const double wc0 = wm0 + (1.0 - params.alpha * params.alpha + params.beta);
  const double wi = 0.5 / c;

  const Vector y0 = f(mean);
  const Index out_dim = y0.size();
  Matrix ys(out_dim, 2 * eta);
  for (Index i = 0; i < eta; ++i) {
    ys.col(i) = f(Vector(mean + root.col(i)));
    ys.col(eta + i) = f(Vector(mean - root.col(i)));
  }
  UnscentedMoments out;
  out.mean = wm0 * y0 + wi * ys.rowwise().sum();
  const Vector d0 = y0 - out.mean;
  out.cov = wc0 * d0 * d0.transpose();
  out.cross = Matrix::Zero(eta, out_dim);
  for (Index i = 0; i < eta; ++i) {
    const Vector dp = ys.col(i) - out.mean;
    const Vector dm = ys.col(eta + i) - out.mean;
    out.cov.noalias() += wi * (dp * dp.transpose() + dm * dm.transpose());
    out.cross.noalias() += wi * (root.col(i) * dp.transpose() - root.col(i) * dm.transpose());
  }
  out.cov = symmetrized(out.cov);
  require_finite(out.mean, "unscented mean");
  require_finite(out.cov, "unscented covariance");
  return out;
}

class UkfBackend {
 public:
  static constexpr bool exact_transition = false;
  static constexpr bool time_invariant = false;

  UkfBackend(NonlinearPlant plant, Matrix process_noise, UkfParams params = {})
      : plant_(std::move(plant)), q_(std::move(process_noise)), params_(params) {
    detail::require_dims(q_.rows() == plant_.n + plant_.m && q_.cols() == plant_.n + plant_.m,
                         "UkfBackend: process covariance must be eta x eta");
    params_.validate(plant_.n + plant_.m);
  }

  Index state_dim() const { return plant_.n; }
  Index control_dim() const { return plant_.m; }
  const Matrix& process_noise() const { return q_; }
  const NonlinearPlant& plant() const { return plant_; }
  const UkfParams& params() const { return params_; }

  Prediction predict(const FilterBelief& post) const {
    detail::check_belief(post, "ukf predict belief");
    const Index n = plant_.n;
    const Index m = plant_.m;
    const auto step = [&](const Vector& chi) -> Vector {
      Vector out(n + m);
      out << propagate(plant_, chi.head(n), chi.tail(m)), chi.tail(m);
      return out;
    };
    const UnscentedMoments mo = unscented_transform(post.mean, post.cov, step, params_);
    Prediction out;
    out.prior.mean = mo.mean;
    out.prior.cov = symmetrized(mo.cov + q_);
    out.prior.phase = Phase::prior;
    out.cross = mo.cross;
    // Statistical linearization on the positive-rank subspace of the input.
    out.transition = mo.cross.transpose() * pinv_sym(post.cov, kPriorPinvTol);
    return out;
  }

 private:
  NonlinearPlant plant_;
  Matrix q_;
  UkfParams params_;
};

// ---------------------------------------------------------------------------
// One predict + update cycle.

struct FilterStep {
  FilterBelief prior;
  FilterBelief posterior;
  Matrix transition;
  Matrix cross;
  Matrix gain;
  Matrix innovation_map;
  Vector residual;
  Matrix sensitivity;
};

inline FilterStep update_step(Prediction pred, const MeasurementTriple& t,
                              CovarianceForm form = CovarianceForm::standard) {
  UpdateResult up = kf_update(pred.prior, t, form);
  return {std::move(pred.prior),     std::move(up.posterior), std::move(pred.transition),
          std::move(pred.cross),     std::move(up.gain),      std::move(up.innovation_map),
          std::move(up.residual),    t.sensitivity};
}

template <FilterBackend B>
FilterStep filter_step(const B& backend, const FilterBelief& posterior, const MeasurementTriple& t,
                       CovarianceForm form = CovarianceForm::standard) {
  return update_step(backend.predict(posterior), t, form);
}

// Measurement evaluated at the predicted prior mean.
template <FilterBackend B>
FilterStep filter_step(const B& backend, const FilterBelief& posterior,
                       const MeasurementSource& source, Index k,
                       CovarianceForm form = CovarianceForm::standard) {
  Prediction pred = backend.predict(posterior);
  const MeasurementTriple t = source(k, pred.prior.mean);
  return update_step(std::move(pred), t, form);
}

inline FilterStep ekf_step(const EkfBackend& backend, const FilterBelief& posterior,
                           const MeasurementSource& source, Index k) {
  return filter_step(backend, posterior, source, k);
}

inline FilterStep ukf_step(const UkfBackend& backend, const FilterBelief& posterior,
                           const MeasurementSource& source, Index k) {
  return filter_step(backend, posterior, source, k);
}

}  // namespace oc

#endif  // OBSCTL_FILTER_BACKEND_HPP_
