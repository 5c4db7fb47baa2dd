#pragma once

// Stability of the estimation-error dynamics
//
//   z(k) = Psi_k z(k-1),   Psi_k = I - K_k H~_{k-1} = P_k P_{k-1}^{-1}
//
// Lyapunov function V(k, z) = z^* P_k^{-1} z, classification of the LTI case
// by the smallest eigenvalue modulus of A, exponential fits of ||Psi(k,0)||,
// and the singular-value/eigenvalue limit s_i(A^n)^{1/n} -> |lambda_i|.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "isokal/error.hpp"
#include "isokal/estimator.hpp"
#include "isokal/linalg.hpp"
#include "isokal/model.hpp"
#include "isokal/observability.hpp"

namespace isokal {

enum class Classification { UniformlyAsymptoticallyStable, LyapunovStableOnly, Indeterminate };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::UniformlyAsymptoticallyStable: return "UniformlyAsymptoticallyStable";
    case Classification::LyapunovStableOnly: return "LyapunovStableOnly";
    case Classification::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

template <class S = double>
struct ExpFit {
  S alpha{0};
  S beta{0};
  std::size_t first_k = 0;  // window actually fitted
  std::size_t last_k = 0;
};

template <class S = double>
struct StabilityReport {
  std::vector<S> eigenvalues_A;  // |lambda_i(A)|, descending
  S lambda_min_A{0};
  S lambda_max_A{0};
  std::optional<Classification> classification;  // absent if not LTI or not observable
  bool uniformly_stable_hint = false;             // lambda_max(A) < 1
  std::optional<ExpFit<S>> exp_fit;
  std::vector<S> psi_norm_trace;  // ||Psi(k,0)||, k = 0..K
  std::vector<S> lyapunov_trace;  // V(k, z(k)) from z0 = (1,...,1)/sqrt(d)
  bool lyapunov_monotone = false;
  std::vector<S> covariance_norm_trace;  // ||P_k||
};

/// Psi_k = I - K_k H~_{k-1}, built from the state before the step.
template <class S>
Matrix<S> psi_step(const EstimatorState<S>& prev, const Matrix<S>& R_prev) {
  const GainMatrix<S> g = gain(prev, R_prev);
  return identity<S>(prev.P.rows()) - g.value * prev.H_tilde_next;
}

/// Psi(k,j) = P_k P_j^{-1}, via a Cholesky solve with P_j.
template <class S>
Matrix<S> psi_transition(const Matrix<S>& P_k, const Matrix<S>& P_j) {
  // X P_j = P_k  <=>  P_j X^* = P_k^*
  return spd_solve<S>(P_j, Matrix<S>(P_k.adjoint()), "P_j").adjoint();
}

/// V(k, z) = z^* P_k^{-1} z.
template <class S>
S lyapunov_value(const Matrix<S>& P_k, const Vector<S>& z) {
  if (z.size() != P_k.rows()) throw DimensionError("z has the wrong length");
  if (z.isZero(0)) return S(0);
  const Vector<S> w = spd_solve<S>(P_k, Matrix<S>(z), "P_k").col(0);
  return z.dot(w);
}

/// -z^* H~^* Sigma^{-1} H~ z, the one-step change of V along the error
/// dynamics in closed form.
template <class S>
S lyapunov_decrement(const Matrix<S>& H_tilde, const Matrix<S>& innovation_cov,
                     const Vector<S>& z) {
  const Vector<S> hz = H_tilde * z;
  const Vector<S> w = spd_solve<S>(innovation_cov, Matrix<S>(hz), "innovation covariance").col(0);
  return -hz.dot(w);
}

/// Stability class of the error dynamics of an observable LTI model.
template <class S>
Classification classify(const SystemModel<S>& model) {
  if (!model.is_lti()) throw Error("classification needs a time-invariant model");
  if (!is_observable(model)) throw NotObservableError("model is not observable");
  const Matrix<S>& a = model.dynamics(1);
  const S lmin = eigen_magnitudes<S>(a).back();
  const S tol = S(kSpectralTolerance);
  if (lmin > S(1) + tol) return Classification::UniformlyAsymptoticallyStable;
  if (lmin < S(1) - tol) return Classification::LyapunovStableOnly;
  if (is_normal<S>(a) && lmin >= S(1)) return Classification::UniformlyAsymptoticallyStable;
  return Classification::Indeterminate;
}

/// Fits log ||Psi(k,0)|| ~ log(alpha) - beta k over an explicit window of
/// steps. `norms[i]` belongs to step `first_k + i`.
template <class S>
ExpFit<S> exponential_fit_window(const std::vector<S>& norms, std::size_t first_k) {
  using std::exp;
  using std::log;
  if (norms.size() < 2) throw Error("exponential fit needs at least two values");
  std::vector<S> ks, logs;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (!(norms[i] > S(0))) throw NumericalError("non-positive norm in exponential fit");
    ks.push_back(S(static_cast<double>(first_k + i)));
    logs.push_back(log(norms[i]));
  }
  const LineFit<S> line = fit_line<S>(ks, logs);
  return {exp(line.intercept), -line.slope, first_k, first_k + norms.size() - 1};
}

/// Exponential fit of a norm sequence indexed from k = 0, over the tail
/// half. A zero norm truncates the sequence to its nonzero prefix.
template <class S>
ExpFit<S> exponential_fit(const std::vector<S>& psi_norms) {
  std::size_t n = 0;
  while (n < psi_norms.size() && psi_norms[n] > S(0)) ++n;
  if (n < 5) throw Error("exponential fit needs at least 5 positive values");
  const std::size_t first = n / 2;
  return exponential_fit_window<S>(
      std::vector<S>(psi_norms.begin() + static_cast<std::ptrdiff_t>(first),
                     psi_norms.begin() + static_cast<std::ptrdiff_t>(n)),
      first);
}

template <class S = double>
struct GelfandRow {
  std::size_t n = 0;
  std::vector<S> roots;  // s_i(A^n)^{1/n}, descending
};

/// s_i(A^n)^{1/n} for n = 1..n_max. Powers are renormalized every step and
/// the scale is carried as a logarithm, so large spectral radii do not
/// overflow.
template <class S>
std::vector<GelfandRow<S>> gelfand_diagnostic(const Matrix<S>& a, std::size_t n_max) {
  using std::exp;
  using std::isfinite;
  using std::log;
  if (n_max == 0) throw Error("n_max must be at least 1");
  if (a.rows() != a.cols()) throw DimensionError("A must be square");
  std::vector<GelfandRow<S>> rows;
  rows.reserve(n_max);
  Matrix<S> scaled = identity<S>(a.rows());
  S log_scale(0);
  for (std::size_t n = 1; n <= n_max; ++n) {
    scaled = a * scaled;
    const S norm = scaled.cwiseAbs().maxCoeff();
    if (!(norm > S(0)) || !isfinite(norm)) {
      throw NumericalError("power sequence degenerated at n = " + std::to_string(n));
    }
    scaled /= norm;
    log_scale += log(norm);
    const Vector<S> sv = singular_values<S>(scaled);
    GelfandRow<S> row;
    row.n = n;
    const S inv_n = S(1) / S(static_cast<double>(n));
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (!(sv(i) > S(0))) {
        row.roots.push_back(S(0));
        continue;
      }
      const S r = exp((log(sv(i)) + log_scale) * inv_n);
      if (!isfinite(r)) throw NumericalError("overflow at n = " + std::to_string(n));
      row.roots.push_back(r);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Spectral data of A plus the traces along a covariance sequence P_0..P_K.
template <class S>
StabilityReport<S> analyze_stability(const SystemModel<S>& model,
                                     const std::vector<Matrix<S>>& covariances) {
  using std::sqrt;
  if (covariances.empty()) throw Error("covariance sequence is empty");
  StabilityReport<S> rep;
  if (!model.dynamics_time_varying()) {
    rep.eigenvalues_A = eigen_magnitudes<S>(model.dynamics(1));
    rep.lambda_min_A = rep.eigenvalues_A.back();
    rep.lambda_max_A = rep.eigenvalues_A.front();
    rep.uniformly_stable_hint = rep.lambda_max_A < S(1);
    if (model.is_lti() && is_observable(model)) rep.classification = classify(model);
  }

  const auto d = model.d();
  const Matrix<S>& p0 = covariances.front();
  const Vector<S> z0 = Vector<S>::Constant(d, S(1) / sqrt(S(static_cast<double>(d))));
  const S v0 = lyapunov_value<S>(p0, z0);
  rep.lyapunov_monotone = true;
  for (std::size_t k = 0; k < covariances.size(); ++k) {
    const Matrix<S>& pk = covariances[k];
    const Matrix<S> psi = psi_transition<S>(pk, p0);
    rep.psi_norm_trace.push_back(spectral_norm<S>(psi));
    rep.covariance_norm_trace.push_back(lambda_max_sym<S>(pk));
    rep.lyapunov_trace.push_back(lyapunov_value<S>(pk, Vector<S>(psi * z0)));
    if (k > 0 && rep.lyapunov_trace[k] - rep.lyapunov_trace[k - 1] > S(1e-12) * v0) {
      rep.lyapunov_monotone = false;
    }
  }
  if (rep.psi_norm_trace.size() >= 5) rep.exp_fit = exponential_fit<S>(rep.psi_norm_trace);
  return rep;
}

}  // namespace isokal
