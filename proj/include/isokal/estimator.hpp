#pragma once

// Recursive minimum-variance estimation of the initial state x(0).
//
// Each observation y(k-1) = H~_{k-1} x(0) + v_{k-1} is folded in with
//
//   Sigma_{k-1} = H~_{k-1} P_{k-1} H~_{k-1}^* + R_{k-1}
//   K_k         = P_{k-1} H~_{k-1}^* Sigma_{k-1}^{-1}
//   x^_k        = x^_{k-1} + K_k (y(k-1) - H~_{k-1} x^_{k-1})
//   P_k         = (I - K_k H~_{k-1}) P_{k-1} (I - K_k H~_{k-1})^* + K_k R_{k-1} K_k^*
//   H~_k        = H_k A(k, 0)
//
// The covariance update uses the Joseph form and is symmetrized after every
// step. `batch_wls` solves the same problem in one shot from the normal
// equations and serves as an independent oracle.

#include <cstddef>
#include <string>
#include <vector>

#include "isokal/error.hpp"
#include "isokal/linalg.hpp"
#include "isokal/model.hpp"

namespace isokal {

template <class S = double>
struct EstimatorState {
  std::size_t step = 0;     // observations consumed
  Vector<S> x_hat;          // estimate of x(0)
  Matrix<S> P;              // error covariance
  Matrix<S> H_tilde_next;   // H~_step; empty once the model horizon is exhausted
  Matrix<S> transition;     // A(step, 0)
};

/// K_k together with the innovation covariance Sigma_{k-1} it was solved
/// against.
template <class S = double>
struct GainMatrix {
  Matrix<S> value;
  Matrix<S> innovation_cov;
};

namespace detail {

template <class S>
void check_covariance(const Matrix<S>& p, Eigen::Index d, const std::string& what) {
  if (p.rows() != d || p.cols() != d) {
    throw DimensionError(what + " must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (relative_asymmetry<S>(p) > S(1e-12)) throw NumericalError(what + " is not symmetric");
  if (!(lambda_min_sym<S>(p) > S(0))) {
    throw NumericalError(what + " is not strictly positive definite");
  }
}

template <class S>
Matrix<S> next_observer(const SystemModel<S>& model, std::size_t k, const Matrix<S>& transition) {
  if (auto t = model.observation_horizon(); t && k >= *t) return Matrix<S>(0, model.d());
  return model.observation(k) * transition;
}

}  // namespace detail

template <class S>
EstimatorState<S> init(const SystemModel<S>& model, const Vector<S>& x_hat0, const Matrix<S>& P0) {
  const auto d = model.d();
  if (x_hat0.size() != d) {
    throw DimensionError("initial guess has length " + std::to_string(x_hat0.size()) +
                         " but the state dimension is " + std::to_string(d));
  }
  detail::check_covariance<S>(P0, d, "P0");
  EstimatorState<S> s;
  s.step = 0;
  s.x_hat = x_hat0;
  s.P = symmetrized<S>(P0);
  s.transition = identity<S>(d);
  s.H_tilde_next = detail::next_observer(model, 0, s.transition);
  return s;
}

/// K_k for the transition out of `state`, solved through a Cholesky factor
/// of Sigma_{k-1}.
template <class S>
GainMatrix<S> gain(const EstimatorState<S>& state, const Matrix<S>& R_prev) {
  const Matrix<S>& h = state.H_tilde_next;
  if (h.rows() == 0) {
    throw HorizonError("no observer available after step " + std::to_string(state.step));
  }
  if (R_prev.rows() != h.rows() || R_prev.cols() != h.rows()) {
    throw DimensionError("noise covariance must be " + std::to_string(h.rows()) + "x" +
                         std::to_string(h.rows()));
  }
  GainMatrix<S> g;
  const Matrix<S> hp = h * state.P;  // H~ P  (m x d)
  g.innovation_cov = symmetrized<S>(Matrix<S>(hp * h.adjoint() + R_prev));
  const auto llt = spd_factor<S>(g.innovation_cov, "innovation covariance");
  // Sigma K^* = H~ P  (P, Sigma symmetric)
  g.value = llt.solve(hp).adjoint();
  return g;
}

/// (I - K H~) P, the short covariance update. Equal to the Joseph form in
/// exact arithmetic.
template <class S>
Matrix<S> simplified_covariance(const Matrix<S>& P_prev, const Matrix<S>& K,
                                const Matrix<S>& H_tilde) {
  return (identity<S>(P_prev.rows()) - K * H_tilde) * P_prev;
}

/// (I - K H~) P (I - K H~)^* + K R K^*, symmetrized.
template <class S>
Matrix<S> joseph_covariance(const Matrix<S>& P_prev, const Matrix<S>& K, const Matrix<S>& H_tilde,
                            const Matrix<S>& R) {
  const Matrix<S> psi = identity<S>(P_prev.rows()) - K * H_tilde;
  return symmetrized<S>(Matrix<S>(psi * P_prev * psi.adjoint() + K * R * K.adjoint()));
}

/// Consumes y(k-1), with k-1 == state.step.
template <class S>
EstimatorState<S> step(const EstimatorState<S>& state, const Vector<S>& y_prev,
                       const Matrix<S>& R_prev, const SystemModel<S>& model) {
  const Matrix<S>& h = state.H_tilde_next;
  if (h.rows() == 0) {
    throw HorizonError("observation " + std::to_string(state.step) +
                       " is beyond the model horizon");
  }
  if (y_prev.size() != h.rows()) {
    throw DimensionError("observation " + std::to_string(state.step) + " has length " +
                         std::to_string(y_prev.size()) + ", expected " +
                         std::to_string(h.rows()));
  }
  const GainMatrix<S> g = gain(state, R_prev);
  const Matrix<S>& K = g.value;

  EstimatorState<S> next;
  next.step = state.step + 1;
  next.x_hat = state.x_hat + K * (y_prev - h * state.x_hat);
  next.P = joseph_covariance<S>(state.P, K, h, R_prev);

#if !defined(NDEBUG) || defined(ISOKAL_VERIFY_COVARIANCE)
  {
    const Matrix<S> short_form = simplified_covariance<S>(state.P, K, h);
    const S scale = spectral_norm<S>(state.P);
    if (spectral_norm<S>(Matrix<S>(short_form - next.P)) > S(1e-8) * scale) {
      throw NumericalError("Joseph and simplified covariance updates disagree at step " +
                           std::to_string(next.step));
    }
  }
#endif

  if (auto hz = model.state_horizon(); hz && next.step > *hz) {
    next.transition = Matrix<S>(0, model.d());
    next.H_tilde_next = Matrix<S>(0, model.d());
  } else {
    next.transition = model.dynamics(next.step) * state.transition;
    next.H_tilde_next = detail::next_observer(model, next.step, next.transition);
  }
  return next;
}

/// Folds `step` over the observations; element k of the result is the state
/// after y(0..k-1).
template <class S>
std::vector<EstimatorState<S>> run(const SystemModel<S>& model, const Vector<S>& x_hat0,
                                   const Matrix<S>& P0, const std::vector<Vector<S>>& observations) {
  std::vector<EstimatorState<S>> states;
  states.reserve(observations.size() + 1);
  states.push_back(init(model, x_hat0, P0));
  for (std::size_t t = 0; t < observations.size(); ++t) {
    states.push_back(step(states.back(), observations[t], model.noise(t), model));
  }
  return states;
}

/// P_0 .. P_K. The covariance sequence does not depend on the data.
template <class S>
std::vector<Matrix<S>> propagate_covariance(const SystemModel<S>& model, const Matrix<S>& P0,
                                            std::size_t K) {
  const std::vector<Vector<S>> zeros(K, Vector<S>::Zero(model.m()));
  const auto states = run(model, Vector<S>::Zero(model.d()).eval(), P0, zeros);
  std::vector<Matrix<S>> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.P);
  return out;
}

/// Minimizers of
///   (x - x^_0)^* P0^{-1} (x - x^_0) + sum_{j<k} (y(j) - H~_j x)^* R_j^{-1} (y(j) - H~_j x)
/// for every k = 0..N, from the normal equations
///   (P0^{-1} + O(k,0)) x = P0^{-1} x^_0 + sum_{j<k} H~_j^* R_j^{-1} y(j).
template <class S>
std::vector<Vector<S>> batch_wls_path(const SystemModel<S>& model, const Vector<S>& x_hat0,
                                      const Matrix<S>& P0,
                                      const std::vector<Vector<S>>& observations) {
  const auto d = model.d();
  if (x_hat0.size() != d) throw DimensionError("initial guess has the wrong length");
  detail::check_covariance<S>(P0, d, "P0");
  if (auto t = model.observation_horizon(); t && observations.size() > *t) {
    throw HorizonError(std::to_string(observations.size()) +
                       " observations exceed the model horizon of " + std::to_string(*t));
  }

  Matrix<S> normal = spd_inverse<S>(P0, "P0");
  Vector<S> rhs = normal * x_hat0;
  std::vector<Vector<S>> path;
  path.reserve(observations.size() + 1);
  path.push_back(x_hat0);

  Matrix<S> evolution = identity<S>(d);  // A(j, 0)
  for (std::size_t j = 0; j < observations.size(); ++j) {
    if (observations[j].size() != model.m()) {
      throw DimensionError("observation " + std::to_string(j) + " has the wrong length");
    }
    if (j > 0) evolution = model.dynamics(j) * evolution;
    const Matrix<S> h = model.observation(j) * evolution;
    const auto r = spd_factor<S>(model.noise(j), "R_" + std::to_string(j));
    const Matrix<S> rinv_h = r.solve(h);
    normal += h.adjoint() * rinv_h;
    normal = symmetrized<S>(normal);
    rhs += rinv_h.adjoint() * observations[j];
    path.push_back(spd_factor<S>(normal, "normal matrix").solve(rhs));
  }
  return path;
}

template <class S>
Vector<S> batch_wls(const SystemModel<S>& model, const Vector<S>& x_hat0, const Matrix<S>& P0,
                    const std::vector<Vector<S>>& observations) {
  return batch_wls_path(model, x_hat0, P0, observations).back();
}

}  // namespace isokal
