#pragma once

// System descriptions for
//
//   x(k+1) = A_{k+1} x(k),    y(k) = H_k x(k) + v_k,    v_k ~ N(0, R_k)
//
// and the state-transition products A(k,j) = A_k A_{k-1} ... A_{j+1}.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isokal/error.hpp"
#include "isokal/linalg.hpp"

namespace isokal {

/// Smallest admissible eigenvalue of any noise covariance R_k.
inline constexpr double kDefaultSigma2Floor = 1e-15;

/// Dynamics operators. `matrices[t]` is A_{t+1} for time-varying models.
template <class S = double>
struct Dynamics {
  bool time_varying = false;
  std::vector<Matrix<S>> matrices;

  static Dynamics lti(Matrix<S> a) { return {false, {std::move(a)}}; }
  static Dynamics ltv(std::vector<Matrix<S>> seq) { return {true, std::move(seq)}; }
};

/// Observation operators. `matrices[t]` is H_t for time-varying models.
template <class S = double>
struct Observation {
  bool time_varying = false;
  std::vector<Matrix<S>> matrices;

  static Observation lti(Matrix<S> h) { return {false, {std::move(h)}}; }
  static Observation ltv(std::vector<Matrix<S>> seq) { return {true, std::move(seq)}; }
};

/// Noise covariances: isotropic R_k = sigma2 * I, or one SPD matrix per step.
template <class S = double>
struct Noise {
  std::optional<S> sigma2;
  std::vector<Matrix<S>> covariances;  // covariances[t] is R_t

  static Noise isotropic(S s2) { return {s2, {}}; }
  static Noise per_step(std::vector<Matrix<S>> seq) { return {std::nullopt, std::move(seq)}; }
};

/// Immutable, validated system description.
template <class S = double>
class SystemModel {
 public:
  using Scalar = S;

  SystemModel(Dynamics<S> dynamics, Observation<S> observation, Noise<S> noise,
              double sigma2_floor = kDefaultSigma2Floor)
      : dynamics_(std::move(dynamics)),
        observation_(std::move(observation)),
        noise_(std::move(noise)),
        sigma2_floor_(sigma2_floor) {
    validate();
  }

  static SystemModel lti(Matrix<S> a, Matrix<S> h, S sigma2) {
    return SystemModel(Dynamics<S>::lti(std::move(a)), Observation<S>::lti(std::move(h)),
                       Noise<S>::isotropic(sigma2));
  }

  Eigen::Index d() const noexcept { return d_; }
  Eigen::Index m() const noexcept { return m_; }

  bool dynamics_time_varying() const noexcept { return dynamics_.time_varying; }
  bool observation_time_varying() const noexcept { return observation_.time_varying; }
  bool noise_time_varying() const noexcept { return !noise_.sigma2.has_value(); }

  /// True when A, H and R are all time invariant.
  bool is_lti() const noexcept {
    return !dynamics_time_varying() && !observation_time_varying() && !noise_time_varying();
  }

  std::optional<S> isotropic_sigma2() const { return noise_.sigma2; }
  double sigma2_floor() const noexcept { return sigma2_floor_; }

  /// Largest k for which A(k, j) is defined; nullopt for LTI dynamics.
  std::optional<std::size_t> state_horizon() const {
    if (!dynamics_.time_varying) return std::nullopt;
    return dynamics_.matrices.size();
  }

  /// Number of observations y(0..T-1) the model supports; nullopt if
  /// unbounded.
  std::optional<std::size_t> observation_horizon() const {
    std::optional<std::size_t> t;
    auto clamp = [&t](std::size_t n) { t = t ? std::min(*t, n) : n; };
    if (dynamics_.time_varying) clamp(dynamics_.matrices.size() + 1);
    if (observation_.time_varying) clamp(observation_.matrices.size());
    if (noise_time_varying()) clamp(noise_.covariances.size());
    return t;
  }

  /// A_k, k >= 1.
  const Matrix<S>& dynamics(std::size_t k) const {
    if (k == 0) throw HorizonError("dynamics index starts at 1 (A_1 maps x(0) to x(1))");
    if (!dynamics_.time_varying) return dynamics_.matrices.front();
    if (k > dynamics_.matrices.size()) {
      throw HorizonError("A_" + std::to_string(k) + " requested but the model has " +
                         std::to_string(dynamics_.matrices.size()) + " dynamics steps");
    }
    return dynamics_.matrices[k - 1];
  }

  /// H_k, k >= 0.
  const Matrix<S>& observation(std::size_t k) const {
    if (!observation_.time_varying) return observation_.matrices.front();
    if (k >= observation_.matrices.size()) {
      throw HorizonError("H_" + std::to_string(k) + " requested but the model has " +
                         std::to_string(observation_.matrices.size()) + " observation operators");
    }
    return observation_.matrices[k];
  }

  /// R_k, k >= 0.
  Matrix<S> noise(std::size_t k) const {
    if (noise_.sigma2) return *noise_.sigma2 * identity<S>(m_);
    if (k >= noise_.covariances.size()) {
      throw HorizonError("R_" + std::to_string(k) + " requested but the model has " +
                         std::to_string(noise_.covariances.size()) + " noise covariances");
    }
    return noise_.covariances[k];
  }

  const Dynamics<S>& dynamics_spec() const noexcept { return dynamics_; }
  const Observation<S>& observation_spec() const noexcept { return observation_; }
  const Noise<S>& noise_spec() const noexcept { return noise_; }

  /// The same model in another scalar type.
  template <class T>
  SystemModel<T> cast() const {
    auto conv = [](const std::vector<Matrix<S>>& v) {
      std::vector<Matrix<T>> out;
      out.reserve(v.size());
      for (const auto& m : v) out.push_back(m.template cast<T>());
      return out;
    };
    Dynamics<T> dyn{dynamics_.time_varying, conv(dynamics_.matrices)};
    Observation<T> obs{observation_.time_varying, conv(observation_.matrices)};
    Noise<T> noise{noise_.sigma2 ? std::optional<T>(static_cast<T>(*noise_.sigma2)) : std::nullopt,
                   conv(noise_.covariances)};
    return SystemModel<T>(std::move(dyn), std::move(obs), std::move(noise), sigma2_floor_);
  }

 private:
  void validate() {
    using std::isfinite;
    auto all_finite = [](const Matrix<S>& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!isfinite(m.data()[i])) return false;
      }
      return true;
    };

    if (dynamics_.matrices.empty()) {
      throw ConfigError(dynamics_.time_varying ? "/dynamics/A_seq" : "/dynamics/A",
                        "no dynamics matrices");
    }
    if (observation_.matrices.empty()) {
      throw ConfigError(observation_.time_varying ? "/observation/H_seq" : "/observation/H",
                        "no observation matrices");
    }
    d_ = dynamics_.matrices.front().rows();
    m_ = observation_.matrices.front().rows();
    if (d_ <= 0) throw ConfigError("/d", "state dimension must be positive");
    if (m_ <= 0) throw ConfigError("/m", "observation dimension must be positive");
    if (m_ > d_) {
      throw ConfigError("/m", "observation dimension m=" + std::to_string(m_) +
                                  " exceeds state dimension d=" + std::to_string(d_));
    }

    for (std::size_t t = 0; t < dynamics_.matrices.size(); ++t) {
      const std::string path = dynamics_.time_varying ? "/dynamics/A_seq/" + std::to_string(t)
                                                      : std::string("/dynamics/A");
      const auto& a = dynamics_.matrices[t];
      if (a.rows() != d_ || a.cols() != d_) {
        throw ConfigError(path, "expected a " + std::to_string(d_) + "x" + std::to_string(d_) +
                                    " matrix");
      }
      if (!all_finite(a)) throw ConfigError(path, "non-finite entry");
      const Vector<S> sv = singular_values<S>(a);
      if (!(sv(d_ - 1) > S(1e-12) * sv(0))) {
        throw ConfigError(path, "dynamics matrix is not invertible (condition estimate > 1e12)");
      }
    }

    for (std::size_t t = 0; t < observation_.matrices.size(); ++t) {
      const std::string path = observation_.time_varying
                                   ? "/observation/H_seq/" + std::to_string(t)
                                   : std::string("/observation/H");
      const auto& h = observation_.matrices[t];
      if (h.rows() != m_ || h.cols() != d_) {
        throw ConfigError(path, "expected a " + std::to_string(m_) + "x" + std::to_string(d_) +
                                    " matrix");
      }
      if (!all_finite(h)) throw ConfigError(path, "non-finite entry");
    }

    const S floor = S(sigma2_floor_);
    if (noise_.sigma2) {
      const S s2 = *noise_.sigma2;
      if (!isfinite(s2) || !(s2 >= floor)) {
        throw ConfigError("/noise/sigma2", "noise variance must be finite and >= " +
                                               std::to_string(sigma2_floor_));
      }
    } else {
      if (noise_.covariances.empty()) throw ConfigError("/noise/R_seq", "no noise covariances");
      for (std::size_t t = 0; t < noise_.covariances.size(); ++t) {
        const std::string path = "/noise/R_seq/" + std::to_string(t);
        const auto& r = noise_.covariances[t];
        if (r.rows() != m_ || r.cols() != m_) {
          throw ConfigError(path, "expected a " + std::to_string(m_) + "x" + std::to_string(m_) +
                                      " matrix");
        }
        if (!all_finite(r)) throw ConfigError(path, "non-finite entry");
        if (relative_asymmetry<S>(r) > S(1e-12)) throw ConfigError(path, "not symmetric");
        if (!(lambda_min_sym<S>(r) >= floor)) {
          throw ConfigError(path, "not positive definite with smallest eigenvalue >= " +
                                      std::to_string(sigma2_floor_));
        }
      }
    }
  }

  Dynamics<S> dynamics_;
  Observation<S> observation_;
  Noise<S> noise_;
  double sigma2_floor_;
  Eigen::Index d_ = 0;
  Eigen::Index m_ = 0;
};

/// A(to_step, from_step).
template <class S = double>
struct TransitionMatrix {
  Matrix<S> value;
  std::size_t from_step = 0;
  std::size_t to_step = 0;
};

/// A(k, j): the ordered product A_k ... A_{j+1} for k > j, the identity for
/// k == j, and A(j, k)^{-1} for k < j. The backward case is assembled by
/// per-factor LU solves, never by inverting the product.
template <class S>
TransitionMatrix<S> transition(const SystemModel<S>& model, std::size_t k, std::size_t j) {
  const auto d = model.d();
  TransitionMatrix<S> out{identity<S>(d), j, k};
  if (k > j) {
    for (std::size_t i = j + 1; i <= k; ++i) out.value = model.dynamics(i) * out.value;
  } else if (k < j) {
    // A(j,k)^{-1} = A_{k+1}^{-1} ... A_j^{-1}
    for (std::size_t i = j; i > k; --i) {
      Eigen::PartialPivLU<Matrix<S>> lu(model.dynamics(i));
      out.value = lu.solve(out.value);
    }
  }
  return out;
}

/// H~_k = H_k A(k, 0), the operator mapping x(0) to the noiseless y(k).
template <class S>
Matrix<S> observed_evolution(const SystemModel<S>& model, std::size_t k) {
  if (auto t = model.observation_horizon(); t && k >= *t) {
    throw HorizonError("observation " + std::to_string(k) + " is beyond the model horizon of " +
                       std::to_string(*t) + " observations");
  }
  return model.observation(k) * transition(model, k, 0).value;
}

}  // namespace isokal
