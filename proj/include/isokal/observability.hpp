#pragma once

// Observability Gramians
//
//   O(k+L, k) = sum_{j=k}^{k+L-1} A(j,k)^* H_j^* R_j^{-1} H_j A(j,k)
//
// uniform-observability checks, and the growth of lambda_min(O(k,0)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "isokal/error.hpp"
#include "isokal/linalg.hpp"
#include "isokal/model.hpp"

namespace isokal {

enum class Verdict { Observable, NotObservableUpTo };

enum class GrowthClass { Unbounded, BoundedLimit, Undetermined };

inline const char* to_string(Verdict v) {
  return v == Verdict::Observable ? "Observable" : "NotObservableUpTo";
}

inline const char* to_string(GrowthClass g) {
  switch (g) {
    case GrowthClass::Unbounded: return "Unbounded";
    case GrowthClass::BoundedLimit: return "BoundedLimit";
    case GrowthClass::Undetermined: return "Undetermined";
  }
  return "Undetermined";
}

/// Band around |lambda| = 1 inside which growth and stability are not
/// classified.
inline constexpr double kSpectralTolerance = 1e-9;

template <class S = double>
struct ObservabilityReport {
  Verdict verdict = Verdict::NotObservableUpTo;
  std::optional<std::size_t> horizon_L;
  std::optional<S> rho;
  std::size_t checked_up_to = 0;        // L_max that was searched
  std::vector<Matrix<S>> gramians;      // O(k,0), k = 1..
  std::vector<S> lambda_min_trace;      // lambda_min(O(k,0)), k = 1..
  // For time-varying models only the windows inside the data are verified.
  std::optional<std::size_t> certified_horizon;
  GrowthClass growth_class = GrowthClass::Undetermined;
  std::optional<S> growth_limit;
  std::optional<LineFit<S>> beta_fit;
};

template <class S = double>
struct GrowthReport {
  GrowthClass growth_class = GrowthClass::Undetermined;
  std::vector<S> lambda_min_trace;  // lambda_min(O(k,0)), k = 1..K
  std::optional<S> limit;           // BoundedLimit: value at K
  bool converged = false;           // BoundedLimit: last increment below 1e-9 relative
  std::optional<LineFit<S>> beta_fit;  // Unbounded: log lambda_min ~ slope*k + intercept
};

/// O(k0+L, k0). L = 0 gives the zero matrix.
template <class S>
Matrix<S> gramian(const SystemModel<S>& model, std::size_t k0, std::size_t L) {
  const auto d = model.d();
  Matrix<S> g = Matrix<S>::Zero(d, d);
  if (L == 0) return g;
  if (auto t = model.observation_horizon(); t && k0 + L > *t) {
    throw HorizonError("Gramian window [" + std::to_string(k0) + ", " + std::to_string(k0 + L) +
                       ") exceeds the model horizon of " + std::to_string(*t));
  }
  Matrix<S> evolution = identity<S>(d);  // A(j, k0)
  for (std::size_t j = k0; j < k0 + L; ++j) {
    if (j > k0) evolution = model.dynamics(j) * evolution;
    const Matrix<S> h = model.observation(j) * evolution;
    const Matrix<S> rinv_h = spd_solve<S>(model.noise(j), h, "R_" + std::to_string(j));
    g += h.adjoint() * rinv_h;
    g = symmetrized<S>(g);
  }
  return g;
}

namespace detail {

/// Eigenvalues below this are treated as zero when deciding rank.
template <class S>
S rank_floor(const Matrix<S>& g) {
  const S top = g.cwiseAbs().maxCoeff();
  return S(1000) * Eigen::NumTraits<S>::epsilon() * top;
}

/// O(k,0) for k = 1..K, accumulated incrementally.
template <class S>
std::vector<Matrix<S>> gramian_sequence(const SystemModel<S>& model, std::size_t K) {
  const auto d = model.d();
  std::vector<Matrix<S>> out;
  out.reserve(K);
  Matrix<S> g = Matrix<S>::Zero(d, d);
  Matrix<S> evolution = identity<S>(d);
  for (std::size_t j = 0; j < K; ++j) {
    if (j > 0) evolution = model.dynamics(j) * evolution;
    const Matrix<S> h = model.observation(j) * evolution;
    g += h.adjoint() * spd_solve<S>(model.noise(j), h, "R_" + std::to_string(j));
    g = symmetrized<S>(g);
    out.push_back(g);
  }
  return out;
}

}  // namespace detail

/// Searches the smallest window L <= L_max with O(k+L,k) >= rho_tol * I.
///
/// LTI models only need k = 0. Time-varying models are checked on every
/// window that fits inside the model's data; the result certifies that
/// finite horizon and nothing beyond it.
template <class S>
ObservabilityReport<S> check_observability(const SystemModel<S>& model, std::size_t L_max,
                                           S rho_tol) {
  if (L_max == 0) throw Error("L_max must be at least 1");
  ObservabilityReport<S> report;
  report.checked_up_to = L_max;

  const auto horizon = model.observation_horizon();
  const std::size_t K = horizon ? std::min(L_max, *horizon) : L_max;
  report.gramians = detail::gramian_sequence(model, K);
  for (const auto& g : report.gramians) report.lambda_min_trace.push_back(lambda_min_sym<S>(g));

  auto passes = [&](const Matrix<S>& g, S lmin) {
    return lmin >= rho_tol && lmin > detail::rank_floor<S>(g);
  };

  if (!horizon) {
    for (std::size_t L = 1; L <= K; ++L) {
      const S lmin = report.lambda_min_trace[L - 1];
      if (passes(report.gramians[L - 1], lmin)) {
        report.verdict = Verdict::Observable;
        report.horizon_L = L;
        report.rho = lmin;
        break;
      }
    }
    return report;
  }

  report.certified_horizon = *horizon;
  for (std::size_t L = 1; L <= K; ++L) {
    bool ok = true;
    S worst = std::numeric_limits<S>::infinity();
    for (std::size_t k0 = 0; k0 + L <= *horizon; ++k0) {
      const Matrix<S> g = k0 == 0 ? report.gramians[L - 1] : gramian(model, k0, L);
      const S lmin = lambda_min_sym<S>(g);
      worst = std::min(worst, lmin);
      if (!passes(g, lmin)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      report.verdict = Verdict::Observable;
      report.horizon_L = L;
      report.rho = worst;
      break;
    }
  }
  return report;
}

/// True when O(d,0) is numerically positive definite (rank test, LTI).
template <class S>
bool is_observable(const SystemModel<S>& model) {
  const auto L = static_cast<std::size_t>(model.d());
  return check_observability(model, L, S(0)).verdict == Verdict::Observable;
}

/// lambda_min(O(k,0)) for k = 1..K and its asymptotic class, decided from
/// the smallest eigenvalue modulus of A: growth is unbounded above 1 and
/// converges below 1. The band |lambda_min(A) - 1| <= 1e-9 is left
/// undetermined.
template <class S>
GrowthReport<S> lambda_min_asymptotics(const SystemModel<S>& model, std::size_t K) {
  using std::abs;
  using std::log;
  if (!model.is_lti()) throw Error("lambda_min asymptotics need a time-invariant model");
  if (K < 2) throw Error("K must be at least 2");
  if (!is_observable(model)) throw NotObservableError("model is not observable");

  GrowthReport<S> out;
  for (const auto& g : detail::gramian_sequence(model, K)) {
    out.lambda_min_trace.push_back(lambda_min_sym<S>(g));
  }

  const S lambda_min_a = eigen_magnitudes<S>(model.dynamics(1)).back();
  const S tol = S(kSpectralTolerance);
  if (lambda_min_a > S(1) + tol) {
    out.growth_class = GrowthClass::Unbounded;
    std::vector<S> ks, logs;
    for (std::size_t k = K / 2 + 1; k <= K; ++k) {
      const S v = out.lambda_min_trace[k - 1];
      if (v > S(0)) {
        ks.push_back(S(static_cast<double>(k)));
        logs.push_back(log(v));
      }
    }
    if (ks.size() >= 2) out.beta_fit = fit_line<S>(ks, logs);
  } else if (lambda_min_a < S(1) - tol) {
    out.growth_class = GrowthClass::BoundedLimit;
    const S last = out.lambda_min_trace[K - 1];
    const S prev = out.lambda_min_trace[K - 2];
    out.limit = last;
    out.converged = abs(last - prev) <= S(1e-9) * abs(last);
  }
  return out;
}

}  // namespace isokal
