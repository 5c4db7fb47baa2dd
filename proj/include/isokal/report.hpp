#pragma once

// JSON serialization of the analysis reports.

#include <vector>

#include "json.hpp"

#include "isokal/observability.hpp"
#include "isokal/stability.hpp"

namespace isokal {

namespace detail {

template <class S>
nlohmann::json doubles(const std::vector<S>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& x : v) out.push_back(to_double(x));
  return out;
}

}  // namespace detail

/// Keys: verdict, L, rho, lambda_min_trace, growth_class, growth_limit,
/// beta_fit, certified_horizon. Absent values are null.
template <class S>
nlohmann::json to_json(const ObservabilityReport<S>& r) {
  nlohmann::json j;
  j["verdict"] = to_string(r.verdict);
  j["L"] = r.horizon_L ? nlohmann::json(*r.horizon_L) : nlohmann::json(nullptr);
  j["rho"] = r.rho ? nlohmann::json(to_double(*r.rho)) : nlohmann::json(nullptr);
  j["checked_up_to"] = r.checked_up_to;
  j["lambda_min_trace"] = detail::doubles(r.lambda_min_trace);
  j["growth_class"] = to_string(r.growth_class);
  j["growth_limit"] = r.growth_limit ? nlohmann::json(to_double(*r.growth_limit)) : nlohmann::json(nullptr);
  j["beta_fit"] = r.beta_fit ? nlohmann::json(to_double(r.beta_fit->slope)) : nlohmann::json(nullptr);
  j["certified_horizon"] =
      r.certified_horizon ? nlohmann::json(*r.certified_horizon) : nlohmann::json(nullptr);
  return j;
}

/// Keys: eigs_abs, classification, alpha, beta, fit_window, lyapunov_monotone,
/// lyapunov_trace, p_norm_trace, psi_norm_trace, uniformly_stable_hint.
template <class S>
nlohmann::json to_json(const StabilityReport<S>& r) {
  nlohmann::json j;
  j["eigs_abs"] = detail::doubles(r.eigenvalues_A);
  j["lambda_min_A"] = r.eigenvalues_A.empty() ? nlohmann::json(nullptr) : nlohmann::json(to_double(r.lambda_min_A));
  j["lambda_max_A"] = r.eigenvalues_A.empty() ? nlohmann::json(nullptr) : nlohmann::json(to_double(r.lambda_max_A));
  j["classification"] =
      r.classification ? nlohmann::json(to_string(*r.classification)) : nlohmann::json(nullptr);
  j["uniformly_stable_hint"] = r.uniformly_stable_hint;
  if (r.exp_fit) {
    j["alpha"] = to_double(r.exp_fit->alpha);
    j["beta"] = to_double(r.exp_fit->beta);
    j["fit_window"] = {r.exp_fit->first_k, r.exp_fit->last_k};
  } else {
    j["alpha"] = nullptr;
    j["beta"] = nullptr;
    j["fit_window"] = nullptr;
  }
  j["lyapunov_monotone"] = r.lyapunov_monotone;
  j["lyapunov_trace"] = detail::doubles(r.lyapunov_trace);
  j["p_norm_trace"] = detail::doubles(r.covariance_norm_trace);
  j["psi_norm_trace"] = detail::doubles(r.psi_norm_trace);
  return j;
}

/// Observability and stability keys merged into one object.
template <class S>
nlohmann::json analysis_json(const ObservabilityReport<S>& obs, const StabilityReport<S>& stab) {
  nlohmann::json j = to_json(obs);
  j.update(to_json(stab));
  return j;
}

}  // namespace isokal
