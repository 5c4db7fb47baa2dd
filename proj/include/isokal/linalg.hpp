#pragma once

// Dense linear-algebra helpers shared by every module. Backed by Eigen; the
// functions here fix the conventions the rest of the library relies on:
// eigenvalues sorted descending, spectral norm for matrices, SPD solves that
// throw instead of falling back to a pseudo-inverse.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isokal/error.hpp"
#include "isokal/scalar.hpp"

namespace isokal {

template <class S = double>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S = double>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
Matrix<S> identity(Eigen::Index n) {
  return Matrix<S>::Identity(n, n);
}

template <class S>
Matrix<S> symmetrized(const Matrix<S>& m) {
  return (m + m.adjoint()) / S(2);
}

/// max |M - M^T| relative to max |M| (0 for the zero matrix).
template <class S>
S relative_asymmetry(const Matrix<S>& m) {
  const S scale = m.cwiseAbs().maxCoeff();
  if (scale == S(0)) return S(0);
  return (m - m.adjoint()).cwiseAbs().maxCoeff() / scale;
}

/// Eigenvalues of the symmetric part of `m`, sorted descending.
template <class S>
Vector<S> sym_eigenvalues(const Matrix<S>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix<S>> solver(symmetrized<S>(m), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  Vector<S> ev = solver.eigenvalues();  // ascending
  return ev.reverse();
}

template <class S>
S lambda_min_sym(const Matrix<S>& m) {
  return sym_eigenvalues<S>(m).minCoeff();
}

template <class S>
S lambda_max_sym(const Matrix<S>& m) {
  return sym_eigenvalues<S>(m).maxCoeff();
}

/// Singular values, descending.
template <class S>
Vector<S> singular_values(const Matrix<S>& m) {
  Eigen::JacobiSVD<Matrix<S>> svd(m);
  return svd.singularValues();
}

/// Spectral norm (largest singular value).
template <class S>
S spectral_norm(const Matrix<S>& m) {
  if (m.size() == 0) return S(0);
  return singular_values<S>(m)(0);
}

/// Magnitudes of the (possibly complex) eigenvalues of a general square
/// matrix, sorted descending. Hessenberg reduction + shifted QR (Eigen's
/// real Schur solver).
template <class S>
std::vector<S> eigen_magnitudes(const Matrix<S>& a) {
  using std::abs;
  Eigen::EigenSolver<Matrix<S>> solver(a, false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("general eigensolver did not converge");
  }
  std::vector<S> mags;
  mags.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const auto& z = solver.eigenvalues()(i);
    using std::hypot;
    mags.push_back(hypot(z.real(), z.imag()));
  }
  std::sort(mags.begin(), mags.end(), std::greater<S>());
  return mags;
}

/// True when ||A^T A - A A^T|| <= tol * ||A||^2 (Frobenius norms).
template <class S>
bool is_normal(const Matrix<S>& a, S tol = S(1e-12)) {
  const S norm = a.norm();
  const Matrix<S> commutator = a.adjoint() * a - a * a.adjoint();
  return commutator.norm() <= tol * norm * norm;
}

/// Cholesky factorization that throws when the input is not numerically SPD.
template <class S>
Eigen::LLT<Matrix<S>> spd_factor(const Matrix<S>& m, const std::string& what) {
  Eigen::LLT<Matrix<S>> llt(symmetrized<S>(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(what + " is not numerically positive definite");
  }
  // Eigen's LLT accepts some semi-definite inputs with a zero pivot.
  const auto diag = llt.matrixLLT().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > S(0))) {
      throw NumericalError(what + " is not numerically positive definite");
    }
  }
  return llt;
}

/// Solves M X = B for SPD M.
template <class S>
Matrix<S> spd_solve(const Matrix<S>& m, const Matrix<S>& b, const std::string& what = "matrix") {
  return spd_factor<S>(m, what).solve(b);
}

/// Inverse of an SPD matrix through its Cholesky factor, symmetrized.
template <class S>
Matrix<S> spd_inverse(const Matrix<S>& m, const std::string& what = "matrix") {
  const auto llt = spd_factor<S>(m, what);
  return symmetrized<S>(llt.solve(identity<S>(m.rows())));
}

/// Ordinary least-squares line fit y = slope * x + intercept.
template <class S>
struct LineFit {
  S slope{0};
  S intercept{0};
};

template <class S>
LineFit<S> fit_line(const std::vector<S>& x, const std::vector<S>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DimensionError("line fit needs at least two paired points");
  }
  const S n = S(static_cast<double>(x.size()));
  S mx(0), my(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  S sxx(0), sxy(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == S(0)) throw NumericalError("line fit with coincident abscissae");
  LineFit<S> fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace isokal
