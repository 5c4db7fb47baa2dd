#pragma once

// Seeded random observable LTI systems for property tests.

#include <cmath>
#include <cstdint>

#include "isokal.hpp"

namespace isokal::support {

template <class S>
struct RandomSystem {
  SystemModel<S> model;
  Vector<S> x0;
  Vector<S> x_hat0;
  Matrix<S> P0;
};

struct SystemRanges {
  int d_min = 2;
  int d_max = 6;
  double eig_min = 0.3;  // |eigenvalue| range of A
  double eig_max = 2.5;
  double log10_sigma2_min = -2;
  double log10_sigma2_max = 0;
};

inline Matrix<double> gaussian_matrix(NormalStream& rng, Eigen::Index r, Eigen::Index c) {
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline Matrix<double> random_orthogonal(NormalStream& rng, Eigen::Index d) {
  Eigen::HouseholderQR<Matrix<double>> qr(gaussian_matrix(rng, d, d));
  return qr.householderQ() * identity<double>(d);
}

inline int uniform_int(NormalStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

// A = V diag(lambda) V^{-1} with real eigenvalues of random sign and
// V = Q (I + 0.3 G), H gaussian with m < d, R = sigma2 I, P0 = p I.
// Draws are repeated until the pair is observable.
template <class S>
RandomSystem<S> random_system(std::uint64_t seed, const SystemRanges& ranges = {}) {
  NormalStream rng(seed);
  for (;;) {
    const int d = uniform_int(rng, ranges.d_min, ranges.d_max);
    const int m = uniform_int(rng, 1, d - 1);
    Vector<double> lambda(d);
    for (int i = 0; i < d; ++i) {
      const double mag = ranges.eig_min + (ranges.eig_max - ranges.eig_min) * rng.uniform();
      lambda(i) = rng.uniform() < 0.5 ? -mag : mag;
    }
    const Matrix<double> v =
        random_orthogonal(rng, d) * (identity<double>(d) + 0.3 * gaussian_matrix(rng, d, d));
    const Matrix<double> a = v * lambda.asDiagonal() * v.inverse();
    const Matrix<double> h = gaussian_matrix(rng, m, d);
    const double sigma2 =
        std::pow(10.0, ranges.log10_sigma2_min +
                           (ranges.log10_sigma2_max - ranges.log10_sigma2_min) * rng.uniform());
    const double p0 = std::pow(10.0, -rng.uniform());

    auto model = SystemModel<S>::lti(a.cast<S>(), h.cast<S>(), S(sigma2));
    if (!is_observable(model)) continue;
    Vector<double> x0 = gaussian_matrix(rng, d, 1).col(0);
    Vector<double> guess = x0 + 0.1 * gaussian_matrix(rng, d, 1).col(0);
    return {std::move(model), x0.cast<S>(), guess.cast<S>(),
            Matrix<S>(S(p0) * identity<S>(d))};
  }
}

template <class S>
S rel_diff(const Matrix<S>& a, const Matrix<S>& b) {
  return Matrix<S>(a - b).norm() / (S(1) + Matrix<S>(b).norm());
}

}  // namespace isokal::support
