// Estimates the initial state of the 2-state reference system from 20 noisy
// observations and prints the estimate next to the truth.

#include <iostream>

#include "isokal.hpp"

int main() {
  using isokal::Matrix;
  using isokal::Vector;

  Matrix<double> a(2, 2);
  a << 1.0, -0.5,
       -0.5, 1.0;
  Matrix<double> h(1, 2);
  h << 0.0, 1.0;
  const auto model = isokal::SystemModel<double>::lti(a, h, 1e-6);

  Vector<double> x0(2);
  x0 << 0.83053274, 0.35472554;
  Vector<double> guess(2);
  guess << 0.99065169, 0.19889222;
  const Matrix<double> p0 = 1e-2 * isokal::identity<double>(2);

  const auto y = isokal::simulate(model, x0, 20, /*seed=*/7);
  const auto states = isokal::run(model, guess, p0, y);
  const auto& last = states.back();

  std::cout << "truth    " << x0.transpose() << "\n"
            << "estimate " << last.x_hat.transpose() << "\n"
            << "trace(P) " << last.P.trace() << "\n"
            << "batch    " << isokal::batch_wls(model, guess, p0, y).transpose() << "\n";
}
