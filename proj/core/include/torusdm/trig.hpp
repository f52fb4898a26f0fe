#pragma once

#include <Eigen/Core>

namespace torusdm {

/// Real trigonometric polynomial on [0, L):
///   f(x) = a0 + sum_k acos[k-1] cos(2 pi k x / L) + bsin[k-1] sin(2 pi k x / L).
struct TrigSeries {
  double L = 1.0;
  double a0 = 0.0;
  Eigen::VectorXd acos;  // k = 1..m
  Eigen::VectorXd bsin;  // k = 1..m

  int modes() const { return static_cast<int>(acos.size()); }
  double eval(double x) const;
  Eigen::VectorXd eval(const Eigen::VectorXd& xs) const;
  double deriv(double x) const;
  TrigSeries derivative() const;
  /// Antiderivative over [0, x] (includes the a0 * x ramp).
  double integral0(double x) const;
  /// Mean value over one period.
  double mean() const { return a0; }
  /// Drop trailing coefficients below rel_tol * max coefficient.
  TrigSeries truncated(double rel_tol = 1e-15) const;
  Eigen::VectorXd tabulate(int n_grid) const;

  /// L^2(dx/L) inner product via Parseval.
  static double dot(const TrigSeries& f, const TrigSeries& g);
};

/// Trigonometric interpolant of samples on the uniform grid x_j = j L / n.
TrigSeries trig_from_grid(const Eigen::VectorXd& values, double L);

/// Interpret conjugate-symmetric complex Fourier coefficients c_{-m..m}
/// (layout: index j holds wavenumber j - m) as a real series.
TrigSeries trig_from_complex(const Eigen::VectorXcd& coeffs, double L);

/// Unitary-convention DFT helpers: forward returns c_k = (1/n) sum_j f_j
/// e^{-2 pi i j k / n} for k = 0..n-1.
Eigen::VectorXcd dft_forward(const Eigen::VectorXd& values);
Eigen::VectorXcd dft_forward(const Eigen::VectorXcd& values);
Eigen::VectorXcd dft_inverse(const Eigen::VectorXcd& coeffs);

}  // namespace torusdm
