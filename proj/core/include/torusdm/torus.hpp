#pragma once

#include <Eigen/Core>

namespace torusdm {

/// Flat hypertorus (R/LZ)^d.
struct TorusDomain {
  int d;
  double L;

  TorusDomain(int dim, double side);
};

/// Canonical representative of y - x mod L, each component in [-L/2, L/2].
/// Boundary ties (|c| == L/2) are stored as +L/2.
struct PeriodicDisplacement {
  Eigen::VectorXd components;

  double squared_norm() const { return components.squaredNorm(); }
};

/// Constants controlling how far the periodised kernel deviates from the
/// plain Gaussian: gamma = sum_j exp(-j^2 L^2 / 2 eps) and
/// gamma' = sum_{j>=1} (2j+1) L eps^{-1/2} exp(-(2j-1)^2 L^2 / 8 eps).
/// Both are nondecreasing in eps; gamma >= 1.
struct PeriodizationConstants {
  double gamma;
  double gamma_prime;
  double eps;
};

/// Reduce raw coordinates into [0, L)^d. Throws std::invalid_argument on
/// non-finite input.
Eigen::VectorXd wrap(const TorusDomain& domain, const Eigen::VectorXd& raw);

PeriodicDisplacement displacement(const TorusDomain& domain,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y);

/// Plain Gaussian kernel (2 pi eps)^{-d/2} exp(-|r|^2 / 2 eps).
double gaussian(double eps, const PeriodicDisplacement& r);

/// Periodised Gaussian: sum of gaussian(eps, r + L j) over integer image
/// vectors with |j|_inf <= J. Monotone nondecreasing in J; equals the plain
/// Gaussian at J = 0.
double periodized_gaussian(const TorusDomain& domain, double eps,
                           const PeriodicDisplacement& r, int trunc_J);

/// Smallest J whose omitted image tail is provably below
/// tol * (2 pi eps)^{-d/2} on [-L/2, L/2]^d (Gaussian tail bound per axis).
/// tol >= 1 returns 0.
int choose_truncation(const TorusDomain& domain, double eps, double tol);

/// Default relative truncation tolerance for kernel assembly.
inline constexpr double kKernelTruncationTol = 1e-15;

PeriodizationConstants periodization_constants(const TorusDomain& domain,
                                               double eps,
                                               double series_tol = 1e-18);

namespace detail {
// One axis of the periodised Gaussian without the (2 pi eps)^{-1/2} factor.
double periodized_axis_sum(double x, double L, double eps, int trunc_J);
}  // namespace detail

}  // namespace torusdm
