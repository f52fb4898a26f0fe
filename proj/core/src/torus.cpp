#include "torusdm/torus.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace torusdm {

TorusDomain::TorusDomain(int dim, double side) : d(dim), L(side) {
  if (d < 1) throw std::invalid_argument("TorusDomain: dimension must be >= 1");
  if (!(L > 0.0) || !std::isfinite(L))
    throw std::invalid_argument("TorusDomain: side length must be positive");
}

Eigen::VectorXd wrap(const TorusDomain& domain, const Eigen::VectorXd& raw) {
  if (raw.size() != domain.d)
    throw std::invalid_argument("wrap: point dimension mismatch");
  Eigen::VectorXd out(domain.d);
  for (int i = 0; i < domain.d; ++i) {
    const double v = raw[i];
    if (!std::isfinite(v)) throw std::invalid_argument("wrap: non-finite coordinate");
    double t = std::fmod(v, domain.L);
    if (t < 0.0) t += domain.L;
    if (t >= domain.L) t = 0.0;  // fmod rounding can land exactly on L
    out[i] = t;
  }
  return out;
}

PeriodicDisplacement displacement(const TorusDomain& domain,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) {
  if (x.size() != domain.d || y.size() != domain.d)
    throw std::invalid_argument("displacement: point dimension mismatch");
  const double L = domain.L;
  PeriodicDisplacement r;
  r.components.resize(domain.d);
  for (int i = 0; i < domain.d; ++i) {
    double t = std::fmod(y[i] - x[i], L);  // (-L, L)
    if (t <= -0.5 * L) t += L;
    if (t > 0.5 * L) t -= L;
    // representative in (-L/2, L/2]; store the boundary tie as +L/2
    if (t == -0.5 * L) t = 0.5 * L;
    r.components[i] = t;
  }
  return r;
}

double gaussian(double eps, const PeriodicDisplacement& r) {
  if (!(eps > 0.0)) throw std::invalid_argument("gaussian: eps must be positive");
  const int d = static_cast<int>(r.components.size());
  const double norm = std::pow(2.0 * M_PI * eps, -0.5 * d);
  return norm * std::exp(-r.squared_norm() / (2.0 * eps));
}

namespace detail {
double periodized_axis_sum(double x, double L, double eps, int trunc_J) {
  double s = 0.0;
  for (int j = -trunc_J; j <= trunc_J; ++j) {
    const double t = x + L * j;
    s += std::exp(-t * t / (2.0 * eps));
  }
  return s;
}
}  // namespace detail

double periodized_gaussian(const TorusDomain& domain, double eps,
                           const PeriodicDisplacement& r, int trunc_J) {
  if (!(eps > 0.0)) throw std::invalid_argument("periodized_gaussian: eps must be positive");
  if (trunc_J < 0) throw std::invalid_argument("periodized_gaussian: J must be >= 0");
  // The image sum over the box |j|_inf <= J factorises over axes.
  double prod = 1.0;
  for (int i = 0; i < domain.d; ++i)
    prod *= detail::periodized_axis_sum(r.components[i], domain.L, eps, trunc_J);
  return std::pow(2.0 * M_PI * eps, -0.5 * domain.d) * prod;
}

int choose_truncation(const TorusDomain& domain, double eps, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("choose_truncation: tol must be positive");
  if (tol >= 1.0) return 0;
  const double L = domain.L, L2e = L * L / eps;
  // Per-axis relative tail for |x| <= L/2: the omitted images |j| > J satisfy
  // (|j| - 1/2)^2 >= (J + 1/2)^2 + (|j| - J - 1)(2J + 2), giving the geometric
  // bound below.  The d-dimensional tail is bounded by d * tail * gamma^{d-1}
  // relative to the peak (2 pi eps)^{-d/2}.
  const double gamma = periodization_constants(domain, eps).gamma;
  for (int J = 0; J < 1024; ++J) {
    const double head = std::exp(-0.5 * L2e * (J + 0.5) * (J + 0.5));
    const double ratio = std::exp(-L2e * (J + 1));
    if (ratio >= 1.0) continue;
    const double axis_tail = 2.0 * head / (1.0 - ratio);
    const double total = domain.d * axis_tail * std::pow(gamma, domain.d - 1);
    if (total <= tol) return J;
  }
  throw std::runtime_error("choose_truncation: no J below 1024 satisfies tol");
}

PeriodizationConstants periodization_constants(const TorusDomain& domain,
                                               double eps, double series_tol) {
  if (!(eps > 0.0))
    throw std::invalid_argument("periodization_constants: eps must be positive");
  const double L = domain.L;
  double gamma = 1.0;
  for (int j = 1; j < 100000; ++j) {
    const double term = std::exp(-double(j) * j * L * L / (2.0 * eps));
    gamma += 2.0 * term;
    if (term < series_tol) break;
  }
  double gamma_prime = 0.0;
  const double pref = L / std::sqrt(eps);
  for (int j = 1; j < 100000; ++j) {
    const double term =
        (2.0 * j + 1.0) * pref *
        std::exp(-(2.0 * j - 1.0) * (2.0 * j - 1.0) * L * L / (8.0 * eps));
    gamma_prime += term;
    if (term < series_tol) break;
  }
  return PeriodizationConstants{gamma, gamma_prime, eps};
}

}  // namespace torusdm
