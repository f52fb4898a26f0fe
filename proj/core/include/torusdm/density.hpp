#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "torusdm/torus.hpp"
#include "torusdm/trig.hpp"

namespace torusdm {

enum class DensityKind { Uniform, CosineLacunary1D, SeparableExp, Tabulated1D };

/// One axis of a product density on [0, L). Evaluation, log-derivative and
/// CDF are exact (closed form or spectrally interpolated); the quantile is
/// found by bisection to 1e-12 in x inside a precomputed bracket table.
class AxisDensity {
 public:
  static AxisDensity uniform(double L);
  /// rho(x) = (1/L) (1 + (1-b^-p)/2 * sum_j b^{-pj} cos(b^j 2 pi x / L)),
  /// truncated at the first j with b^{-pj} < trunc_tol.
  static AxisDensity cosine_lacunary(double L, double p, double b,
                                     double trunc_tol = 1e-14);
  /// rho(x) = exp(f(x)) / Z with f a trig polynomial.
  static AxisDensity exp_of(const TrigSeries& f, int quad_points = 1024);
  /// Trigonometric interpolation of tabulated values (normalised to mass 1).
  static AxisDensity tabulated(double L, const Eigen::VectorXd& values);

  double length() const { return L_; }
  double eval(double x) const;
  double dlog(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;
  /// Unnormalised form of the defining formula (for quadrature checks).
  double eval_unnormalized(double x) const;
  double normalization() const { return Z_; }

 private:
  enum class Kind { Uniform, Lacunary, Exp, Series } kind_;
  double L_ = 1.0;
  double Z_ = 1.0;  // integral of the unnormalised formula over [0, L)
  // lacunary terms
  double lac_amp_ = 0.0;
  std::vector<double> lac_q_;     // b^{-pj}
  std::vector<double> lac_om_;    // 2 pi b^j / L
  // exp kind
  TrigSeries f_;
  // series kind (also caches the exp-kind CDF interpolant)
  TrigSeries rho_series_;
  bool has_series_ = false;
  // quantile bracket table
  Eigen::VectorXd cdf_table_;
  void build_table();
  friend class DensityModel;
};

/// i.i.d. points from a density on the torus, with the seed that produced
/// them. Coordinates lie in [0, L).
struct Sample {
  TorusDomain domain;
  Eigen::MatrixXd points;  // M x d
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(points.rows()); }
};

/// Expected number of sample points within one kernel bandwidth.
inline double effective_sample_size(int M, double eps, int d) {
  return M * std::pow(eps, 0.5 * d);
}

/// Product density on the hypertorus. All supported kinds factor over axes,
/// so sampling is per-axis inverse-CDF.
class DensityModel {
 public:
  static DensityModel uniform(const TorusDomain& domain);
  static DensityModel cosine_lacunary(double L, double p, double b,
                                      double trunc_tol = 1e-14);
  static DensityModel separable_exp(const TorusDomain& domain,
                                    std::vector<TrigSeries> f_axes);
  static DensityModel tabulated(double L, const Eigen::VectorXd& values);

  /// rho(x) = 1 + (1-3^-2.2)/2 sum 3^{-2.2 j} cos(3^j 2 pi x) on R/Z.
  static DensityModel figure1();
  /// rho(x,y,z) ~ exp(cos 4 pi x + f(y) + f(z)), f = 0.4 cos 2 pi x
  /// + 0.12 sin 4 pi x, on (R/Z)^3.
  static DensityModel figure2();

  const TorusDomain& domain() const { return domain_; }
  DensityKind kind() const { return kind_; }
  int dim() const { return domain_.d; }
  const AxisDensity& axis(int i) const { return axes_.at(i); }

  double eval(const Eigen::VectorXd& x) const;
  Eigen::VectorXd log_gradient(const Eigen::VectorXd& x) const;
  Sample sample(int M, std::uint64_t seed) const;
  /// Quadrature of the unnormalised defining formula (product over axes).
  double normalization_constant(int quad_points = 256) const;

  std::string describe() const;

 private:
  DensityModel(TorusDomain domain, DensityKind kind, std::vector<AxisDensity> axes)
      : domain_(domain), kind_(kind), axes_(std::move(axes)) {}
  TorusDomain domain_;
  DensityKind kind_;
  std::vector<AxisDensity> axes_;
};

}  // namespace torusdm
