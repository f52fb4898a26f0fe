#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "torusdm/density.hpp"
#include "torusdm/normalization.hpp"
#include "torusdm/trig.hpp"

namespace torusdm {

enum class GeneratorKind { Langevin, Standard };

/// Dense operator in the Fourier basis {e^{2 pi i k x / L}}, |k| <= m,
/// wavenumber k stored at index k + m.
struct FourierOperator {
  int n_modes = 0;  // odd, 2m+1
  double L = 1.0;
  Eigen::MatrixXcd matrix;
  std::string descriptor;

  int max_mode() const { return n_modes / 2; }
  /// Apply to a real trig polynomial (coefficients outside the mode window
  /// are dropped).
  TrigSeries apply(const TrigSeries& f) const;
};

/// Coefficient window of a trig series in the complex wavenumber layout of
/// FourierOperator (index k + m).
Eigen::VectorXcd trig_to_complex(const TrigSeries& f, int max_mode);

/// Matrix of the generator
///   ½ Δ + c (log rho)' d/dx,   c = 1-alpha (standard) or ½ (langevin),
/// assembled as diag(-½ (2 pi k / L)^2) + Toeplitz(drift) diag(i 2 pi k / L).
/// The drift's Fourier tail (top decade of the window) must stay below
/// drift_tail_tol relative to its peak; otherwise a resolution error is
/// thrown.
FourierOperator generator_matrix(const AxisDensity& rho, int n_modes,
                                 GeneratorKind kind, double alpha = 0.5,
                                 double drift_tail_tol = 1e-6);

/// Collocation matrix of the continuum normalised operator on a uniform
/// n-point grid, with quadrature weights mu_i = rho(x_i) L / n. The
/// convolution factor uses the exact periodised Gaussian, so the
/// construction is spectrally accurate.
struct ContinuumOperator {
  Eigen::MatrixXd P;            // rows sum to 1
  Eigen::VectorXd sym_scale;    // s: diag(s) P diag(s)^{-1} is symmetric
  Eigen::VectorXd quad_weights; // mu
  Eigen::VectorXd u, v;         // weights in P = diag(v) K diag(u)
  Eigen::VectorXd gcol;         // first column of the circulant kernel G
  double eps = 0.0;
  double L = 1.0;
  NormSpec norm;
  SinkhornReport sinkhorn_report;  // populated for the sinkhorn kind

  int size() const { return static_cast<int>(P.rows()); }
  Eigen::MatrixXd symmetric_form() const;
};

ContinuumOperator continuum_operator(const AxisDensity& rho, double eps,
                                     int n_grid, const NormSpec& norm,
                                     double sinkhorn_tol = 1e-13,
                                     int sinkhorn_max_iter = 400);

/// Product eigenfunction, one trig-polynomial factor per axis.
struct RefEigenfunction {
  std::vector<TrigSeries> factors;

  double eval(const Eigen::VectorXd& x) const;
  /// Evaluate at the rows of an M x d point matrix.
  Eigen::VectorXd eval_points(const Eigen::MatrixXd& X) const;
};

struct RefCluster {
  double lambda = 0.0;
  int multiplicity = 0;
  std::vector<RefEigenfunction> basis;
};

/// Reference eigendata in the generator convention (lambda >= 0, ascending),
/// with multiplicities detected by clustering at 1e-7 * max(1, lambda).
struct ReferenceEigendata {
  double L = 1.0;
  int d = 1;
  std::vector<RefCluster> clusters;
  /// Unclustered eigenvalues as computed (ascending); for error tables where
  /// the clustering tolerance would mask small spectral gaps.
  Eigen::VectorXd raw_lambda;
  // provenance
  std::string density_desc;
  std::string source_desc;
  int resolution = 0;
  double eps = 0.0;  // 0 for generator sources

  int total_count() const;
  std::vector<std::pair<double, int>> lambda_mult() const;
  /// Basis of cluster c evaluated at the rows of X (columns = basis members).
  Eigen::MatrixXd cluster_values(int c, const Eigen::MatrixXd& X) const;
  std::string to_json() const;
};

/// Eigendata of the limiting generator via the symmetric divergence form
/// (similarity by w^{1/2}, w = rho^{2-2 alpha}); shift-inverted block
/// iteration keeps the 2001-mode default fast.
ReferenceEigendata generator_reference(const AxisDensity& rho, int n_eigs,
                                       GeneratorKind kind, double alpha = 0.5,
                                       int n_modes = 2001);

/// Eigendata of the continuum finite-eps operator, converted to generator
/// convention via lambda = -ln(mu)/eps.
ReferenceEigendata continuum_reference(const AxisDensity& rho, int n_eigs,
                                       double eps, const NormSpec& norm,
                                       int n_grid = 2048);

/// Tensor product for separable d-dimensional densities: eigenvalues add,
/// eigenfunctions multiply. All axes must share the domain length.
ReferenceEigendata tensor_reference(const std::vector<ReferenceEigendata>& axes,
                                    int n_eigs);

}  // namespace torusdm
