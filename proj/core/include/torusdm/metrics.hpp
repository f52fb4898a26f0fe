#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "torusdm/reference.hpp"
#include "torusdm/spectral.hpp"

namespace torusdm {

enum class SubspaceNorm { SupGrid, WeightedL2 };

/// Distance between the spans of two vector families on a common evaluation
/// set. WeightedL2 computes the exact symmetric gap via principal angles
/// under the weighted inner product; SupGrid approximates the sup-norm
/// subspace distance (inner Chebyshev problems solved by Lawson iteration,
/// outer sup lower-bounded by direction sampling and upper-bounded via norm
/// equivalence), reporting both bounds.
struct SubspaceDistanceReport {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  SubspaceNorm norm_kind = SubspaceNorm::WeightedL2;
  int dim_a = 0;
  int dim_b = 0;
  int n_points = 0;
};

SubspaceDistanceReport subspace_distance(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, SubspaceNorm kind,
    const Eigen::VectorXd& weights = Eigen::VectorXd());

/// Per-eigenvalue error table against a reference spectrum (clusters are
/// compared member-to-member in sorted order after merge_by_reference).
struct EigenvalueErrorRow {
  int k = 0;                 // running index, counting multiplicity
  double ref_lambda = 0.0;
  int multiplicity = 0;
  bool ambiguous = false;
  double lambda = 0.0;        // computed generator estimate
  double lambda_tilde = 0.0;  // computed graph-Laplacian estimate
  double err_lambda = 0.0;
  double err_lambda_tilde = 0.0;
};

std::vector<EigenvalueErrorRow> eigenvalue_errors(
    const SpectralResult& computed,
    const std::vector<std::pair<double, int>>& reference, int k_max,
    double gap_tol = 1e-6);

/// Same table for a bare ascending generator-eigenvalue list coming from a
/// finite-eps operator (lambda_tilde is recovered via mu = e^{-eps lambda}).
std::vector<EigenvalueErrorRow> eigenvalue_errors(
    const Eigen::VectorXd& lambda_ascending, double eps,
    const std::vector<std::pair<double, int>>& reference, int k_max,
    double gap_tol = 1e-6);

/// Least-squares line through (log eps, log err); quantifies observed
/// convergence orders.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double resid_rms = 0.0;
  std::vector<std::array<double, 2>> points;  // (log10 eps, log10 err)
};

RateFit fit_rate(const std::vector<double>& eps_list,
                 const std::vector<double>& err_list);

}  // namespace torusdm
