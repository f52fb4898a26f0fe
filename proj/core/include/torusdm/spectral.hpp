#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "torusdm/normalization.hpp"

namespace torusdm {

/// Top-k eigenpairs of a symmetric operator. Small problems use a dense
/// solve; larger ones run block subspace iteration with Rayleigh-Ritz, which
/// is effective here because the normalised kernel operators have rapidly
/// decaying spectra.
struct TopkOptions {
  int block = 0;              // 0: auto (max(2k+8, k+12))
  int max_iter = 500;
  double tol = 1e-12;         // Ritz residual relative to the largest |theta|
  double shift = 0.0;         // optional spectral shift of the iterated operator
  int dense_threshold = 1500;
  std::uint64_t seed = 0x5eedULL;
};

struct TopkResult {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns
  int iterations = 0;
  bool converged = true;
};

using BlockOp = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

TopkResult symmetric_topk(const BlockOp& apply, Eigen::Index n, int k,
                          const TopkOptions& opts = {});
TopkResult symmetric_topk(const Eigen::MatrixXd& S, int k,
                          const TopkOptions& opts = {});

/// Eigendata of a normalised operator: semigroup eigenvalues mu (descending),
/// generator estimates lambda = -ln(mu)/eps, graph-Laplacian estimates
/// lambda_tilde = (1-mu)/eps, and eigenvectors on the sample points in
/// P-coordinates, unit-normalised in the inner product
/// <f,g> = (1/M) sum_i f_i g_i (u_i/v_i) where P is self-adjoint.
struct SpectralResult {
  double eps = 0.0;
  WeightKind kind = WeightKind::Sinkhorn;
  double alpha = 0.0;
  Eigen::VectorXd mu;
  Eigen::VectorXd lambda;        // +inf sentinel where mu <= 0
  Eigen::VectorXd lambda_tilde;
  std::vector<bool> nonpositive_mu;
  Eigen::MatrixXd vectors;  // M x k
  Eigen::VectorXd ip_weights;  // u/v

  int count() const { return static_cast<int>(mu.size()); }
  void write_csv(std::ostream& os) const;  // columns: k,mu,lambda,lambda_tilde
  std::string to_json(bool with_vectors = false) const;
};

SpectralResult eigensolve(const NormalizedOperator& op, int k,
                          const TopkOptions& opts = {});

/// lambda = -ln(mu)/eps; mu <= 0 yields +infinity and sets *flagged.
double to_generator(double mu, double eps, bool* flagged = nullptr);
/// lambda_tilde = (1 - mu)/eps.
double to_graph_laplacian(double mu, double eps);

/// Out-of-sample eigenfunction extension
///   phi(x) = mu^{-1} V(x) sum_i k(x, x_i) u_i vec_i / M,
/// with the left weight V(x) = 1/(sum_i k(x, x_i) u_i / M) for both
/// normalisations. Requires mu > 1e-8.
Eigen::VectorXd nystrom_extend(const NormalizedOperator& op, double mu,
                               const Eigen::VectorXd& vec,
                               const Eigen::MatrixXd& query_points);

/// Grouping of computed eigenpairs against a reference spectrum with known
/// multiplicities (positional assignment in sorted order).
struct MergedCluster {
  double ref_lambda = 0.0;
  int multiplicity = 0;
  std::vector<int> indices;  // into the SpectralResult arrays
  bool ambiguous = false;    // computed value within gap_tol of two clusters
};

std::vector<MergedCluster> merge_by_reference(
    const SpectralResult& result,
    const std::vector<std::pair<double, int>>& reference_lambda_mult,
    double gap_tol);

/// Same grouping for a bare ascending eigenvalue list.
std::vector<MergedCluster> merge_lambdas(
    const Eigen::VectorXd& lambda_ascending,
    const std::vector<std::pair<double, int>>& reference_lambda_mult,
    double gap_tol);

}  // namespace torusdm
