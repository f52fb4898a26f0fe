#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "torusdm/kernel.hpp"

namespace torusdm {

enum class WeightKind { Standard, Sinkhorn };

/// Normalization request: standard weights with an exponent, or Sinkhorn.
struct NormSpec {
  WeightKind kind = WeightKind::Sinkhorn;
  double alpha = 0.5;  // used by Standard only

  static NormSpec standard(double a) { return {WeightKind::Standard, a}; }
  static NormSpec sinkhorn() { return {WeightKind::Sinkhorn, 0.0}; }
  std::string name() const;
};

/// Left/right weights. For Sinkhorn v == u entrywise; for standard weights
/// u = (K 1)^{-alpha} and v = 1 / (K u).
struct WeightPair {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  WeightKind kind = WeightKind::Standard;
  double alpha = 0.0;
};

enum class SinkhornAlgorithm { Plain, Assa };

struct SinkhornReport {
  int iterations = 0;
  std::vector<double> residual_trace;  // ||log(u_old/u_new)||_l2 per iteration
  double fixed_point_residual = 0.0;   // ||u o (K u) - 1||_inf
  bool converged = false;
  SinkhornAlgorithm algorithm = SinkhornAlgorithm::Assa;
  double stop_tol = 0.0;
  /// Set when the empirical tail contraction exceeds 0.5 (kernel with
  /// negative spectrum not far from -1).
  bool contraction_warning = false;

  /// Largest consecutive residual ratio observed once the residual has
  /// dropped below `threshold` (NaN when never reached).
  double tail_contraction(double threshold = 1e-4) const;
  /// Iterations needed to bring the residual below `target` (-1 if never).
  int iterations_to(double target) const;
  void write_csv(std::ostream& os) const;  // columns: iteration,residual
};

struct SinkhornResult {
  WeightPair weights;
  SinkhornReport report;
};

/// u = (K 1)^{-alpha}, v = 1 / (K u). Throws on degenerate (nonpositive)
/// row sums, naming the offending indices.
WeightPair standard_weights(const KernelMatrix& K, double alpha);

/// Plain Sinkhorn iteration u <- 1/(K u). Converges only up to an
/// alternating constant, so the stopping residual is projective (the mean
/// log-ratio is subtracted) and the returned weight is the geometric mean of
/// the last two iterates. Exhausting max_iter yields a non-converged report,
/// not an exception.
SinkhornResult sinkhorn_plain(const KernelMatrix& K, const Eigen::VectorXd& u0,
                              double tol, int max_iter = 100000);

/// Accelerated symmetric Sinkhorn: u0 = 1/sqrt(K 1), then
/// { u_o <- u; v <- 1/(K u_o); u <- sqrt(v / (K v)) } until
/// ||log(u_o/u)||_l2 <= eps * tau.
SinkhornResult assa(const KernelMatrix& K, double eps, double tau,
                    int max_iter = 200);

/// Default tau so that eps * tau = 1e-13 * sqrt(M): the stopping quantity is
/// an l2 norm over M entries, so this keeps per-entry accuracy uniform.
double default_assa_tau(double eps, int M);

/// Operator-level solvers for kernel operators that are self-adjoint and
/// positive semi-definite in L^2(mu); residual norms are weighted by norm_w
/// (pass ones for plain l2). Used by the continuum reference solver.
using LinOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
SinkhornResult assa_operator(const LinOp& apply, Eigen::Index n,
                             const Eigen::VectorXd& norm_w, double stop_tol,
                             int max_iter = 200);
SinkhornResult sinkhorn_plain_operator(const LinOp& apply,
                                       const Eigen::VectorXd& u0,
                                       const Eigen::VectorXd& norm_w,
                                       double stop_tol, int max_iter = 100000);

/// Markov-normalised operator P = diag(v) K diag(u), kept in factored form.
struct NormalizedOperator {
  std::shared_ptr<const KernelMatrix> kernel;
  WeightPair weights;
  Eigen::VectorXd row_sums;  // of P, cached at assembly

  int size() const { return kernel->size(); }
  double eps() const { return kernel->eps; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense_P() const;
};

/// Validates that rows of P sum to 1 (deviation > 1e-8 signals a weight/K
/// mismatch and throws).
NormalizedOperator assemble_P(std::shared_ptr<const KernelMatrix> K,
                              WeightPair weights);

/// S = diag(s) P diag(s)^{-1} with s = sqrt(u/v); equivalently
/// S = diag(sqrt(uv)) K diag(sqrt(uv)), exactly symmetric as stored.
/// P and S share eigenvalues; an eigenvector w of S maps to the P
/// eigenvector diag(s)^{-1} w. For Sinkhorn s == 1 and S == P.
struct SymmetrizedOperator {
  Eigen::MatrixXd S;
  Eigen::VectorXd s;
};
SymmetrizedOperator symmetrize(const NormalizedOperator& op);

/// Local per-iteration L2 contraction factor bound 1/8 + k'' with
/// k' = k e^{4k}, k'' = k'(2 + k'/2). Requires k < 0.1 and k'' < 3/8.
double theoretical_contraction_bound(double k);

}  // namespace torusdm
