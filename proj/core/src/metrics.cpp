#include "torusdm/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "torusdm/rng.hpp"

namespace torusdm {

namespace {

// Orthonormalise columns under the euclidean inner product; throws on rank
// deficiency.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& A, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const double thresh = 1e-10 * std::max(1.0, A.norm());
  if (qr.rank() < A.cols() ||
      std::abs(qr.matrixR()(A.cols() - 1, A.cols() - 1)) < thresh)
    throw std::runtime_error(std::string("subspace_distance: rank-deficient ") +
                             what);
  Eigen::MatrixXd Q = Eigen::MatrixXd(qr.householderQ()) *
                      Eigen::MatrixXd::Identity(A.rows(), A.cols());
  return Q;
}

double one_sided_gap_l2(const Eigen::MatrixXd& Qa, const Eigen::MatrixXd& Qb) {
  if (Qa.cols() > Qb.cols()) return 1.0;  // some direction of A leaves span(B)
  // sin of the largest principal angle, computed from the projection
  // residual (stable near zero, unlike sqrt(1 - smin^2))
  const Eigen::MatrixXd R = Qa - Qb * (Qb.transpose() * Qa);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  return std::min(1.0, svd.singularValues().maxCoeff());
}

// Lawson-iterated discrete Chebyshev approximation: min_c ||phi - B c||_inf.
// Returns an upper bound of the minimum, tight to ~tol for nondegenerate
// problems (the weighted-LS value is a lower bound, and we iterate until the
// bracket closes).
double chebyshev_dist(const Eigen::VectorXd& phi, const Eigen::MatrixXd& B,
                      double tol = 1e-8, int max_iter = 400) {
  const Eigen::Index n = phi.size();
  const Eigen::Index q = B.cols();
  if (q == 0) return phi.lpNorm<Eigen::Infinity>();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / double(n));
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd G(q, q);
  Eigen::VectorXd rhs(q);
  for (int it = 0; it < max_iter; ++it) {
    // weighted least squares via normal equations; B is orthonormalised by
    // the caller so the small Gram system is well conditioned
    G.noalias() = B.transpose() * w.asDiagonal() * B;
    rhs.noalias() = B.transpose() * (w.array() * phi.array()).matrix();
    const Eigen::VectorXd c = G.ldlt().solve(rhs);
    const Eigen::VectorXd r = phi - B * c;
    const double mx = r.lpNorm<Eigen::Infinity>();
    const double mw = std::sqrt((w.array() * r.array().square()).sum());
    best = std::min(best, mx);
    if (mx - mw <= tol * std::max(1.0, mx)) break;
    w = (w.array() * r.array().abs()).matrix();
    const double ws = w.sum();
    if (!(ws > 0.0)) break;  // exact fit
    w /= ws;
  }
  return best;
}

// Deterministic unit directions in R^p: canonical axes, sign patterns and a
// seeded spread.
std::vector<Eigen::VectorXd> sample_directions(int p, int budget) {
  std::vector<Eigen::VectorXd> dirs;
  if (p == 1) {
    dirs.push_back(Eigen::VectorXd::Ones(1));
    return dirs;
  }
  for (int i = 0; i < p; ++i) dirs.push_back(Eigen::VectorXd::Unit(p, i));
  // all sign patterns of +-1 (extreme combinations), up to symmetry
  for (int mask = 0; mask < (1 << (p - 1)); ++mask) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(p);
    for (int i = 0; i < p - 1; ++i)
      if (mask & (1 << i)) v[i + 1] = -1.0;
    dirs.push_back(v.normalized());
  }
  if (p == 2) {
    const int m = std::min(std::max(budget, 64), 128);
    for (int i = 0; i < m; ++i) {
      const double a = M_PI * i / m;
      dirs.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else {
    SplitMix64 rng(0xd15ea5e5ULL);
    for (int i = 0; i < std::max(budget, 128); ++i) {
      Eigen::VectorXd v(p);
      for (int j = 0; j < p; ++j) v[j] = rng.normal();
      dirs.push_back(v.normalized());
    }
  }
  return dirs;
}

// One side of the sup-norm distance: (lower, upper) bounds of
// sup_{phi in span A, |phi|_inf = 1} inf_{psi in span B} |phi - psi|_inf.
std::pair<double, double> sup_gap_bounds(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  const int p = static_cast<int>(A.cols());

  double lo = 0.0;
  for (const auto& a : sample_directions(p, 256)) {
    Eigen::VectorXd phi = A * a;
    const double sup = phi.lpNorm<Eigen::Infinity>();
    if (sup <= 0.0) continue;
    phi /= sup;
    lo = std::max(lo, chebyshev_dist(phi, B));
  }

  // upper bound via norm equivalence: dist(Aa, B) <= ||(A - B C)a||_inf
  // <= rowmax2(A - B C) ||a||_2 and ||a||_2 <= sqrt(n)/sigma_min(A) on the
  // unit sup ball.
  Eigen::MatrixXd C;
  if (B.cols() > 0)
    C = (B.transpose() * B).ldlt().solve(B.transpose() * A);
  const Eigen::MatrixXd R = B.cols() > 0 ? (A - B * C).eval() : A;
  const double rowmax2 = R.rowwise().norm().maxCoeff();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 0.0))
    throw std::runtime_error("subspace_distance: rank-deficient source span");
  const double up = std::min(rowmax2 * std::sqrt(double(n)) / smin, 2.0);
  return {lo, std::max(up, lo)};
}

}  // namespace

SubspaceDistanceReport subspace_distance(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& B,
                                         SubspaceNorm kind,
                                         const Eigen::VectorXd& weights) {
  if (A.rows() != B.rows())
    throw std::invalid_argument("subspace_distance: evaluation sets differ");
  if (A.cols() == 0 || B.cols() == 0)
    throw std::invalid_argument("subspace_distance: empty span");
  SubspaceDistanceReport rep;
  rep.norm_kind = kind;
  rep.dim_a = static_cast<int>(A.cols());
  rep.dim_b = static_cast<int>(B.cols());
  rep.n_points = static_cast<int>(A.rows());

  if (kind == SubspaceNorm::WeightedL2) {
    Eigen::VectorXd w = weights.size() > 0
                            ? weights
                            : Eigen::VectorXd::Constant(A.rows(), 1.0 / A.rows());
    if (w.size() != A.rows() || !(w.minCoeff() > 0.0))
      throw std::invalid_argument("subspace_distance: bad weights");
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd Qa = orthonormalize(sw.asDiagonal() * A, "first span");
    const Eigen::MatrixXd Qb = orthonormalize(sw.asDiagonal() * B, "second span");
    const double gab = one_sided_gap_l2(Qa, Qb);
    const double gba = one_sided_gap_l2(Qb, Qa);
    rep.value = std::max(gab, gba);
    rep.lower = rep.upper = rep.value;
    return rep;
  }

  // sup-norm flavour: orthonormalise first for numerical stability (spans
  // are unchanged)
  const Eigen::MatrixXd Ao = orthonormalize(A, "first span");
  const Eigen::MatrixXd Bo = orthonormalize(B, "second span");
  const auto [lo_ab, up_ab] = sup_gap_bounds(Ao, Bo);
  const auto [lo_ba, up_ba] = sup_gap_bounds(Bo, Ao);
  rep.lower = std::max(lo_ab, lo_ba);
  rep.upper = std::max(up_ab, up_ba);
  rep.value = rep.lower;
  return rep;
}

namespace {

std::vector<EigenvalueErrorRow> error_rows(
    const Eigen::VectorXd& lambda, const Eigen::VectorXd& lambda_tilde,
    const std::vector<std::pair<double, int>>& reference, int k_max,
    double gap_tol) {
  int needed = 0;
  std::size_t c_end = 0;
  while (c_end < reference.size() && needed < k_max)
    needed += reference[c_end++].second;
  if (lambda.size() < needed)
    throw std::invalid_argument(
        "eigenvalue_errors: insufficient computed eigenpairs");

  const auto clusters = merge_lambdas(lambda, reference, gap_tol);
  std::vector<EigenvalueErrorRow> rows;
  int k = 0;
  for (const auto& mc : clusters) {
    for (const int idx : mc.indices) {
      if (k >= k_max) return rows;
      EigenvalueErrorRow row;
      row.k = k++;
      row.ref_lambda = mc.ref_lambda;
      row.multiplicity = mc.multiplicity;
      row.ambiguous = mc.ambiguous;
      row.lambda = lambda[idx];
      row.lambda_tilde = lambda_tilde[idx];
      row.err_lambda = std::abs(row.lambda - mc.ref_lambda);
      row.err_lambda_tilde = std::abs(row.lambda_tilde - mc.ref_lambda);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

std::vector<EigenvalueErrorRow> eigenvalue_errors(
    const SpectralResult& computed,
    const std::vector<std::pair<double, int>>& reference, int k_max,
    double gap_tol) {
  return error_rows(computed.lambda, computed.lambda_tilde, reference, k_max,
                    gap_tol);
}

std::vector<EigenvalueErrorRow> eigenvalue_errors(
    const Eigen::VectorXd& lambda_ascending, double eps,
    const std::vector<std::pair<double, int>>& reference, int k_max,
    double gap_tol) {
  Eigen::VectorXd lt(lambda_ascending.size());
  for (Eigen::Index i = 0; i < lt.size(); ++i)
    lt[i] = (1.0 - std::exp(-eps * lambda_ascending[i])) / eps;
  return error_rows(lambda_ascending, lt, reference, k_max, gap_tol);
}

RateFit fit_rate(const std::vector<double>& eps_list,
                 const std::vector<double>& err_list) {
  if (eps_list.size() != err_list.size())
    throw std::invalid_argument("fit_rate: length mismatch");
  if (eps_list.size() < 3)
    throw std::invalid_argument("fit_rate: need at least 3 points");
  RateFit fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(eps_list.size());
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0) || !(err_list[i] > 0.0))
      throw std::invalid_argument("fit_rate: values must be positive");
    const double x = std::log10(eps_list[i]);
    const double y = std::log10(err_list[i]);
    fit.points.push_back({x, y});
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  if (!(std::abs(det) > 0.0))
    throw std::invalid_argument("fit_rate: eps values are all equal");
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy * sxx - sx * sxy) / det;
  double ss = 0;
  for (const auto& [x, y] : fit.points) {
    const double r = y - (fit.slope * x + fit.intercept);
    ss += r * r;
  }
  fit.resid_rms = std::sqrt(ss / n);
  return fit;
}

}  // namespace torusdm
