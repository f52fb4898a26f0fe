#include "torusdm/spectral.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "torusdm/rng.hpp"

#include <json.hpp>

namespace torusdm {

namespace {

// Descending reorder of an ascending self-adjoint solve.
void take_descending(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es,
                     int k, Eigen::VectorXd& vals, Eigen::MatrixXd& vecs) {
  const Eigen::Index n = es.eigenvalues().size();
  vals.resize(k);
  vecs.resize(n, k);
  for (int j = 0; j < k; ++j) {
    vals[j] = es.eigenvalues()[n - 1 - j];
    vecs.col(j) = es.eigenvectors().col(n - 1 - j);
  }
}

}  // namespace

namespace {

// Shift-inverted block iteration for spectra that cluster near the top
// (small-eps semigroup operators): factor sigma I - S once and iterate on
// solves; convergence then depends on eigenvalue ratios relative to sigma,
// not on the compressed absolute gaps.
TopkResult shift_invert_topk(const Eigen::MatrixXd& S, int k, double theta0,
                             const TopkOptions& opts) {
  const Eigen::Index n = S.rows();
  const int b = std::min<Eigen::Index>(
      opts.block > 0 ? opts.block : std::max(2 * k + 8, k + 12), n);
  for (const double bump : {1e-8, 1e-4, 1e-2}) {
    const double sigma = theta0 > 0.0 ? theta0 * (1.0 + bump) : bump;
    Eigen::MatrixXd B = -S;
    B.diagonal().array() += sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) continue;  // sigma not above the top

    SplitMix64 rng(opts.seed ^ 0x517f7ULL);
    Eigen::MatrixXd X(n, b);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < b; ++j) X(i, j) = rng.normal();
    X = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ() *
        Eigen::MatrixXd::Identity(n, b);

    TopkResult out;
    Eigen::VectorXd theta(b);
    Eigen::MatrixXd ritz;
    for (int it = 1; it <= opts.max_iter; ++it) {
      const Eigen::MatrixXd Y = llt.solve(X);
      Eigen::MatrixXd H = X.transpose() * Y;
      H = 0.5 * (H + H.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
      if (es.info() != Eigen::Success)
        throw std::runtime_error("symmetric_topk: Rayleigh-Ritz solve failed");
      Eigen::VectorXd nu;
      Eigen::MatrixXd W;
      take_descending(es, b, nu, W);
      ritz = X * W;
      for (int j = 0; j < b; ++j) theta[j] = sigma - 1.0 / nu[j];
      out.iterations = it;
      // residuals in the original operator for the wanted pairs
      const Eigen::MatrixXd SV = S * ritz.leftCols(k);
      const double scale = std::max(std::abs(theta[0]), 1e-300);
      bool ok = it >= 2;
      for (int j = 0; j < k && ok; ++j)
        if ((SV.col(j) - theta[j] * ritz.col(j)).norm() > opts.tol * scale)
          ok = false;
      if (ok) {
        out.converged = true;
        break;
      }
      X = Eigen::HouseholderQR<Eigen::MatrixXd>((Y * W).eval()).householderQ() *
          Eigen::MatrixXd::Identity(n, b);
    }
    out.values = theta.head(k);
    out.vectors = ritz.leftCols(k);
    return out;
  }
  throw std::runtime_error("symmetric_topk: could not factor sigma I - S");
}

}  // namespace

TopkResult symmetric_topk(const Eigen::MatrixXd& S, int k,
                          const TopkOptions& opts) {
  const Eigen::Index n = S.rows();
  if (n <= opts.dense_threshold || k >= n) {
    if (k > n) throw std::invalid_argument("symmetric_topk: k exceeds size");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("symmetric_topk: dense eigensolver failed");
    TopkResult out;
    take_descending(es, k, out.values, out.vectors);
    return out;
  }
  // cheap attempt: plain block iteration, effective when the spectrum decays
  // past the block
  BlockOp apply = [&S](const Eigen::MatrixXd& X) { return S * X; };
  TopkOptions attempt = opts;
  attempt.max_iter = std::min(opts.max_iter, 40);
  TopkResult out = symmetric_topk(apply, n, k, attempt);
  if (out.converged) return out;
  // the top Ritz value is accurate long before the deeper ones settle
  return shift_invert_topk(S, k, out.values[0], opts);
}

TopkResult symmetric_topk(const BlockOp& apply, Eigen::Index n, int k,
                          const TopkOptions& opts) {
  if (k < 1 || k > n) throw std::invalid_argument("symmetric_topk: bad k");
  int b = opts.block > 0 ? opts.block : std::max(2 * k + 8, k + 12);
  b = static_cast<int>(std::min<Eigen::Index>(b, n));

  SplitMix64 rng(opts.seed);
  Eigen::MatrixXd X(n, b);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < b; ++j) X(i, j) = rng.normal();
  X = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ() *
      Eigen::MatrixXd::Identity(n, b);

  TopkResult out;
  out.converged = false;
  Eigen::MatrixXd ritz;
  Eigen::VectorXd theta;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Eigen::MatrixXd Z = apply(X);
    if (opts.shift != 0.0) Z += opts.shift * X;
    Eigen::MatrixXd H = X.transpose() * Z;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("symmetric_topk: Rayleigh-Ritz solve failed");
    Eigen::MatrixXd W;
    take_descending(es, b, theta, W);
    out.iterations = it;

    // Ritz residuals for the wanted pairs, from the same block apply.
    const Eigen::MatrixXd ZW = Z * W;
    ritz = X * W;
    const double scale = std::max(std::abs(theta[0]), 1e-300);
    bool ok = it >= 2;
    for (int j = 0; j < k && ok; ++j) {
      // eigenvalues at the numerical-noise floor cannot beat the residual
      // test and are accepted as zero
      if (std::abs(theta[j]) <= 1e-12 * scale) continue;
      const double res = (ZW.col(j) - theta[j] * ritz.col(j)).norm();
      if (res > opts.tol * scale) ok = false;
    }
    if (ok) {
      out.converged = true;
      break;
    }
    // power step on the rotated block
    X = Eigen::HouseholderQR<Eigen::MatrixXd>(ZW).householderQ() *
        Eigen::MatrixXd::Identity(n, b);
  }
  out.values = theta.head(k).array() - opts.shift;
  out.vectors = ritz.leftCols(k);
  return out;
}

SpectralResult eigensolve(const NormalizedOperator& op, int k,
                          const TopkOptions& opts) {
  const int M = op.size();
  if (k < 1 || k > M)
    throw std::invalid_argument("eigensolve: need 1 <= k <= M");

  // the symmetric form is materialised even on the iterative path so the
  // shift-inverted fallback can factor it
  TopkResult top = symmetric_topk(symmetrize(op).S, k, opts);
  if (!top.converged)
    throw std::runtime_error("eigensolve: eigensolver did not converge");

  SpectralResult r;
  r.eps = op.eps();
  r.kind = op.weights.kind;
  r.alpha = op.weights.alpha;
  r.mu = top.values;
  r.ip_weights = op.weights.u.array() / op.weights.v.array();
  r.lambda.resize(k);
  r.lambda_tilde.resize(k);
  r.nonpositive_mu.assign(k, false);
  for (int j = 0; j < k; ++j) {
    bool flag = false;
    r.lambda[j] = to_generator(r.mu[j], r.eps, &flag);
    r.nonpositive_mu[j] = flag;
    r.lambda_tilde[j] = to_graph_laplacian(r.mu[j], r.eps);
  }
  // back-conjugation to P-coordinates, unit norm in (1/M) sum f^2 (u/v):
  // phi = sqrt(v/u) o psi has <phi,phi> = |psi|^2 / M.
  const Eigen::VectorXd inv_s =
      (op.weights.v.array() / op.weights.u.array()).sqrt();
  r.vectors.resize(M, k);
  const double root_M = std::sqrt(double(M));
  for (int j = 0; j < k; ++j) {
    const Eigen::VectorXd psi = top.vectors.col(j) * root_M;
    r.vectors.col(j) = inv_s.array() * psi.array();
  }
  return r;
}

double to_generator(double mu, double eps, bool* flagged) {
  if (!(eps > 0.0)) throw std::invalid_argument("to_generator: eps must be positive");
  if (flagged) *flagged = false;
  if (mu <= 0.0) {
    if (flagged) *flagged = true;
    return std::numeric_limits<double>::infinity();
  }
  return -std::log(mu) / eps;
}

double to_graph_laplacian(double mu, double eps) {
  if (!(eps > 0.0))
    throw std::invalid_argument("to_graph_laplacian: eps must be positive");
  return (1.0 - mu) / eps;
}

Eigen::VectorXd nystrom_extend(const NormalizedOperator& op, double mu,
                               const Eigen::VectorXd& vec,
                               const Eigen::MatrixXd& query_points) {
  if (!(mu > 1e-8))
    throw std::runtime_error(
        "nystrom_extend: eigenvalue below 1e-8, extension is ill-conditioned");
  if (vec.size() != op.size())
    throw std::invalid_argument("nystrom_extend: eigenvector dimension mismatch");
  const Eigen::VectorXd uv = op.weights.u.array() * vec.array();
  Eigen::VectorXd out(query_points.rows());
  for (Eigen::Index q = 0; q < query_points.rows(); ++q) {
    const Eigen::VectorXd row =
        out_of_sample_row(*op.kernel, query_points.row(q).transpose());
    const double den = row.dot(op.weights.u);
    if (!(den > 0.0))
      throw std::runtime_error("nystrom_extend: vanishing kernel mass at query");
    out[q] = row.dot(uv) / (den * mu);
  }
  return out;
}

std::vector<MergedCluster> merge_by_reference(
    const SpectralResult& result,
    const std::vector<std::pair<double, int>>& reference_lambda_mult,
    double gap_tol) {
  return merge_lambdas(result.lambda, reference_lambda_mult, gap_tol);
}

std::vector<MergedCluster> merge_lambdas(
    const Eigen::VectorXd& lambda_ascending,
    const std::vector<std::pair<double, int>>& reference_lambda_mult,
    double gap_tol) {
  std::vector<MergedCluster> out;
  int next = 0;
  const int total = static_cast<int>(lambda_ascending.size());
  for (std::size_t c = 0; c < reference_lambda_mult.size(); ++c) {
    const auto& [ref_lambda, mult] = reference_lambda_mult[c];
    if (mult < 1) throw std::invalid_argument("merge_by_reference: bad multiplicity");
    MergedCluster mc;
    mc.ref_lambda = ref_lambda;
    mc.multiplicity = mult;
    for (int m = 0; m < mult && next < total; ++m, ++next) {
      mc.indices.push_back(next);
      const double lam = lambda_ascending[next];
      if (std::isfinite(lam)) {
        // flagged when the computed value sits within gap_tol of a
        // neighbouring reference cluster as well as its own
        const double here = std::abs(lam - ref_lambda);
        if (here <= gap_tol) {
          if (c + 1 < reference_lambda_mult.size() &&
              std::abs(lam - reference_lambda_mult[c + 1].first) <= gap_tol)
            mc.ambiguous = true;
          if (c > 0 &&
              std::abs(lam - reference_lambda_mult[c - 1].first) <= gap_tol)
            mc.ambiguous = true;
        }
      }
    }
    out.push_back(std::move(mc));
    if (next >= total) break;
  }
  return out;
}

void SpectralResult::write_csv(std::ostream& os) const {
  os << "k,mu,lambda,lambda_tilde\n";
  char buf[128];
  for (int j = 0; j < count(); ++j) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", j, mu[j],
                  lambda[j], lambda_tilde[j]);
    os << buf;
  }
}

std::string SpectralResult::to_json(bool with_vectors) const {
  nlohmann::json j;
  j["eps"] = eps;
  j["normalization"] =
      kind == WeightKind::Sinkhorn ? "sinkhorn" : "standard";
  if (kind == WeightKind::Standard) j["alpha"] = alpha;
  j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
  j["lambda"] = std::vector<double>(lambda.data(), lambda.data() + lambda.size());
  j["lambda_tilde"] = std::vector<double>(lambda_tilde.data(),
                                          lambda_tilde.data() + lambda_tilde.size());
  j["nonpositive_mu"] = nonpositive_mu;
  if (with_vectors) {
    std::vector<std::vector<double>> vs;
    for (int c = 0; c < vectors.cols(); ++c)
      vs.emplace_back(vectors.col(c).data(), vectors.col(c).data() + vectors.rows());
    j["eigenvectors"] = vs;
  }
  return j.dump(2);
}

}  // namespace torusdm
