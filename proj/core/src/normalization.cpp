#include "torusdm/normalization.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace torusdm {

namespace {

constexpr double kUnderflowFloor = 1e-300;

// Signals that the fast multiplicative path hit an underflowed K*u entry and
// the solve should be redone in log space.
struct NeedsLogDomain {};

Eigen::VectorXd check_apply(const LinOp& apply, const Eigen::VectorXd& x,
                            bool allow_retry) {
  Eigen::VectorXd y = apply(x);
  const double mn = y.minCoeff();
  if (!(mn > 0.0) || !y.allFinite()) {
    if (allow_retry && mn >= 0.0) throw NeedsLogDomain{};
    throw std::runtime_error(
        "sinkhorn: kernel apply produced a nonpositive or non-finite entry");
  }
  if (allow_retry && mn < kUnderflowFloor) throw NeedsLogDomain{};
  return y;
}

double weighted_l2(const Eigen::VectorXd& r, const Eigen::VectorXd& w) {
  return std::sqrt((w.array() * r.array().square()).sum());
}

// log(K exp(lam)) with row-wise log-sum-exp; exact-zero entries of K are
// skipped (log K = -inf).
struct LogKernel {
  Eigen::MatrixXd logK;
  explicit LogKernel(const Eigen::MatrixXd& K) : logK(K.array().log()) {}

  Eigen::VectorXd apply_log(const Eigen::VectorXd& lam) const {
    const Eigen::Index M = logK.rows();
    Eigen::VectorXd out(M);
    for (Eigen::Index i = 0; i < M; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < M; ++j)
        mx = std::max(mx, logK(i, j) + lam[j]);
      if (!std::isfinite(mx)) {
        out[i] = mx;
        continue;
      }
      double s = 0.0;
      for (Eigen::Index j = 0; j < M; ++j)
        s += std::exp(logK(i, j) + lam[j] - mx);
      out[i] = mx + std::log(s);
    }
    return out;
  }
};

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite())
    throw std::runtime_error(std::string("sinkhorn: non-finite ") + what);
}

// ASSA in log space; lam = log u.
SinkhornResult assa_log_domain(const Eigen::MatrixXd& K,
                               const Eigen::VectorXd& norm_w, double stop_tol,
                               int max_iter) {
  const LogKernel lk(K);
  SinkhornResult res;
  res.report.algorithm = SinkhornAlgorithm::Assa;
  res.report.stop_tol = stop_tol;
  Eigen::VectorXd lam = -0.5 * lk.apply_log(Eigen::VectorXd::Zero(K.rows()));
  require_finite(lam, "initial weight");
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd lam_o = lam;
    const Eigen::VectorXd lv = -lk.apply_log(lam_o);
    require_finite(lv, "iterate");
    lam = 0.5 * (lv - lk.apply_log(lv));
    require_finite(lam, "iterate");
    const double r = weighted_l2(lam_o - lam, norm_w);
    res.report.residual_trace.push_back(r);
    res.report.iterations = it;
    if (r <= stop_tol) {
      res.report.converged = true;
      break;
    }
  }
  res.weights.kind = WeightKind::Sinkhorn;
  res.weights.u = lam.array().exp();
  res.weights.v = res.weights.u;
  res.report.fixed_point_residual =
      ((lam + lk.apply_log(lam)).array().exp() - 1.0).abs().maxCoeff();
  return res;
}

SinkhornResult plain_log_domain(const Eigen::MatrixXd& K,
                                const Eigen::VectorXd& u0,
                                const Eigen::VectorXd& norm_w, double stop_tol,
                                int max_iter) {
  const LogKernel lk(K);
  const double wsum = norm_w.sum();
  SinkhornResult res;
  res.report.algorithm = SinkhornAlgorithm::Plain;
  res.report.stop_tol = stop_tol;
  Eigen::VectorXd lam = u0.array().log();
  Eigen::VectorXd lam_next;
  for (int it = 1; it <= max_iter; ++it) {
    lam_next = -lk.apply_log(lam);
    require_finite(lam_next, "iterate");
    Eigen::VectorXd r = lam - lam_next;
    r.array() -= (norm_w.array() * r.array()).sum() / wsum;
    const double rn = weighted_l2(r, norm_w);
    res.report.residual_trace.push_back(rn);
    res.report.iterations = it;
    if (rn <= stop_tol) {
      res.report.converged = true;
      break;
    }
    lam.swap(lam_next);
  }
  const Eigen::VectorXd lam_gm = 0.5 * (lam + lam_next);
  res.weights.kind = WeightKind::Sinkhorn;
  res.weights.u = lam_gm.array().exp();
  res.weights.v = res.weights.u;
  res.report.fixed_point_residual =
      ((lam_gm + lk.apply_log(lam_gm)).array().exp() - 1.0).abs().maxCoeff();
  return res;
}

SinkhornResult assa_impl(const LinOp& apply, Eigen::Index n,
                         const Eigen::VectorXd& norm_w, double stop_tol,
                         int max_iter, bool allow_retry) {
  if (!(stop_tol > 0.0)) throw std::invalid_argument("assa: stopping tolerance must be positive");
  if (max_iter < 1) throw std::invalid_argument("assa: max_iter must be >= 1");
  SinkhornResult res;
  res.report.algorithm = SinkhornAlgorithm::Assa;
  res.report.stop_tol = stop_tol;
  Eigen::VectorXd u =
      check_apply(apply, Eigen::VectorXd::Ones(n), allow_retry).array().rsqrt();
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd u_o = u;
    const Eigen::VectorXd v = check_apply(apply, u_o, allow_retry).cwiseInverse();
    const Eigen::VectorXd Kv = check_apply(apply, v, allow_retry);
    u = (v.array() / Kv.array()).sqrt();
    const double r = weighted_l2((u_o.array() / u.array()).log(), norm_w);
    res.report.residual_trace.push_back(r);
    res.report.iterations = it;
    if (r <= stop_tol) {
      res.report.converged = true;
      break;
    }
  }
  res.weights.kind = WeightKind::Sinkhorn;
  res.weights.u = u;
  res.weights.v = u;
  res.report.fixed_point_residual =
      (u.array() * apply(u).array() - 1.0).abs().maxCoeff();
  return res;
}

SinkhornResult plain_impl(const LinOp& apply, const Eigen::VectorXd& u0,
                          const Eigen::VectorXd& norm_w, double stop_tol,
                          int max_iter, bool allow_retry) {
  if (!(u0.minCoeff() > 0.0))
    throw std::invalid_argument("sinkhorn_plain: u0 must be entrywise positive");
  if (max_iter < 1) throw std::invalid_argument("sinkhorn_plain: max_iter must be >= 1");
  const double wsum = norm_w.sum();
  SinkhornResult res;
  res.report.algorithm = SinkhornAlgorithm::Plain;
  res.report.stop_tol = stop_tol;
  Eigen::VectorXd u = u0, u_next;
  for (int it = 1; it <= max_iter; ++it) {
    u_next = check_apply(apply, u, allow_retry).cwiseInverse();
    Eigen::VectorXd r = (u.array() / u_next.array()).log();
    r.array() -= (norm_w.array() * r.array()).sum() / wsum;
    const double rn = weighted_l2(r, norm_w);
    res.report.residual_trace.push_back(rn);
    res.report.iterations = it;
    if (rn <= stop_tol) {
      res.report.converged = true;
      break;
    }
    u.swap(u_next);
  }
  // geometric mean of the final pair cancels the alternating constant
  Eigen::VectorXd u_gm = (u.array() * u_next.array()).sqrt();
  res.weights.kind = WeightKind::Sinkhorn;
  res.weights.u = u_gm;
  res.weights.v = u_gm;
  res.report.fixed_point_residual =
      (u_gm.array() * apply(u_gm).array() - 1.0).abs().maxCoeff();
  return res;
}

void flag_contraction(SinkhornReport& rep) {
  const double tc = rep.tail_contraction(1e-4);
  if (std::isfinite(tc) && tc > 0.5) rep.contraction_warning = true;
}

}  // namespace

std::string NormSpec::name() const {
  if (kind == WeightKind::Sinkhorn) return "sinkhorn";
  std::ostringstream os;
  os << "standard_alpha=" << alpha;
  return os.str();
}

double SinkhornReport::tail_contraction(double threshold) const {
  double worst = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i + 1 < residual_trace.size(); ++i) {
    if (residual_trace[i] < threshold && residual_trace[i] > 0.0) {
      const double ratio = residual_trace[i + 1] / residual_trace[i];
      if (std::isnan(worst) || ratio > worst) worst = ratio;
    }
  }
  return worst;
}

int SinkhornReport::iterations_to(double target) const {
  for (std::size_t i = 0; i < residual_trace.size(); ++i)
    if (residual_trace[i] <= target) return static_cast<int>(i) + 1;
  return -1;
}

void SinkhornReport::write_csv(std::ostream& os) const {
  os << "iteration,residual\n";
  char buf[64];
  for (std::size_t i = 0; i < residual_trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, residual_trace[i]);
    os << buf;
  }
}

WeightPair standard_weights(const KernelMatrix& K, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("standard_weights: alpha must lie in [0,1]");
  const Eigen::VectorXd rs = K.row_sums();
  if (!(rs.minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "standard_weights: degenerate (nonpositive) row sums at indices";
    for (int i = 0; i < K.size(); ++i)
      if (!(rs[i] > 0.0)) os << ' ' << i;
    throw std::runtime_error(os.str());
  }
  WeightPair w;
  w.kind = WeightKind::Standard;
  w.alpha = alpha;
  w.u = rs.array().pow(-alpha);
  const Eigen::VectorXd Ku = K.apply(w.u);
  if (!(Ku.minCoeff() > 0.0))
    throw std::runtime_error("standard_weights: K u has a nonpositive entry");
  w.v = Ku.cwiseInverse();
  return w;
}

SinkhornResult sinkhorn_plain(const KernelMatrix& K, const Eigen::VectorXd& u0,
                              double tol, int max_iter) {
  if (u0.size() != K.size())
    throw std::invalid_argument("sinkhorn_plain: u0 dimension mismatch");
  const Eigen::VectorXd ones_w = Eigen::VectorXd::Ones(K.size());
  LinOp apply = [&K](const Eigen::VectorXd& x) { return K.apply(x); };
  SinkhornResult res;
  try {
    res = plain_impl(apply, u0, ones_w, tol, max_iter, /*allow_retry=*/true);
  } catch (const NeedsLogDomain&) {
    res = plain_log_domain(K.entries, u0, ones_w, tol, max_iter);
  }
  flag_contraction(res.report);
  return res;
}

SinkhornResult assa(const KernelMatrix& K, double eps, double tau, int max_iter) {
  if (!(eps > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("assa: eps and tau must be positive");
  const Eigen::VectorXd ones_w = Eigen::VectorXd::Ones(K.size());
  LinOp apply = [&K](const Eigen::VectorXd& x) { return K.apply(x); };
  SinkhornResult res;
  try {
    res = assa_impl(apply, K.size(), ones_w, eps * tau, max_iter, true);
  } catch (const NeedsLogDomain&) {
    res = assa_log_domain(K.entries, ones_w, eps * tau, max_iter);
  }
  flag_contraction(res.report);
  return res;
}

double default_assa_tau(double eps, int M) {
  return 1e-13 * std::sqrt(static_cast<double>(M)) / eps;
}

SinkhornResult assa_operator(const LinOp& apply, Eigen::Index n,
                             const Eigen::VectorXd& norm_w, double stop_tol,
                             int max_iter) {
  SinkhornResult res = assa_impl(apply, n, norm_w, stop_tol, max_iter, false);
  flag_contraction(res.report);
  return res;
}

SinkhornResult sinkhorn_plain_operator(const LinOp& apply,
                                       const Eigen::VectorXd& u0,
                                       const Eigen::VectorXd& norm_w,
                                       double stop_tol, int max_iter) {
  SinkhornResult res = plain_impl(apply, u0, norm_w, stop_tol, max_iter, false);
  flag_contraction(res.report);
  return res;
}

Eigen::VectorXd NormalizedOperator::apply(const Eigen::VectorXd& x) const {
  return weights.v.array() *
         kernel->apply(weights.u.array() * x.array()).array();
}

Eigen::MatrixXd NormalizedOperator::dense_P() const {
  const int M = size();
  const Eigen::MatrixXd& K = kernel->entries;
  Eigen::MatrixXd P(M, M);
  if (weights.kind == WeightKind::Sinkhorn) {
    // exactly symmetric as stored
    for (int i = 0; i < M; ++i)
      for (int j = i; j < M; ++j)
        P(i, j) = weights.v[i] * K(i, j) * weights.u[j];
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < i; ++j) P(i, j) = P(j, i);
  } else {
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j)
        P(i, j) = weights.v[i] * K(i, j) * weights.u[j];
  }
  return P;
}

NormalizedOperator assemble_P(std::shared_ptr<const KernelMatrix> K,
                              WeightPair weights) {
  if (!K) throw std::invalid_argument("assemble_P: null kernel");
  if (weights.u.size() != K->size() || weights.v.size() != K->size())
    throw std::invalid_argument("assemble_P: weight dimension mismatch");
  NormalizedOperator op{std::move(K), std::move(weights), {}};
  op.row_sums = op.weights.v.array() *
                op.kernel->apply(op.weights.u).array();
  const double dev = (op.row_sums.array() - 1.0).abs().maxCoeff();
  if (dev > 1e-8) {
    std::ostringstream os;
    os << "assemble_P: row sums deviate from 1 by " << dev
       << " (weights inconsistent with K)";
    throw std::runtime_error(os.str());
  }
  return op;
}

SymmetrizedOperator symmetrize(const NormalizedOperator& op) {
  const int M = op.size();
  SymmetrizedOperator out;
  if (op.weights.kind == WeightKind::Sinkhorn) {
    out.S = op.dense_P();
    out.s = Eigen::VectorXd::Ones(M);
    return out;
  }
  const Eigen::VectorXd dsc =
      (op.weights.u.array() * op.weights.v.array()).sqrt();
  out.s = (op.weights.u.array() / op.weights.v.array()).sqrt();
  const Eigen::MatrixXd& K = op.kernel->entries;
  out.S.resize(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = i; j < M; ++j) out.S(i, j) = dsc[i] * K(i, j) * dsc[j];
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < i; ++j) out.S(i, j) = out.S(j, i);
  return out;
}

double theoretical_contraction_bound(double k) {
  if (!(k >= 0.0 && k < 0.1))
    throw std::domain_error("theoretical_contraction_bound: requires 0 <= k < 0.1");
  const double kp = k * std::exp(4.0 * k);
  const double kpp = kp * (2.0 + 0.5 * kp);
  if (!(kpp < 0.375))
    throw std::domain_error("theoretical_contraction_bound: requires k'' < 3/8");
  return 0.125 + kpp;
}

}  // namespace torusdm
