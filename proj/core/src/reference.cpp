#include "torusdm/reference.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include <json.hpp>

#include "torusdm/rng.hpp"
#include "torusdm/spectral.hpp"
#include "torusdm/torus.hpp"

namespace torusdm {

namespace {

using Complex = std::complex<double>;

constexpr double kClusterTolRel = 1e-7;

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

// Fourier coefficients of grid samples, reindexed to signed lags:
// lag(l) for l in [-maxlag, maxlag].
struct LagCoeffs {
  Eigen::VectorXcd c;  // DFT/n, index 0..n-1
  int n;
  Complex lag(int l) const { return c[((l % n) + n) % n]; }
};

LagCoeffs grid_coeffs(const Eigen::VectorXd& vals) {
  LagCoeffs lc;
  lc.c = dft_forward(vals);
  lc.n = static_cast<int>(vals.size());
  return lc;
}

Eigen::MatrixXcd toeplitz(const LagCoeffs& f, int m) {
  const int n = 2 * m + 1;
  Eigen::MatrixXcd T(n, n);
  for (int j = -m; j <= m; ++j)
    for (int k = -m; k <= m; ++k) T(j + m, k + m) = f.lag(j - k);
  return T;
}

// Hermitian analogue of symmetric_topk for the shift-inverted generator.
struct HermTopk {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
  bool converged = false;
};

HermTopk hermitian_topk(
    const std::function<Eigen::MatrixXcd(const Eigen::MatrixXcd&)>& apply,
    Eigen::Index n, int k, int block, int max_iter, double tol) {
  SplitMix64 rng(0xfadedfeedULL);
  const int b = static_cast<int>(std::min<Eigen::Index>(block, n));
  Eigen::MatrixXcd X(n, b);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < b; ++j) X(i, j) = Complex(rng.normal(), rng.normal());
  X = Eigen::HouseholderQR<Eigen::MatrixXcd>(X).householderQ() *
      Eigen::MatrixXcd::Identity(n, b);

  HermTopk out;
  Eigen::MatrixXcd ritz;
  Eigen::VectorXd theta;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::MatrixXcd Z = apply(X);
    Eigen::MatrixXcd H = X.adjoint() * Z;
    H = Complex(0.5, 0.0) * (H + H.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("hermitian_topk: Rayleigh-Ritz solve failed");
    theta.resize(b);
    Eigen::MatrixXcd W(b, b);
    for (int j = 0; j < b; ++j) {
      theta[j] = es.eigenvalues()[b - 1 - j];
      W.col(j) = es.eigenvectors().col(b - 1 - j);
    }
    const Eigen::MatrixXcd ZW = Z * W;
    ritz = X * W;
    const double scale = std::max(std::abs(theta[0]), 1e-300);
    bool ok = it >= 2;
    for (int j = 0; j < k && ok; ++j) {
      const double res = (ZW.col(j) - theta[j] * ritz.col(j)).norm();
      if (res > tol * scale) ok = false;
    }
    if (ok) {
      out.converged = true;
      break;
    }
    X = Eigen::HouseholderQR<Eigen::MatrixXcd>(ZW).householderQ() *
        Eigen::MatrixXcd::Identity(n, b);
  }
  out.values = theta.head(k);
  out.vectors = ritz.leftCols(k);
  return out;
}

// Real span of a cluster of complex coefficient vectors (wavenumber layout),
// as orthonormal trig series under the Parseval inner product.
std::vector<TrigSeries> realify_cluster(const Eigen::MatrixXcd& psi, double L) {
  const int n = static_cast<int>(psi.rows());  // 2m+1
  const int m = n / 2;
  const int r = static_cast<int>(psi.cols());
  // Parameter coordinates [a0, acos/sqrt2, bsin/sqrt2] are orthonormal in
  // L^2(dx/L), so a plain SVD orthonormalises the span.
  Eigen::MatrixXd C(n, 2 * r);
  for (int c = 0; c < r; ++c) {
    Eigen::VectorXcd re(n), im(n);
    for (int k = -m; k <= m; ++k) {
      const Complex a = psi(k + m, c);
      const Complex bconj = std::conj(psi(-k + m, c));
      re[k + m] = 0.5 * (a + bconj);
      im[k + m] = Complex(0.0, -0.5) * (a - bconj);
    }
    const TrigSeries fre = trig_from_complex(re, L);
    const TrigSeries fim = trig_from_complex(im, L);
    for (const auto* f : {&fre, &fim}) {
      const int col = c * 2 + (f == &fim ? 1 : 0);
      C(0, col) = f->a0;
      for (int k = 1; k <= m; ++k) {
        C(k, col) = f->acos[k - 1] * M_SQRT1_2;
        C(m + k, col) = f->bsin[k - 1] * M_SQRT1_2;
      }
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU);
  std::vector<TrigSeries> out;
  for (int c = 0; c < r; ++c) {
    const Eigen::VectorXd q = svd.matrixU().col(c);
    TrigSeries f;
    f.L = L;
    f.a0 = q[0];
    f.acos = q.segment(1, m) / M_SQRT1_2;
    f.bsin = q.segment(1 + m, m) / M_SQRT1_2;
    out.push_back(f.truncated(1e-14));
  }
  return out;
}

std::vector<std::pair<double, int>> cluster_eigenvalues(
    const Eigen::VectorXd& lambdas_ascending) {
  std::vector<std::pair<double, int>> out;
  for (Eigen::Index i = 0; i < lambdas_ascending.size(); ++i) {
    const double lam = lambdas_ascending[i];
    if (!out.empty() &&
        std::abs(lam - out.back().first) <=
            kClusterTolRel * std::max(1.0, std::abs(out.back().first))) {
      // running mean keeps the cluster value stable
      auto& [v, c] = out.back();
      v = (v * c + lam) / (c + 1);
      ++c;
    } else {
      out.emplace_back(lam, 1);
    }
  }
  // the final cluster touches the computed window and may be truncated
  if (out.size() > 1) out.pop_back();
  return out;
}

int buffered_count(int n_eigs) { return n_eigs + 4; }

}  // namespace

Eigen::VectorXcd trig_to_complex(const TrigSeries& f, int max_mode) {
  const int m = max_mode;
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2 * m + 1);
  c[m] = f.a0;
  for (int k = 1; k <= std::min(m, f.modes()); ++k) {
    c[m + k] = 0.5 * Complex(f.acos[k - 1], -f.bsin[k - 1]);
    c[m - k] = 0.5 * Complex(f.acos[k - 1], f.bsin[k - 1]);
  }
  return c;
}

TrigSeries FourierOperator::apply(const TrigSeries& f) const {
  const Eigen::VectorXcd c = trig_to_complex(f, max_mode());
  return trig_from_complex(matrix * c, L);
}

FourierOperator generator_matrix(const AxisDensity& rho, int n_modes,
                                 GeneratorKind kind, double alpha,
                                 double drift_tail_tol) {
  if (n_modes < 3 || n_modes % 2 == 0)
    throw std::invalid_argument("generator_matrix: n_modes must be odd and >= 3");
  const double alpha_eff = kind == GeneratorKind::Langevin ? 0.5 : alpha;
  if (!(alpha_eff >= 0.0 && alpha_eff <= 1.0))
    throw std::invalid_argument("generator_matrix: alpha must lie in [0,1]");
  const int m = n_modes / 2;
  const double L = rho.length();
  const int n_fft = next_pow2(std::max(4 * m + 2, 4096));

  Eigen::VectorXd drift(n_fft);
  for (int i = 0; i < n_fft; ++i)
    drift[i] = (1.0 - alpha_eff) * rho.dlog(L * i / n_fft);
  const LagCoeffs dc = grid_coeffs(drift);

  // resolution check: the represented drift tail must have decayed
  double peak = 0.0, tail = 0.0;
  for (int l = 0; l <= m; ++l) peak = std::max(peak, std::abs(dc.lag(l)));
  for (int l = (9 * m) / 10; l <= m; ++l) tail = std::max(tail, std::abs(dc.lag(l)));
  if (peak > 0.0 && tail > drift_tail_tol * peak) {
    std::ostringstream os;
    os << "generator_matrix: drift coefficients have not decayed within the "
          "mode window (tail/peak = "
       << tail / peak << ", tol = " << drift_tail_tol << ")";
    throw std::runtime_error(os.str());
  }

  FourierOperator op;
  op.n_modes = n_modes;
  op.L = L;
  {
    std::ostringstream os;
    os << (kind == GeneratorKind::Langevin ? "generator(langevin)"
                                           : "generator(standard,alpha=");
    if (kind == GeneratorKind::Standard) os << alpha << ")";
    op.descriptor = os.str();
  }
  op.matrix = toeplitz(dc, m);
  const double w0 = 2.0 * M_PI / L;
  for (int k = -m; k <= m; ++k)
    op.matrix.col(k + m) *= Complex(0.0, w0 * k);
  for (int k = -m; k <= m; ++k)
    op.matrix(k + m, k + m) -= 0.5 * w0 * w0 * double(k) * double(k);
  return op;
}

ReferenceEigendata generator_reference(const AxisDensity& rho, int n_eigs,
                                       GeneratorKind kind, double alpha,
                                       int n_modes) {
  if (n_modes < 3 || n_modes % 2 == 0)
    throw std::invalid_argument("generator_reference: n_modes must be odd");
  if (n_eigs < 1) throw std::invalid_argument("generator_reference: n_eigs >= 1");
  const double alpha_eff = kind == GeneratorKind::Langevin ? 0.5 : alpha;
  const int m = n_modes / 2;
  const double L = rho.length();
  const int n_fft = next_pow2(std::max(4 * m + 2, 4096));

  // Divergence form: A = ½ T_h D T_w D T_h with w = rho^{2-2a}, h = w^{-1/2};
  // Hermitian and negative semidefinite, similar to the generator by
  // conjugation with w^{1/2}.
  Eigen::VectorXd w_grid(n_fft), h_grid(n_fft);
  for (int i = 0; i < n_fft; ++i) {
    const double r = rho.eval(L * i / n_fft);
    w_grid[i] = std::pow(r, 2.0 - 2.0 * alpha_eff);
    h_grid[i] = 1.0 / std::sqrt(w_grid[i]);
  }
  const Eigen::MatrixXcd Tw = toeplitz(grid_coeffs(w_grid), m);
  const Eigen::MatrixXcd Th = toeplitz(grid_coeffs(h_grid), m);
  const int n = 2 * m + 1;
  Eigen::VectorXcd D(n);
  const double w0 = 2.0 * M_PI / L;
  for (int k = -m; k <= m; ++k) D[k + m] = Complex(0.0, w0 * k);

  Eigen::MatrixXcd A = D.asDiagonal() * Th;
  A = Tw * A;
  A = D.asDiagonal() * A;
  A = Complex(0.5, 0.0) * (Th * A);
  A = Complex(0.5, 0.0) * (A + A.adjoint()).eval();

  // Shift-invert: B = (I - A)^{-1} is Hermitian positive definite with
  // spectrum 1/(1+lambda); its top block gives the smallest lambda.
  Eigen::MatrixXcd B = -A;
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXcd> llt(B);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("generator_reference: factorisation failed");

  const int want = buffered_count(n_eigs);
  const int block = std::min(n, std::max(2 * want + 8, want + 12));
  auto apply = [&llt](const Eigen::MatrixXcd& X) { return llt.solve(X); };
  HermTopk top = hermitian_topk(apply, n, want, block, 300, 1e-13);
  if (!top.converged)
    throw std::runtime_error("generator_reference: eigensolver did not converge");

  // Rayleigh polish in the original variable
  Eigen::VectorXd lambdas(want);
  for (int j = 0; j < want; ++j) {
    const Eigen::VectorXcd psi = top.vectors.col(j);
    lambdas[j] = -(psi.adjoint() * (A * psi))(0, 0).real() / psi.squaredNorm();
  }

  ReferenceEigendata ref;
  ref.L = L;
  ref.d = 1;
  ref.resolution = n_modes;
  ref.eps = 0.0;
  ref.raw_lambda = lambdas;
  {
    std::ostringstream os;
    os << "generator("
       << (kind == GeneratorKind::Langevin ? std::string("langevin")
                                           : "standard alpha=" + std::to_string(alpha))
       << ", n_modes=" << n_modes << ")";
    ref.source_desc = os.str();
  }

  const auto clusters = cluster_eigenvalues(lambdas);
  int available = 0;
  for (const auto& [lam, mult] : clusters) available += mult;
  if (available < n_eigs)
    throw std::runtime_error(
        "generator_reference: eigenvalue clusters truncated; request fewer or "
        "raise the internal buffer");
  int consumed = 0, kept = 0;
  for (const auto& [lam, mult] : clusters) {
    if (kept >= n_eigs) break;
    RefCluster rc;
    rc.lambda = lam;
    rc.multiplicity = mult;
    // real span of the cluster's complex eigenvectors
    Eigen::MatrixXcd psi(n, mult);
    for (int c = 0; c < mult; ++c) psi.col(c) = top.vectors.col(consumed + c);
    const auto series = realify_cluster(psi, L);
    for (const auto& s : series) {
      // eigenfunction of the generator: multiply back by h = w^{-1/2}
      Eigen::VectorXd vals = s.tabulate(n_fft);
      vals.array() *= h_grid.array();
      RefEigenfunction ef;
      ef.factors.push_back(trig_from_grid(vals, L).truncated(1e-13));
      rc.basis.push_back(std::move(ef));
    }
    consumed += mult;
    kept += mult;
    ref.clusters.push_back(std::move(rc));
  }
  return ref;
}

ContinuumOperator continuum_operator(const AxisDensity& rho, double eps,
                                     int n_grid, const NormSpec& norm,
                                     double sinkhorn_tol, int sinkhorn_max_iter) {
  if (n_grid < 8) throw std::invalid_argument("continuum_operator: grid too small");
  if (!(eps > 0.0)) throw std::invalid_argument("continuum_operator: eps must be positive");
  const double L = rho.length();
  const TorusDomain dom1(1, L);
  const int J = choose_truncation(dom1, eps, kKernelTruncationTol);
  const double gnorm = std::pow(2.0 * M_PI * eps, -0.5);

  Eigen::VectorXd mu(n_grid), gcol(n_grid);
  for (int i = 0; i < n_grid; ++i) {
    const double x = L * i / n_grid;
    mu[i] = rho.eval(x) * L / n_grid;
    double t = x;
    if (t > 0.5 * L) t -= L;
    gcol[i] = gnorm * detail::periodized_axis_sum(t, L, eps, J);
  }

  ContinuumOperator op;
  op.eps = eps;
  op.L = L;
  op.norm = norm;
  op.quad_weights = mu;

  // circulant kernel times the quadrature measure: K = G diag(mu)
  Eigen::MatrixXd KK(n_grid, n_grid);
  for (int i = 0; i < n_grid; ++i)
    for (int j = 0; j < n_grid; ++j)
      KK(i, j) = gcol[(i - j + n_grid) % n_grid] * mu[j];

  if (norm.kind == WeightKind::Sinkhorn) {
    LinOp apply = [&KK](const Eigen::VectorXd& x) { return KK * x; };
    SinkhornResult sr = assa_operator(apply, n_grid, mu, sinkhorn_tol,
                                      sinkhorn_max_iter);
    if (!sr.report.converged)
      throw std::runtime_error(
          "continuum_operator: ASSA did not converge on the continuum kernel");
    op.u = sr.weights.u;
    op.v = sr.weights.u;
    op.sinkhorn_report = std::move(sr.report);
  } else {
    const Eigen::VectorXd k1 = KK.rowwise().sum();
    if (!(k1.minCoeff() > 0.0))
      throw std::runtime_error("continuum_operator: degenerate kernel row");
    op.u = k1.array().pow(-norm.alpha);
    op.v = (KK * op.u).cwiseInverse();
  }

  op.P = op.v.asDiagonal() * KK * op.u.asDiagonal();
  op.sym_scale =
      (op.u.array() * op.quad_weights.array() / op.v.array()).sqrt();
  const double dev = ((op.P.rowwise().sum()).array() - 1.0).abs().maxCoeff();
  if (dev > 1e-8)
    throw std::runtime_error("continuum_operator: row sums deviate from 1");

  op.gcol = gcol;
  return op;
}

Eigen::MatrixXd ContinuumOperator::symmetric_form() const {
  const int n = size();
  // S_ij = c_i G_ij c_j with c = sqrt(u mu v); symmetric as stored.
  const Eigen::VectorXd c =
      (u.array() * quad_weights.array() * v.array()).sqrt();
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      S(i, j) = c[i] * gcol[(i - j + n) % n] * c[j];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) S(i, j) = S(j, i);
  return S;
}

ReferenceEigendata continuum_reference(const AxisDensity& rho, int n_eigs,
                                       double eps, const NormSpec& norm,
                                       int n_grid) {
  ContinuumOperator op = continuum_operator(rho, eps, n_grid, norm);
  const int want = std::min(n_grid, buffered_count(n_eigs));
  TopkOptions topts;
  topts.tol = 1e-13;
  TopkResult top = symmetric_topk(op.symmetric_form(), want, topts);
  if (!top.converged)
    throw std::runtime_error("continuum_reference: eigensolver did not converge");

  Eigen::VectorXd lambdas(want);
  for (int j = 0; j < want; ++j) {
    const double mu = top.values[j];
    if (!(mu > 0.0))
      throw std::runtime_error("continuum_reference: nonpositive semigroup eigenvalue");
    lambdas[j] = -std::log(mu) / eps;
  }

  ReferenceEigendata ref;
  ref.L = op.L;
  ref.d = 1;
  ref.resolution = n_grid;
  ref.eps = eps;
  ref.raw_lambda = lambdas;
  {
    std::ostringstream os;
    os << "continuum(eps=" << eps << ", " << norm.name() << ", n_grid=" << n_grid
       << ")";
    ref.source_desc = os.str();
  }

  const auto clusters = cluster_eigenvalues(lambdas);
  int available = 0;
  for (const auto& [lam, mult] : clusters) available += mult;
  if (available < n_eigs)
    throw std::runtime_error(
        "continuum_reference: eigenvalue clusters truncated; request fewer or "
        "raise the internal buffer");
  int consumed = 0, kept = 0;
  for (const auto& [lam, mult] : clusters) {
    if (kept >= n_eigs) break;
    RefCluster rc;
    rc.lambda = lam;
    rc.multiplicity = mult;
    for (int c = 0; c < mult; ++c) {
      // P-eigenfunction on the grid: psi / s
      Eigen::VectorXd vals =
          top.vectors.col(consumed + c).array() / op.sym_scale.array();
      RefEigenfunction ef;
      ef.factors.push_back(trig_from_grid(vals, op.L).truncated(1e-12));
      rc.basis.push_back(std::move(ef));
    }
    consumed += mult;
    kept += mult;
    ref.clusters.push_back(std::move(rc));
  }
  return ref;
}

double RefEigenfunction::eval(const Eigen::VectorXd& x) const {
  double v = 1.0;
  for (std::size_t i = 0; i < factors.size(); ++i) v *= factors[i].eval(x[i]);
  return v;
}

Eigen::VectorXd RefEigenfunction::eval_points(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != factors.size())
    throw std::invalid_argument("RefEigenfunction: dimension mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Ones(X.rows());
  for (std::size_t i = 0; i < factors.size(); ++i)
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      out[r] *= factors[i].eval(X(r, static_cast<Eigen::Index>(i)));
  return out;
}

int ReferenceEigendata::total_count() const {
  int c = 0;
  for (const auto& cl : clusters) c += cl.multiplicity;
  return c;
}

std::vector<std::pair<double, int>> ReferenceEigendata::lambda_mult() const {
  std::vector<std::pair<double, int>> out;
  for (const auto& cl : clusters) out.emplace_back(cl.lambda, cl.multiplicity);
  return out;
}

Eigen::MatrixXd ReferenceEigendata::cluster_values(
    int c, const Eigen::MatrixXd& X) const {
  const auto& cl = clusters.at(c);
  Eigen::MatrixXd out(X.rows(), cl.basis.size());
  for (std::size_t b = 0; b < cl.basis.size(); ++b)
    out.col(static_cast<Eigen::Index>(b)) = cl.basis[b].eval_points(X);
  return out;
}

std::string ReferenceEigendata::to_json() const {
  nlohmann::json j;
  j["provenance"] = {{"density", density_desc},
                     {"source", source_desc},
                     {"resolution", resolution},
                     {"eps", eps},
                     {"L", L},
                     {"d", d}};
  nlohmann::json cl = nlohmann::json::array();
  for (const auto& c : clusters)
    cl.push_back({{"lambda", c.lambda}, {"multiplicity", c.multiplicity}});
  j["clusters"] = cl;
  return j.dump(2);
}

ReferenceEigendata tensor_reference(const std::vector<ReferenceEigendata>& axes,
                                    int n_eigs) {
  if (axes.empty()) throw std::invalid_argument("tensor_reference: no axes");
  if (n_eigs < 1) throw std::invalid_argument("tensor_reference: n_eigs >= 1");
  const double L = axes[0].L;
  for (const auto& a : axes) {
    if (a.d != 1)
      throw std::invalid_argument("tensor_reference: axes must be 1-D");
    if (a.L != L)
      throw std::invalid_argument("tensor_reference: domain lengths differ");
  }
  const int d = static_cast<int>(axes.size());

  // enumerate all available index tuples (the per-axis lists are short)
  struct Tuple {
    double lambda;
    std::vector<int> idx;
  };
  std::vector<Tuple> tuples;
  std::vector<int> idx(d, 0);
  const auto push = [&](auto&& self, int axis, double lam) -> void {
    if (axis == d) {
      tuples.push_back({lam, idx});
      return;
    }
    for (int c = 0; c < static_cast<int>(axes[axis].clusters.size()); ++c) {
      idx[axis] = c;
      self(self, axis + 1, lam + axes[axis].clusters[c].lambda);
    }
  };
  push(push, 0, 0.0);
  std::sort(tuples.begin(), tuples.end(),
            [](const Tuple& a, const Tuple& b) { return a.lambda < b.lambda; });

  ReferenceEigendata ref;
  ref.L = L;
  ref.d = d;
  ref.eps = axes[0].eps;
  ref.resolution = axes[0].resolution;
  {
    std::ostringstream os;
    os << "tensor[" << axes[0].source_desc << " x" << d << "]";
    ref.source_desc = os.str();
  }

  int kept = 0;
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    const double lam = tuples[t].lambda;
    const bool merge =
        !ref.clusters.empty() &&
        std::abs(lam - ref.clusters.back().lambda) <=
            kClusterTolRel * std::max(1.0, std::abs(ref.clusters.back().lambda));
    if (!merge && kept >= n_eigs) break;  // stop only at cluster boundaries
    if (!merge) ref.clusters.push_back(RefCluster{lam, 0, {}});
    RefCluster& rc = ref.clusters.back();
    // product basis of the per-axis cluster bases
    std::vector<const RefCluster*> parts(d);
    for (int a = 0; a < d; ++a)
      parts[a] = &axes[a].clusters[tuples[t].idx[a]];
    std::vector<int> bpos(d, 0);
    while (true) {
      RefEigenfunction ef;
      for (int a = 0; a < d; ++a)
        ef.factors.push_back(parts[a]->basis.at(bpos[a]).factors.at(0));
      rc.basis.push_back(std::move(ef));
      ++rc.multiplicity;
      ++kept;
      int a = d - 1;
      while (a >= 0 && ++bpos[a] == static_cast<int>(parts[a]->basis.size())) {
        bpos[a] = 0;
        --a;
      }
      if (a < 0) break;
    }
  }

  // raw eigenvalue sums over all per-axis raw values, for error tables
  {
    std::vector<double> sums{0.0};
    for (const auto& a : axes) {
      std::vector<double> next;
      next.reserve(sums.size() * a.raw_lambda.size());
      for (const double s0 : sums)
        for (Eigen::Index i = 0; i < a.raw_lambda.size(); ++i)
          next.push_back(s0 + a.raw_lambda[i]);
      sums.swap(next);
    }
    std::sort(sums.begin(), sums.end());
    ref.raw_lambda =
        Eigen::Map<Eigen::VectorXd>(sums.data(), static_cast<Eigen::Index>(sums.size()));
  }

  // the enumeration must not have been truncated by short per-axis lists
  double axis_top = std::numeric_limits<double>::infinity();
  for (const auto& a : axes)
    axis_top = std::min(axis_top, a.clusters.back().lambda);
  if (!ref.clusters.empty() && ref.clusters.back().lambda >= axis_top)
    throw std::runtime_error(
        "tensor_reference: per-axis references too short for requested count");
  return ref;
}

}  // namespace torusdm
