#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "torusdm/density.hpp"
#include "torusdm/normalization.hpp"
#include "torusdm/rng.hpp"

using namespace torusdm;

namespace {

KernelMatrix raw_kernel(const Eigen::MatrixXd& entries) {
  KernelMatrix K;
  K.entries = entries;
  K.points = Eigen::MatrixXd::Zero(entries.rows(), 1);
  K.eps = 1.0;
  K.mode = KernelMode::Euclidean;
  return K;
}

KernelMatrix torus_kernel(int M, double eps, std::uint64_t seed) {
  auto m = DensityModel::figure1();
  return build_kernel_matrix(m.sample(M, seed), eps);
}

}  // namespace

TEST_CASE("standard weights") {
  SUBCASE("alpha=0 is the random-walk normalization") {
    const auto K = torus_kernel(40, 0.05, 1);
    const auto w = standard_weights(K, 0.0);
    CHECK(w.u == Eigen::VectorXd::Ones(40));
    CHECK((w.v.array() * K.row_sums().array() - 1.0).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("constant row sums reduce to uniform weights") {
    // equispaced grid points give a circulant kernel with constant K1
    Eigen::MatrixXd p(8, 1);
    for (int i = 0; i < 8; ++i) p(i, 0) = i / 8.0;
    const auto K = build_kernel_matrix(Sample{TorusDomain(1, 1.0), p, 0}, 0.05);
    const auto w = standard_weights(K, 1.0);
    const double c = K.row_sums()[0];
    CHECK((w.u.array() - 1.0 / c).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("2x2 closed form at alpha=1/2") {
    const auto K = raw_kernel((Eigen::MatrixXd(2, 2) << 1.0, 0.5, 0.5, 1.0).finished());
    const auto w = standard_weights(K, 0.5);
    CHECK(w.u[0] == doctest::Approx(0.81649658092772603).epsilon(1e-15));
    CHECK(w.u[1] == w.u[0]);
    const Eigen::VectorXd Ku = K.apply(w.u);
    CHECK((w.v.array() * Ku.array() - 1.0).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("degenerate rows are named") {
    Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(3, 3);
    Z.row(1).setZero();
    Z.col(1).setZero();
    CHECK_THROWS_WITH_AS(standard_weights(raw_kernel(Z), 0.5),
                         doctest::Contains("indices 1"), std::runtime_error);
  }
  CHECK_THROWS_AS(standard_weights(torus_kernel(5, 0.05, 2), 1.5),
                  std::invalid_argument);
}

TEST_CASE("plain Sinkhorn iteration") {
  SUBCASE("1x1 exact fixed point after one averaging") {
    const auto K = raw_kernel(Eigen::MatrixXd::Constant(1, 1, 4.0));
    const auto res = sinkhorn_plain(K, Eigen::VectorXd::Ones(1), 1e-14);
    CHECK(res.report.converged);
    CHECK(res.report.iterations == 1);
    CHECK(res.weights.u[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("symmetric 2x2 forces equal entries") {
    const auto K = raw_kernel((Eigen::MatrixXd(2, 2) << 2, 1, 1, 2).finished());
    const auto res = sinkhorn_plain(K, Eigen::VectorXd::Ones(2), 1e-13);
    CHECK(res.report.converged);
    CHECK(res.weights.u[0] == doctest::Approx(0.57735026918962576).epsilon(1e-13));
    CHECK(res.weights.u[1] == doctest::Approx(0.57735026918962576).epsilon(1e-13));
  }
  SUBCASE("asymmetric fixed point, closed form") {
    const auto K = raw_kernel((Eigen::MatrixXd(2, 2) << 4, 1, 1, 1).finished());
    const auto res = sinkhorn_plain(K, Eigen::VectorXd::Ones(2), 1e-13);
    CHECK(res.weights.u[0] == doctest::Approx(0.40824829046386302).epsilon(1e-12));
    CHECK(res.weights.u[1] == doctest::Approx(0.81649658092772603).epsilon(1e-12));
  }
  SUBCASE("exhausting max_iter reports rather than throws") {
    const auto K = torus_kernel(60, 0.01, 3);
    const auto res = sinkhorn_plain(K, Eigen::VectorXd::Ones(60), 1e-13, 3);
    CHECK(!res.report.converged);
    CHECK(res.report.iterations == 3);
  }
  CHECK_THROWS_AS(
      sinkhorn_plain(torus_kernel(5, 0.05, 2), -Eigen::VectorXd::Ones(5), 1e-10),
      std::invalid_argument);
}

TEST_CASE("ASSA") {
  SUBCASE("1x1 initialization is already exact") {
    const auto K = raw_kernel(Eigen::MatrixXd::Constant(1, 1, 4.0));
    const auto res = assa(K, 1.0, 1e-13);
    CHECK(res.report.converged);
    CHECK(res.report.iterations == 1);
    CHECK(res.weights.u[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("2x2 converges in a few iterations") {
    const auto K = raw_kernel((Eigen::MatrixXd(2, 2) << 2, 1, 1, 2).finished());
    const auto res = assa(K, 1.0, 1e-13);
    CHECK(res.report.converged);
    CHECK(res.report.iterations <= 5);
    CHECK(res.weights.u[0] == doctest::Approx(0.57735026918962576).epsilon(1e-13));
    CHECK(res.report.residual_trace.back() < 1e-13);
  }
  SUBCASE("500-point torus sample converges quickly") {
    const auto K = torus_kernel(500, 0.02, 4);
    const auto res = assa(K, 0.02, default_assa_tau(0.02, 500));
    CHECK(res.report.converged);
    CHECK(res.report.iterations <= 60);  // around 40 is typical
    CHECK(res.report.fixed_point_residual <= 1e-10);
  }
  SUBCASE("scale invariance: cK maps u to u/sqrt(c)") {
    const auto K = torus_kernel(80, 0.05, 5);
    KernelMatrix K3 = K;
    K3.entries *= 3.0;
    const auto a = assa(K, 0.05, 1e-11 / 0.05);
    const auto b = assa(K3, 0.05, 1e-11 / 0.05);
    CHECK(((b.weights.u.array() * std::sqrt(3.0)) / a.weights.u.array() - 1.0)
              .abs()
              .maxCoeff() < 1e-9);
    // P is unchanged entrywise
    const auto Pa = assemble_P(std::make_shared<const KernelMatrix>(K), a.weights)
                        .dense_P();
    const auto Pb = assemble_P(std::make_shared<const KernelMatrix>(K3), b.weights)
                        .dense_P();
    CHECK((Pa - Pb).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("agrees with plain Sinkhorn") {
    const auto K = torus_kernel(120, 0.03, 6);
    const auto a = assa(K, 0.03, default_assa_tau(0.03, 120));
    const auto p = sinkhorn_plain(K, Eigen::VectorXd::Ones(120), 1e-13);
    CHECK((a.weights.u.array() / p.weights.u.array() - 1.0).abs().maxCoeff() <
          1e-9);
  }
  SUBCASE("doubly stochastic fixed point") {
    const auto K = torus_kernel(100, 0.04, 7);
    const auto res = assa(K, 0.04, default_assa_tau(0.04, 100));
    CHECK(res.report.fixed_point_residual <= 1e-10);
    const auto op =
        assemble_P(std::make_shared<const KernelMatrix>(K), res.weights);
    CHECK((op.row_sums.array() - 1.0).abs().maxCoeff() <= 1e-10);
    // for the symmetric form, column sums equal row sums
    const Eigen::MatrixXd P = op.dense_P();
    CHECK((P.colwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-10);
  }
  SUBCASE("residual trace decreases after the first iterations") {
    Eigen::MatrixXd pts(90, 2);
    SplitMix64 rng(9);
    for (int i = 0; i < 90; ++i)
      for (int j = 0; j < 2; ++j) pts(i, j) = rng.normal();
    const auto K = build_kernel_matrix_euclidean(pts, 0.5);  // PSD kernel
    const auto res = assa(K, 0.5, 1e-13 / 0.5);
    const auto& t = res.report.residual_trace;
    for (std::size_t i = 3; i + 1 < t.size(); ++i) CHECK(t[i + 1] <= t[i]);
    CHECK(res.report.tail_contraction(1e-4) <= 0.2);
  }
  SUBCASE("stopping condition is sound") {
    const auto K = torus_kernel(150, 0.05, 10);
    const auto coarse = assa(K, 0.05, 1e-8 / 0.05);
    const auto fine = assa(K, 0.05, 1e-15 / 0.05, 500);  // runs to the floor
    const double true_err =
        (coarse.weights.u.array() / fine.weights.u.array()).log().matrix().norm();
    CHECK(true_err <= 1.2 * coarse.report.residual_trace.back());
  }
}

TEST_CASE("log-domain fallback for underflowing kernels") {
  const auto K = raw_kernel(Eigen::MatrixXd::Constant(2, 2, 1e-310));
  const auto res = assa(K, 1.0, 1e-12);
  CHECK(res.report.converged);
  CHECK(res.weights.u[0] == doctest::Approx(1.0 / std::sqrt(2e-310)).epsilon(1e-10));
  CHECK(res.report.fixed_point_residual < 1e-10);
  const auto pl = sinkhorn_plain(K, Eigen::VectorXd::Ones(2), 1e-12);
  CHECK(pl.weights.u[0] == doctest::Approx(1.0 / std::sqrt(2e-310)).epsilon(1e-10));
}

TEST_CASE("assemble_P and symmetrize") {
  SUBCASE("sinkhorn 2x2 gives the doubly stochastic closed form") {
    const auto Kp = std::make_shared<const KernelMatrix>(
        raw_kernel((Eigen::MatrixXd(2, 2) << 2, 1, 1, 2).finished()));
    const auto res = assa(*Kp, 1.0, 1e-14);
    const auto op = assemble_P(Kp, res.weights);
    const Eigen::MatrixXd P = op.dense_P();
    CHECK(P(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(P(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // S == P exactly for sinkhorn weights
    const auto sym = symmetrize(op);
    CHECK(sym.S == P);
    CHECK(sym.s == Eigen::VectorXd::Ones(2));
  }
  SUBCASE("row sums and the mismatch guard") {
    const auto Kp =
        std::make_shared<const KernelMatrix>(torus_kernel(50, 0.05, 12));
    auto w = standard_weights(*Kp, 0.5);
    const auto op = assemble_P(Kp, w);
    CHECK((op.row_sums.array() - 1.0).abs().maxCoeff() < 1e-10);
    w.u *= 1.5;  // now inconsistent with v
    CHECK_THROWS_AS(assemble_P(Kp, w), std::runtime_error);
  }
  SUBCASE("symmetrized operator matches a nonsymmetric eigensolve") {
    const auto Kp =
        std::make_shared<const KernelMatrix>(torus_kernel(50, 0.03, 13));
    const auto op = assemble_P(Kp, standard_weights(*Kp, 0.5));
    const auto sym = symmetrize(op);
    CHECK(sym.S == Eigen::MatrixXd(sym.S.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym.S);
    Eigen::EigenSolver<Eigen::MatrixXd> en(op.dense_P());
    Eigen::VectorXd a = es.eigenvalues(), b = en.eigenvalues().real();
    std::sort(a.data(), a.data() + a.size());
    std::sort(b.data(), b.data() + b.size());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("theoretical contraction bound") {
  CHECK(theoretical_contraction_bound(0.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(theoretical_contraction_bound(1e-12) == doctest::Approx(0.125).epsilon(1e-9));
  CHECK(theoretical_contraction_bound(0.01) ==
        doctest::Approx(0.14587037983723151).epsilon(1e-14));
  CHECK(theoretical_contraction_bound(0.05) ==
        doctest::Approx(0.24900505668806857).epsilon(1e-14));
  CHECK_THROWS_AS(theoretical_contraction_bound(0.1), std::domain_error);
  CHECK_THROWS_AS(theoretical_contraction_bound(-0.01), std::domain_error);
}
