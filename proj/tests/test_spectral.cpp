#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "torusdm/density.hpp"
#include "torusdm/normalization.hpp"
#include "torusdm/rng.hpp"
#include "torusdm/spectral.hpp"

using namespace torusdm;

namespace {

NormalizedOperator make_op(int M, double eps, const NormSpec& norm,
                           std::uint64_t seed, const DensityModel& model) {
  auto Kp = std::make_shared<const KernelMatrix>(
      build_kernel_matrix(model.sample(M, seed), eps));
  WeightPair w = norm.kind == WeightKind::Sinkhorn
                     ? assa(*Kp, eps, default_assa_tau(eps, M)).weights
                     : standard_weights(*Kp, norm.alpha);
  return assemble_P(Kp, std::move(w));
}

}  // namespace

TEST_CASE("symmetric_topk agrees with the dense solver") {
  SplitMix64 rng(1);
  const int n = 220;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = rng.normal();
  // positive semidefinite with decaying spectrum
  Eigen::MatrixXd S = B * B.transpose() / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);

  TopkOptions opts;
  opts.dense_threshold = 50;  // force the subspace path
  const auto top = symmetric_topk(S, 6, opts);
  CHECK(top.converged);
  for (int j = 0; j < 6; ++j) {
    CHECK(top.values[j] ==
          doctest::Approx(es.eigenvalues()[n - 1 - j]).epsilon(1e-11));
    const double res = (S * top.vectors.col(j) - top.values[j] * top.vectors.col(j))
                           .norm();
    CHECK(res < 1e-11 * es.eigenvalues()[n - 1]);
  }
}

TEST_CASE("sinkhorn 2x2 eigendata closed form") {
  KernelMatrix K;
  K.entries = (Eigen::MatrixXd(2, 2) << 2, 1, 1, 2).finished();
  K.points = Eigen::MatrixXd::Zero(2, 1);
  K.eps = 0.5;
  auto Kp = std::make_shared<const KernelMatrix>(std::move(K));
  const auto res = assa(*Kp, 0.5, 1e-13);
  const auto op = assemble_P(Kp, res.weights);
  const auto sr = eigensolve(op, 2);
  CHECK(sr.mu[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sr.mu[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // eigenvectors (1,1) and (1,-1) up to sign, unit in (1/M) sum f^2
  CHECK(std::abs(sr.vectors(0, 0)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sr.vectors(0, 0) == doctest::Approx(sr.vectors(1, 0)).epsilon(1e-10));
  CHECK(sr.vectors(0, 1) == doctest::Approx(-sr.vectors(1, 1)).epsilon(1e-10));
}

TEST_CASE("eigenvalue conversions") {
  CHECK(to_generator(1.0, 0.1) == 0.0);
  CHECK(to_generator(std::exp(-0.2), 0.1) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(to_generator(0.5, 0.01) ==
        doctest::Approx(69.314718055994531).epsilon(1e-15));
  bool flag = false;
  CHECK(std::isinf(to_generator(-1e-12, 0.1, &flag)));
  CHECK(flag);
  CHECK(to_graph_laplacian(1.0, 0.1) == 0.0);
  CHECK(to_graph_laplacian(std::exp(-0.2), 0.1) ==
        doctest::Approx(1.8126924692201814).epsilon(1e-14));

  // round trip and the Taylor bound lambda_tilde <= lambda <= lt + lam^2 eps/2
  for (double mu = 1e-6; mu <= 1.0; mu *= 3.7) {
    const double eps = 0.05;
    const double lam = to_generator(mu, eps);
    CHECK(std::exp(-eps * lam) == doctest::Approx(mu).epsilon(1e-14));
    const double lt = to_graph_laplacian(mu, eps);
    CHECK(lt <= lam + 1e-12);
    CHECK(lam - lt <= 0.5 * lam * lam * eps + 1e-12);
  }
}

TEST_CASE("eigensolve invariants on a sampled operator") {
  auto model = DensityModel::figure1();
  const auto op = make_op(120, 0.02, NormSpec::standard(0.5), 3, model);
  const auto sr = eigensolve(op, 6);

  SUBCASE("markov top eigenpair") {
    CHECK(sr.mu[0] == doctest::Approx(1.0).epsilon(1e-10));
    const double c = sr.vectors.col(0).mean();
    CHECK((sr.vectors.col(0).array() - c).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("sorted, residuals, orthogonality") {
    for (int j = 1; j < 6; ++j) CHECK(sr.mu[j] <= sr.mu[j - 1] + 1e-14);
    for (int j = 0; j < 6; ++j) {
      const Eigen::VectorXd r =
          op.apply(sr.vectors.col(j)) - sr.mu[j] * sr.vectors.col(j);
      CHECK(r.lpNorm<Eigen::Infinity>() <=
            1e-8 * sr.vectors.col(j).lpNorm<Eigen::Infinity>());
    }
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < a; ++b) {
        const double ip = (sr.vectors.col(a).array() * sr.vectors.col(b).array() *
                           sr.ip_weights.array())
                              .sum() /
                          op.size();
        CHECK(std::abs(ip) < 1e-8);
      }
  }
  SUBCASE("lambda and lambda_tilde flags") {
    for (int j = 0; j < 6; ++j) {
      if (!sr.nonpositive_mu[j]) {
        CHECK(sr.lambda[j] == doctest::Approx(-std::log(sr.mu[j]) / 0.02));
        CHECK(sr.lambda_tilde[j] <= sr.lambda[j] + 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(eigensolve(op, 0), std::invalid_argument);
  CHECK_THROWS_AS(eigensolve(op, 121), std::invalid_argument);
}

TEST_CASE("sinkhorn eigenvalues via S equal those via the explicit symmetric P") {
  auto model = DensityModel::figure1();
  const auto op = make_op(90, 0.03, NormSpec::sinkhorn(), 4, model);
  const auto sr = eigensolve(op, 5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense_P());
  for (int j = 0; j < 5; ++j)
    CHECK(sr.mu[j] == doctest::Approx(es.eigenvalues()[89 - j]).epsilon(1e-12));
}

TEST_CASE("standard eigenvalues match a dense nonsymmetric oracle") {
  auto model = DensityModel::figure1();
  for (const double alpha : {0.0, 0.5, 1.0}) {
    const auto op = make_op(50, 0.04, NormSpec::standard(alpha), 5, model);
    const auto sr = eigensolve(op, 50);
    Eigen::EigenSolver<Eigen::MatrixXd> en(op.dense_P());
    Eigen::VectorXd b = en.eigenvalues().real();
    std::sort(b.data(), b.data() + 50, std::greater<double>());
    for (int j = 0; j < 50; ++j)
      CHECK(std::abs(sr.mu[j] - b[j]) < 1e-8);
  }
}

TEST_CASE("merge_by_reference") {
  auto model = DensityModel::uniform(TorusDomain(1, 1.0));
  const auto op = make_op(60, 0.05, NormSpec::sinkhorn(), 6, model);
  const auto sr = eigensolve(op, 5);
  const double l1 = 2 * M_PI * M_PI;
  SUBCASE("torus degeneracy merges the cos/sin pair") {
    const auto clusters =
        merge_by_reference(sr, {{0.0, 1}, {l1, 2}, {4 * l1, 2}}, 1e-6);
    REQUIRE(clusters.size() == 3);
    CHECK(clusters[0].indices == std::vector<int>{0});
    CHECK(clusters[1].indices == std::vector<int>{1, 2});
    CHECK(clusters[2].indices == std::vector<int>{3, 4});
    CHECK(!clusters[0].ambiguous);
  }
  SUBCASE("nondegenerate reference gives singletons") {
    const auto clusters = merge_by_reference(
        sr, {{0.0, 1}, {l1, 1}, {l1 * 1.0000001, 1}}, 1e-12);
    for (const auto& c : clusters) CHECK(c.indices.size() == 1);
  }
  SUBCASE("near-coincident references are flagged ambiguous") {
    const auto clusters = merge_by_reference(
        sr, {{0.0, 1}, {19.0, 1}, {19.0 + 1e-9, 1}}, 1.0);
    CHECK(clusters[1].ambiguous);
  }
}

TEST_CASE("Nystrom extension") {
  auto model = DensityModel::figure1();
  SUBCASE("consistency at the sample points, all normalizations") {
    for (const NormSpec& norm : {NormSpec::sinkhorn(), NormSpec::standard(0.0),
                                 NormSpec::standard(0.5), NormSpec::standard(1.0)}) {
      const auto op = make_op(150, 0.02, norm, 7, model);
      const auto sr = eigensolve(op, 4);
      for (int j = 0; j < 4; ++j) {
        const Eigen::VectorXd ext =
            nystrom_extend(op, sr.mu[j], sr.vectors.col(j), op.kernel->points);
        const double scale = sr.vectors.col(j).lpNorm<Eigen::Infinity>();
        CHECK((ext - sr.vectors.col(j)).lpNorm<Eigen::Infinity>() <=
              1e-8 * scale);
      }
    }
  }
  SUBCASE("constant eigenvector extends to the constant") {
    const auto op = make_op(100, 0.05, NormSpec::sinkhorn(), 8, model);
    const auto sr = eigensolve(op, 1);
    Eigen::MatrixXd q(7, 1);
    for (int i = 0; i < 7; ++i) q(i, 0) = i / 7.0;
    const Eigen::VectorXd ext = nystrom_extend(op, sr.mu[0], sr.vectors.col(0), q);
    const double c = sr.vectors.col(0).mean();
    CHECK((ext.array() - c).abs().maxCoeff() < 1e-8 * std::abs(c));
  }
  SUBCASE("uniform density first eigenvector is a cosine") {
    auto uni = DensityModel::uniform(TorusDomain(1, 1.0));
    const auto op = make_op(2000, 1e-3, NormSpec::sinkhorn(), 9, uni);
    const auto sr = eigensolve(op, 3);
    Eigen::MatrixXd grid(256, 1);
    for (int i = 0; i < 256; ++i) grid(i, 0) = i / 256.0;
    const Eigen::VectorXd f = nystrom_extend(op, sr.mu[1], sr.vectors.col(1), grid);
    // correlation with span{cos, sin} of the fundamental mode
    Eigen::VectorXd c(256), s(256);
    for (int i = 0; i < 256; ++i) {
      c[i] = std::cos(2 * M_PI * i / 256.0);
      s[i] = std::sin(2 * M_PI * i / 256.0);
    }
    const Eigen::VectorXd fc = f.array() - f.mean();
    const double proj = std::sqrt(std::pow(fc.dot(c.normalized()), 2) +
                                  std::pow(fc.dot(s.normalized()), 2));
    CHECK(proj / fc.norm() >= 0.999);
  }
  SUBCASE("small mu is rejected") {
    const auto op = make_op(30, 0.05, NormSpec::sinkhorn(), 10, model);
    const auto sr = eigensolve(op, 1);
    Eigen::MatrixXd q(1, 1);
    q << 0.5;
    CHECK_THROWS_AS(nystrom_extend(op, 1e-9, sr.vectors.col(0), q),
                    std::runtime_error);
  }
}

TEST_CASE("csv and json serialization") {
  auto model = DensityModel::figure1();
  const auto op = make_op(25, 0.05, NormSpec::sinkhorn(), 11, model);
  const auto sr = eigensolve(op, 3);
  std::ostringstream os;
  sr.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("k,mu,lambda,lambda_tilde\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const std::string j = sr.to_json(true);
  CHECK(j.find("\"eigenvectors\"") != std::string::npos);
  CHECK(sr.to_json(false).find("\"eigenvectors\"") == std::string::npos);
}
