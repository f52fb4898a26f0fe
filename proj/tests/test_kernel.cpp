#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <Eigen/Dense>

#include "torusdm/density.hpp"
#include "torusdm/kernel.hpp"
#include "torusdm/rng.hpp"

using namespace torusdm;

namespace {

Sample make_sample(const Eigen::MatrixXd& pts, double L) {
  return Sample{TorusDomain(static_cast<int>(pts.cols()), L), pts, 0};
}

}  // namespace

TEST_CASE("single point kernel matrix") {
  Eigen::MatrixXd p(1, 1);
  p << 0.4;
  const auto K = build_kernel_matrix(make_sample(p, 1.0), 0.01);
  CHECK(K.entries(0, 0) == doctest::Approx(3.9894228040143268).epsilon(1e-14));
}

TEST_CASE("antipodal pair on the unit torus") {
  Eigen::MatrixXd p(2, 1);
  p << 0.1, 0.6;
  const auto K = build_kernel_matrix(make_sample(p, 1.0), 0.1);
  // (1/2) g_{0.1,1}(0.5), periodised series
  CHECK(K.entries(0, 1) == doctest::Approx(0.36146119490426365).epsilon(1e-13));
  CHECK(K.entries(0, 0) == K.entries(1, 1));
}

TEST_CASE("symmetry and apply") {
  auto m = DensityModel::figure1();
  const auto s = m.sample(80, 21);
  const auto K = build_kernel_matrix(s, 0.02);
  SUBCASE("exactly symmetric as stored") {
    CHECK(K.entries == Eigen::MatrixXd(K.entries.transpose()));
    CHECK((K.entries.array() > 0.0).all());
  }
  SUBCASE("K*0 and the kernel density estimate") {
    CHECK(K.apply(Eigen::VectorXd::Zero(80)).norm() == 0.0);
    const Eigen::VectorXd kde = K.apply(Eigen::VectorXd::Ones(80));
    CHECK(kde.isApprox(K.row_sums(), 1e-14));
    CHECK(kde.minCoeff() > 0.0);
  }
  SUBCASE("adjoint identity") {
    SplitMix64 rng(2);
    Eigen::VectorXd v(80), w(80);
    for (int i = 0; i < 80; ++i) {
      v[i] = rng.normal();
      w[i] = rng.normal();
    }
    const double a = K.apply(v).dot(w), b = v.dot(K.apply(w));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  CHECK_THROWS_AS(K.apply(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("out-of-sample rows reproduce kernel rows exactly") {
  auto m = DensityModel::figure1();
  const auto s = m.sample(40, 5);
  const auto K = build_kernel_matrix(s, 0.05);
  for (int j = 0; j < 40; j += 7) {
    const Eigen::VectorXd r = out_of_sample_row(K, s.points.row(j).transpose());
    CHECK(r == K.entries.row(j).transpose());
  }
  // far query at small eps underflows to zero, returned as computed
  Eigen::MatrixXd p(2, 1);
  p << 0.0, 0.02;
  const auto Ke = build_kernel_matrix_euclidean(
      (Eigen::MatrixXd(2, 1) << 0.0, 0.02).finished(), 1e-6);
  Eigen::VectorXd far(1);
  far << 1.0;
  CHECK(out_of_sample_row(Ke, far).maxCoeff() == 0.0);
}

TEST_CASE("lattice translation invariance") {
  // dyadic coordinates stay exact under shifting by one period
  Eigen::MatrixXd p(5, 1);
  p << 0.125, 0.25, 0.4375, 0.625, 0.875;
  const auto s0 = make_sample(p, 1.0);
  Eigen::MatrixXd shifted = p.array() + 1.0;  // one full period
  const auto dom = TorusDomain(1, 1.0);
  Eigen::MatrixXd rewrapped(5, 1);
  for (int i = 0; i < 5; ++i)
    rewrapped.row(i) = wrap(dom, shifted.row(i).transpose()).transpose();
  CHECK(rewrapped == p);
  const auto K0 = build_kernel_matrix(s0, 0.03);
  const auto K1 = build_kernel_matrix(make_sample(rewrapped, 1.0), 0.03);
  CHECK(K0.entries == K1.entries);
}

TEST_CASE("positive semi-definiteness") {
  SplitMix64 rng(31);
  for (int rep = 0; rep < 3; ++rep) {
    const int M = 100 + 50 * rep;
    Eigen::MatrixXd pts(M, rep == 2 ? 2 : 1);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < pts.cols(); ++j) pts(i, j) = rng.uniform();
    const double eps = rep == 0 ? 0.05 : 0.1;
    const auto K = build_kernel_matrix(make_sample(pts, 1.0), eps);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K.entries);
    CHECK(es.eigenvalues().minCoeff() >=
          -1e-10 * es.eigenvalues().maxCoeff());
  }
  // euclidean mode
  Eigen::MatrixXd pts(60, 3);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal();
  const auto K = build_kernel_matrix_euclidean(pts, 0.5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K.entries);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
}

TEST_CASE("binary cache round trip") {
  auto m = DensityModel::figure1();
  const auto s = m.sample(30, 77);
  const auto K = build_kernel_matrix(s, 0.04);
  const auto path =
      (std::filesystem::temp_directory_path() / "torusdm_kernel_cache.bin").string();
  save_kernel_cache(path, K);
  const auto L = load_kernel_cache(path);
  CHECK(L.entries == K.entries);
  CHECK(L.points == K.points);
  CHECK(L.eps == K.eps);
  CHECK(L.trunc_J == K.trunc_J);
  CHECK(L.sample_hash == K.sample_hash);
  CHECK(L.mode == K.mode);

  SUBCASE("bad magic is rejected") {
    FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f);
    std::fputc('X', f);
    std::fclose(f);
    CHECK_THROWS_WITH_AS(load_kernel_cache(path),
                         doctest::Contains("bad magic"), std::runtime_error);
  }
  SUBCASE("corrupted points fail the sample-hash check") {
    save_kernel_cache(path, K);
    FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f);
    std::fseek(f, -8, SEEK_END);
    const double garbage = 0.123456;
    std::fwrite(&garbage, sizeof(garbage), 1, f);
    std::fclose(f);
    CHECK_THROWS_WITH_AS(load_kernel_cache(path),
                         doctest::Contains("hash mismatch"), std::runtime_error);
  }
  std::filesystem::remove(path);
}

TEST_CASE("assembly argument errors") {
  auto m = DensityModel::uniform(TorusDomain(1, 1.0));
  const auto s = m.sample(4, 0);
  CHECK_THROWS_AS(build_kernel_matrix(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_kernel_matrix(s, -0.5), std::invalid_argument);
}
