#include <doctest.h>

#include <cmath>

#include "torusdm/density.hpp"
#include "torusdm/rng.hpp"

using namespace torusdm;

namespace {

double quad_mass(const AxisDensity& ax, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += ax.eval(ax.length() * i / n);
  return s / n * ax.length();
}

TrigSeries fig2_f() {
  TrigSeries f;
  f.L = 1.0;
  f.a0 = 0.0;
  f.acos = Eigen::Vector2d(0.4, 0.0);
  f.bsin = Eigen::Vector2d(0.0, 0.12);
  return f;
}

}  // namespace

TEST_CASE("uniform density") {
  auto m = DensityModel::uniform(TorusDomain(1, 1.0));
  Eigen::VectorXd x(1);
  x[0] = 0.33;
  CHECK(m.eval(x) == 1.0);
  CHECK(m.log_gradient(x)[0] == 0.0);
  CHECK(m.normalization_constant(256) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("lacunary density matches the caption formula") {
  auto m = DensityModel::figure1();
  Eigen::VectorXd x0(1);
  x0[0] = 0.0;
  // at x=0 the series sums exactly to 1 + 3^{-2.2}/2
  CHECK(m.eval(x0) == doctest::Approx(1.0445967534311239).epsilon(1e-14));
  CHECK(m.log_gradient(x0)[0] == doctest::Approx(0.0).epsilon(1e-12));
  // cosines integrate to zero
  CHECK(m.normalization_constant(512) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("figure-2 density") {
  auto m = DensityModel::figure2();
  CHECK(m.dim() == 3);
  // Z of the 1-D factor e^f agrees between 256 and 512 quadrature points
  auto ax = AxisDensity::exp_of(fig2_f());
  double z256 = 0.0, z512 = 0.0;
  for (int i = 0; i < 256; ++i) z256 += ax.eval_unnormalized(i / 256.0);
  for (int i = 0; i < 512; ++i) z512 += ax.eval_unnormalized(i / 512.0);
  z256 /= 256.0;
  z512 /= 512.0;
  CHECK(z256 == doctest::Approx(z512).epsilon(1e-12));
  // value at the origin: e^{1 + 2 f(0)} / Z with f(0) = 0.4
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(3);
  CHECK(m.eval(origin) == doctest::Approx(4.3827598989520389).epsilon(1e-12));
  // log-gradient components are f_i'(x_i)
  Eigen::VectorXd x(3);
  x << 0.21, 0.53, 0.78;
  const auto g = m.log_gradient(x);
  CHECK(g[1] == doctest::Approx(fig2_f().deriv(x[1])).epsilon(1e-13));
  CHECK(g[2] == doctest::Approx(fig2_f().deriv(x[2])).epsilon(1e-13));
}

TEST_CASE("densities are normalised and positive") {
  std::vector<DensityModel> models;
  models.push_back(DensityModel::uniform(TorusDomain(2, 2.0)));
  models.push_back(DensityModel::figure1());
  models.push_back(DensityModel::figure2());
  for (const auto& m : models) {
    for (int a = 0; a < m.dim(); ++a) {
      CHECK(quad_mass(m.axis(a), 4096) == doctest::Approx(1.0).epsilon(1e-10));
      for (int i = 0; i < 4096; ++i)
        CHECK(m.axis(a).eval(m.axis(a).length() * i / 4096.0) > 0.0);
    }
  }
}

TEST_CASE("log gradient matches finite differences for smooth kinds") {
  auto m = DensityModel::figure2();
  SplitMix64 rng(5);
  const double h = 1e-5;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(3);
    for (int a = 0; a < 3; ++a) x[a] = rng.uniform();
    const auto g = m.log_gradient(x);
    for (int a = 0; a < 3; ++a) {
      Eigen::VectorXd xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const double fd = (std::log(m.eval(xp)) - std::log(m.eval(xm))) / (2 * h);
      CHECK(g[a] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("tabulated density reproduces its generator") {
  // tabulate e^f on a coarse grid; the trig interpolant should recover the
  // smooth density to spectral accuracy
  auto exact = AxisDensity::exp_of(fig2_f());
  Eigen::VectorXd vals(64);
  for (int i = 0; i < 64; ++i) vals[i] = exact.eval(i / 64.0);
  auto m = DensityModel::tabulated(1.0, vals);
  SplitMix64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform();
    Eigen::VectorXd xv(1);
    xv[0] = x;
    CHECK(m.eval(xv) == doctest::Approx(exact.eval(x)).epsilon(1e-10));
    CHECK(m.log_gradient(xv)[0] == doctest::Approx(exact.dlog(x)).epsilon(1e-8));
  }
  CHECK_THROWS(DensityModel::tabulated(1.0, Eigen::VectorXd::Zero(8)));
}

TEST_CASE("sampling is deterministic and distributed correctly") {
  SUBCASE("same seed gives bitwise-equal points") {
    auto m = DensityModel::figure1();
    const auto a = m.sample(500, 99);
    const auto b = m.sample(500, 99);
    CHECK(a.points == b.points);
    const auto c = m.sample(500, 100);
    CHECK(a.points != c.points);
  }
  SUBCASE("uniform coordinate means") {
    auto m = DensityModel::uniform(TorusDomain(2, 1.0));
    const int M = 20000;
    const auto s = m.sample(M, 1);
    for (int a = 0; a < 2; ++a)
      CHECK(std::abs(s.points.col(a).mean() - 0.5) < 5.0 / std::sqrt(double(M)));
  }
  SUBCASE("Kolmogorov-Smirnov against the exact lacunary CDF") {
    auto m = DensityModel::figure1();
    const int M = 100000;
    auto s = m.sample(M, 7);
    std::vector<double> xs(s.points.col(0).data(), s.points.col(0).data() + M);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (int i = 0; i < M; ++i) {
      const double F = m.axis(0).cdf(xs[i]);
      ks = std::max(ks, std::abs(F - double(i) / M));
      ks = std::max(ks, std::abs(F - double(i + 1) / M));
    }
    CHECK(ks < 1.63 / std::sqrt(double(M)));  // 1% level
  }
  SUBCASE("chi-squared against binned density") {
    // 64 bins, 63 dof: 1% critical value 92.01
    auto m = DensityModel::figure2();
    const int M = 100000, bins = 64;
    const auto s = m.sample(M, 11);
    for (int a = 0; a < 3; ++a) {
      std::vector<int> count(bins, 0);
      for (int i = 0; i < M; ++i)
        ++count[std::min(bins - 1, int(s.points(i, a) * bins))];
      double chi2 = 0.0;
      for (int b = 0; b < bins; ++b) {
        const double expected =
            M * (m.axis(a).cdf((b + 1.0) / bins) - m.axis(a).cdf(b / double(bins)));
        chi2 += (count[b] - expected) * (count[b] - expected) / expected;
      }
      CHECK(chi2 < 92.01);
    }
  }
  SUBCASE("effective sample size") {
    CHECK(effective_sample_size(1000, 0.01, 2) == doctest::Approx(10.0));
  }
  CHECK_THROWS_AS(DensityModel::figure1().sample(0, 1), std::invalid_argument);
}
