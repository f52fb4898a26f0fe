#include <doctest.h>

#include <cmath>

#include "torusdm/rng.hpp"
#include "torusdm/torus.hpp"

using namespace torusdm;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

// literal image-box sum, independent of the factorised implementation
double brute_periodized(const TorusDomain& dom, double eps,
                        const Eigen::VectorXd& r, int J) {
  const int d = dom.d;
  std::vector<int> idx(d, -J);
  double total = 0.0;
  while (true) {
    double q = 0.0;
    for (int a = 0; a < d; ++a) {
      const double t = r[a] + dom.L * idx[a];
      q += t * t;
    }
    total += std::pow(2.0 * M_PI * eps, -0.5 * d) * std::exp(-q / (2.0 * eps));
    int a = d - 1;
    while (a >= 0 && ++idx[a] > J) idx[a--] = -J;
    if (a < 0) break;
  }
  return total;
}

}  // namespace

TEST_CASE("wrap reduces into [0,L)") {
  TorusDomain t1(1, 1.0);
  CHECK(wrap(t1, vec1(0.0))[0] == 0.0);
  CHECK(wrap(t1, vec1(1.25))[0] == doctest::Approx(0.25).epsilon(1e-15));
  TorusDomain t2(1, 2.0);
  CHECK(wrap(t2, vec1(-0.5))[0] == doctest::Approx(1.5).epsilon(1e-15));
  // idempotence
  SplitMix64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const double x = (rng.uniform() - 0.5) * 20.0;
    const double w = wrap(t2, vec1(x))[0];
    CHECK(wrap(t2, vec1(w))[0] == w);
    CHECK(w >= 0.0);
    CHECK(w < 2.0);
  }
  CHECK_THROWS_AS(wrap(t1, vec1(std::nan(""))), std::invalid_argument);
  CHECK_THROWS_AS(wrap(t1, vec1(INFINITY)), std::invalid_argument);
}

TEST_CASE("displacement takes the shortest representative") {
  TorusDomain t1(1, 1.0);
  CHECK(displacement(t1, vec1(0.1), vec1(0.9)).components[0] ==
        doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(displacement(t1, vec1(0.37), vec1(0.37)).components[0] == 0.0);
  TorusDomain t4(1, 4.0);
  CHECK(displacement(t4, vec1(0.0), vec1(3.0)).components[0] ==
        doctest::Approx(-1.0).epsilon(1e-15));
  // boundary tie is deterministically +L/2
  CHECK(displacement(t4, vec1(0.0), vec1(2.0)).components[0] == 2.0);
  CHECK(displacement(t4, vec1(2.0), vec1(0.0)).components[0] == 2.0);
  // antisymmetry away from the boundary
  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    const double ab = displacement(t1, vec1(a), vec1(b)).components[0];
    const double ba = displacement(t1, vec1(b), vec1(a)).components[0];
    if (std::abs(ab) < 0.5) CHECK(ab == -ba);
  }
}

TEST_CASE("gaussian closed form") {
  PeriodicDisplacement r0{vec1(0.0)};
  CHECK(gaussian(1.0, r0) == doctest::Approx(0.39894228040143268).epsilon(1e-15));
  PeriodicDisplacement r2d{Eigen::Vector2d(0.0, 0.0)};
  CHECK(gaussian(0.5, r2d) == doctest::Approx(0.31830988618379067).epsilon(1e-15));
  // high-precision oracle value for d=1, eps=0.01, r=0.2
  PeriodicDisplacement r{vec1(0.2)};
  CHECK(gaussian(0.01, r) == doctest::Approx(0.53990966513188052).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian(0.0, r0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian(-1.0, r0), std::invalid_argument);
}

TEST_CASE("periodized gaussian") {
  TorusDomain t1(1, 1.0);
  PeriodicDisplacement r0{vec1(0.0)};

  SUBCASE("tight kernel is indistinguishable from one image") {
    CHECK(periodized_gaussian(t1, 0.01, r0, 40) ==
          doctest::Approx(3.9894228040143268).epsilon(1e-15));
  }
  SUBCASE("J=0 equals the plain gaussian") {
    PeriodicDisplacement r{vec1(0.3)};
    CHECK(periodized_gaussian(t1, 0.2, r, 0) == gaussian(0.2, r));
  }
  SUBCASE("truncation tail matches the image-sum oracle") {
    // at eps=0.5 the omitted |j| in (3,10] contribute a visible tail
    const double a = periodized_gaussian(t1, 0.5, r0, 3);
    const double b = periodized_gaussian(t1, 0.5, r0, 10);
    double tail = 0.0;
    for (int j = 4; j <= 10; ++j)
      tail += 2.0 * std::pow(2.0 * M_PI * 0.5, -0.5) * std::exp(-j * j / 1.0);
    CHECK(b - a == doctest::Approx(tail).epsilon(1e-12));
    CHECK(b >= a);  // monotone in J
    // a tighter kernel leaves no tail at all beyond J=3
    const double a2 = periodized_gaussian(t1, 0.1, r0, 3);
    const double b2 = periodized_gaussian(t1, 0.1, r0, 10);
    CHECK(std::abs(a2 - b2) < 1e-12);
  }
  SUBCASE("evenness and the (1+gamma)^d bound") {
    SplitMix64 rng(11);
    TorusDomain t2(2, 1.0);
    const double eps = 0.3;
    const auto pc = periodization_constants(t2, eps);
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd x(2);
      x << rng.uniform() - 0.5, rng.uniform() - 0.5;
      PeriodicDisplacement rp{x}, rm{Eigen::VectorXd(-x)};
      const double vp = periodized_gaussian(t2, eps, rp, 8);
      CHECK(vp == doctest::Approx(periodized_gaussian(t2, eps, rm, 8)).epsilon(1e-14));
      CHECK(vp <= std::pow(1.0 + pc.gamma, 2) * gaussian(eps, rp) * (1 + 1e-12));
    }
  }
  SUBCASE("factorised sum equals the literal box sum") {
    SplitMix64 rng(13);
    for (int d = 1; d <= 3; ++d) {
      TorusDomain td(d, 1.5);
      Eigen::VectorXd x(d);
      for (int a = 0; a < d; ++a) x[a] = 1.5 * (rng.uniform() - 0.5);
      PeriodicDisplacement r{x};
      const double got = periodized_gaussian(td, 0.4, r, 4);
      const double want = brute_periodized(td, 0.4, x, 4);
      CHECK(got == doctest::Approx(want).epsilon(1e-13));
    }
  }
}

TEST_CASE("choose_truncation") {
  TorusDomain t1(1, 1.0);
  CHECK(choose_truncation(t1, 0.001, 1e-15) <= 1);
  CHECK(choose_truncation(t1, 0.5, 1e-15) >= 4);
  CHECK(choose_truncation(t1, 0.5, 2.0) == 0);
  CHECK(choose_truncation(t1, 1e6, 1.0) == 0);

  // chosen J reproduces a deep truncation within tol relative to the peak
  for (const double eps : {0.01, 0.1, 0.6}) {
    const int J = choose_truncation(t1, eps, 1e-15);
    const double peak = std::pow(2.0 * M_PI * eps, -0.5);
    SplitMix64 rng(17);
    for (int i = 0; i < 20; ++i) {
      PeriodicDisplacement r{vec1(rng.uniform() - 0.5)};
      const double a = periodized_gaussian(t1, eps, r, J);
      const double b = periodized_gaussian(t1, eps, r, J + 10);
      CHECK(std::abs(a - b) <= 1e-15 * peak * 1.01);
    }
  }
}

TEST_CASE("periodization constants") {
  TorusDomain t1(1, 1.0);
  // frozen series values at eps = 0.5, L = 1
  const auto pc = periodization_constants(t1, 0.5);
  CHECK(pc.gamma == doctest::Approx(1.7726372048266522).epsilon(1e-14));
  CHECK(pc.gamma_prime == doctest::Approx(4.0686284041350791).epsilon(1e-13));
  // vanishing images as eps -> 0
  const auto tiny = periodization_constants(t1, 1e-4);
  CHECK(tiny.gamma == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tiny.gamma_prime < 1e-15);
  // monotone nondecreasing in eps
  double g_prev = 0.0, gp_prev = -1.0;
  for (double eps = 0.01; eps < 2.0; eps *= 1.6) {
    const auto c = periodization_constants(t1, eps);
    CHECK(c.gamma >= g_prev);
    CHECK(c.gamma_prime >= gp_prev);
    CHECK(c.gamma >= 1.0);
    g_prev = c.gamma;
    gp_prev = c.gamma_prime;
  }
}
