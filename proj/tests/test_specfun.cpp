#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "mtfdd/specfun.hpp"

using mtfdd::specfun::bessel_i;
using mtfdd::specfun::bessel_i_prime;
using mtfdd::specfun::bessel_k;
using mtfdd::specfun::bessel_k_ratio;
using mtfdd::specfun::KernelParams;
using mtfdd::specfun::yukawa_green;
using mtfdd::specfun::yukawa_green_dr;

namespace {

// Independent oracle: plain ascending series, no recurrences shared with the
// implementation under test. 40 terms suffice for x ~ 2.5; larger arguments
// get however many they need (all terms positive, no cancellation).
double series_i(int n, double x, int terms = 40) {
  long double t = 0.25L * x * x;
  long double term = 1.0L;
  for (int m = 1; m <= n; ++m) term /= m;  // 1/n!
  long double sum = 0.0L;
  for (int k = 0; k < terms; ++k) {
    sum += term;
    term *= t / ((k + 1.0L) * (k + 1.0L + n));
  }
  return static_cast<double>(std::pow(0.5L * static_cast<long double>(x), n) *
                             sum);
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int panels) {
  double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("modified Bessel I_n matches ascending series", "[specfun]") {
  // Frozen spot value, series evaluated offline: I_3(2.5).
  CHECK(series_i(3, 2.5) == Catch::Approx(0.47437040877803544).epsilon(1e-14));
  CHECK(bessel_i(3, 2.5) == Catch::Approx(series_i(3, 2.5)).epsilon(1e-10));

  for (int n : {0, 1, 2, 5, 10, 20, 40, 60}) {
    for (double x : {1e-3, 0.3, 1.7, 4.0, 11.0, 27.0, 50.0}) {
      double ref = series_i(n, x, 250);
      if (ref < 1e-280) continue;  // below series resolution, skip
      INFO("n=" << n << " x=" << x);
      CHECK(bessel_i(n, x) == Catch::Approx(ref).epsilon(1e-10));
    }
  }
  CHECK(bessel_i(5, 10.0) == Catch::Approx(777.1882864032599).epsilon(1e-12));
  CHECK(bessel_i(10, 1.7) ==
        Catch::Approx(5.792605208682933e-08).epsilon(1e-12));
  CHECK(bessel_i(0, 0.0) == 1.0);
  CHECK(bessel_i(3, 0.0) == 0.0);
}

TEST_CASE("Wronskian I_n(x)K_{n+1}(x) + I_{n+1}(x)K_n(x) = 1/x", "[specfun]") {
  for (double x : {1.7, 0.02, 0.5, 3.0, 10.0, 30.0, 50.0}) {
    for (int n = 0; n <= 10; ++n) {
      double w = bessel_i(n, x) * bessel_k(n + 1, x) +
                 bessel_i(n + 1, x) * bessel_k(n, x);
      INFO("n=" << n << " x=" << x);
      CHECK(std::abs(w - 1.0 / x) * x <= 1e-9);
    }
  }
}

TEST_CASE("K_0 small-argument log asymptote", "[specfun]") {
  const double euler = 0.57721566490153286;
  double x = 1e-4;
  double asymptote = -std::log(0.5 * x) - euler;
  CHECK(bessel_k(0, x) ==
        Catch::Approx(asymptote).epsilon(1e-6));  // O(x^2 log x) gap
}

TEST_CASE("K_n frozen reference values", "[specfun]") {
  CHECK(bessel_k(0, 1.7) == Catch::Approx(0.16549631805699655).epsilon(1e-12));
  CHECK(bessel_k(1, 1.7) == Catch::Approx(0.20936248820408249).epsilon(1e-12));
  CHECK(bessel_k(0, 6.0) ==
        Catch::Approx(0.0012439943280131231).epsilon(1e-12));
  CHECK(bessel_k(1, 10.0) ==
        Catch::Approx(1.8648773453825585e-5).epsilon(1e-12));
  CHECK(bessel_k(0, 30.0) ==
        Catch::Approx(2.1324774964630564e-14).epsilon(1e-12));
  CHECK(bessel_k(1, 50.0) ==
        Catch::Approx(3.4441022267175556e-23).epsilon(1e-12));
}

TEST_CASE("K ratio agrees with direct quotient and its recurrence",
          "[specfun]") {
  for (double x : {0.3, 1.1, 2.5, 7.0, 40.0}) {
    CHECK(bessel_k_ratio(0, x) ==
          Catch::Approx(bessel_k(1, x) / bessel_k(0, x)).epsilon(1e-11));
    for (int n = 1; n <= 8; ++n) {
      // K_{n+1} = K_{n-1} + (2n/x) K_n, divided through by K_n.
      double expect = 1.0 / bessel_k_ratio(n - 1, x) + 2.0 * n / x;
      CHECK(bessel_k_ratio(n, x) == Catch::Approx(expect).epsilon(1e-11));
    }
  }
  // Large order approaches 2n/x (irregular solution growth).
  CHECK(bessel_k_ratio(200, 3.0) ==
        Catch::Approx(2.0 * 200 / 3.0).epsilon(0.01));
}

TEST_CASE("derivative helper I_n'", "[specfun]") {
  double h = 1e-6;
  for (int n : {0, 1, 4}) {
    double fd = (bessel_i(n, 2.0 + h) - bessel_i(n, 2.0 - h)) / (2 * h);
    CHECK(bessel_i_prime(n, 2.0) == Catch::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("Yukawa kernel solves the PDE away from the source", "[specfun]") {
  KernelParams par{0.4, 2};
  // radial part: -(G'' + G'/r) + G/gamma^2 = 0 for r > 0
  double r = 0.7, h = 1e-4;
  double lap = (yukawa_green(par, r + h) - 2.0 * yukawa_green(par, r) +
                yukawa_green(par, r - h)) /
                   (h * h) +
               yukawa_green_dr(par, r) / r;
  CHECK(lap == Catch::Approx(yukawa_green(par, r) / (par.gamma * par.gamma))
                   .epsilon(1e-6));

  double hg = 1e-5;
  double fd =
      (yukawa_green(par, r + hg) - yukawa_green(par, r - hg)) / (2 * hg);
  CHECK(yukawa_green_dr(par, r) == Catch::Approx(fd).epsilon(1e-7));

  KernelParams par3{0.4, 3};
  CHECK(yukawa_green(par3, 0.7) ==
        Catch::Approx(std::exp(-0.7 / 0.4) / (4.0 * M_PI * 0.7))
            .epsilon(1e-14));
  double fd3 =
      (yukawa_green(par3, r + hg) - yukawa_green(par3, r - hg)) / (2 * hg);
  CHECK(yukawa_green_dr(par3, r) == Catch::Approx(fd3).epsilon(1e-7));
}

TEST_CASE("Yukawa kernel carries a unit Dirac mass", "[specfun]") {
  // Integrate -div(grad G) + G/gamma^2 over a disk of radius R: the flux
  // term -2 pi R G'(R) plus the volume term must come out to exactly 1.
  // This pins the 1/(2 pi) normalization of the 2D kernel.
  KernelParams par{0.35, 2};
  double R = 0.5 * par.gamma;
  double flux = -2.0 * M_PI * R * yukawa_green_dr(par, R);
  auto f = [&](double r) {
    return yukawa_green(par, r) * 2.0 * M_PI * r / (par.gamma * par.gamma);
  };
  double volume = simpson(f, 1e-9, R, 4000);  // integrand ~ r log r, benign
  CHECK(flux + volume == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("specfun argument validation", "[specfun]") {
  CHECK_THROWS_AS(bessel_i(2, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(bessel_k(0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(bessel_i(0, 1e4), std::overflow_error);
  CHECK_THROWS_AS(bessel_k(60, 1e-8), std::overflow_error);
}
