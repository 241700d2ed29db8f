#pragma once

// Modified Bessel functions I_n, K_n and the Yukawa free-space kernel.
// Self-contained on purpose: the rest of the library treats these as exact.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace mtfdd::specfun {

namespace detail {

inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;

inline double i0_series(double x) {
  double t = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 400; ++k) {
    term *= t / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

inline double i1_series(double x) {
  double t = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 400; ++k) {
    term *= t / (static_cast<double>(k) * (k + 1.0));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return 0.5 * x * sum;
}

// K_0 by the logarithmic series; accurate while the I_0(x)-sized pieces do
// not yet cancel catastrophically (x <= 2 in practice).
inline double k0_series(double x) {
  double t = 0.25 * x * x;
  double term = 1.0, harmonic = 0.0, sum = 0.0;
  for (int k = 1; k < 400; ++k) {
    term *= t / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    sum += term * harmonic;
    if (term * harmonic < std::abs(sum) * 1e-17 && k > 3) break;
  }
  return -(std::log(0.5 * x) + euler_gamma) * i0_series(x) + sum;
}

// Steed continued fraction for the irregular solution, x > 2.
// Returns the scaled pair (e^x K_0, e^x K_1).
inline std::pair<double, double> k01_scaled_cf(double x) {
  const double a1 = 0.25;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  double q = a1, c = a1, a = -a1;
  double s = 1.0 + q * delh;
  bool converged = false;
  for (int i = 2; i <= 10000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    double dels = q * delh;
    s += dels;
    if (std::abs(dels) < std::abs(s) * 1e-16) {
      converged = true;
      break;
    }
  }
  if (!converged) throw std::runtime_error("specfun: K continued fraction stalled");
  h = a1 * h;
  double k0 = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
  double k1 = k0 * (0.5 + x - h) / x;
  return {k0, k1};
}

}  // namespace detail

// I_n by downward (Miller) recurrence normalized against the series I_0;
// the series directly for n <= 1. Relative accuracy ~1e-12 for n <= 60,
// x in [1e-3, 50].
inline double bessel_i(int n, double x) {
  if (n < 0) n = -n;
  if (x < 0.0) throw std::invalid_argument("bessel_i: negative argument");
  if (x > 700.0) throw std::overflow_error("bessel_i: argument too large");
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  if (n == 0) return detail::i0_series(x);
  if (n == 1) return detail::i1_series(x);

  int start = n + 32 + static_cast<int>(std::ceil(std::sqrt(44.0 * n))) +
              static_cast<int>(std::ceil(0.5 * x));
  double vp = 0.0;       // unnormalized value at k+1
  double vc = 1e-300;    // unnormalized value at k
  double at_n = 0.0;
  for (int k = start; k >= 1; --k) {
    double vm = vp + (2.0 * k / x) * vc;
    vp = vc;
    vc = vm;
    if (k - 1 == n) at_n = vc;
    if (std::abs(vc) > 1e250) {
      vc *= 1e-250;
      vp *= 1e-250;
      at_n *= 1e-250;
    }
  }
  return at_n * (detail::i0_series(x) / vc);
}

// K_n: log series or continued fraction for orders 0 and 1, then the
// (stable, growing) upward recurrence K_{n+1} = K_{n-1} + (2n/x) K_n.
inline double bessel_k(int n, double x) {
  if (n < 0) n = -n;
  if (x <= 0.0) throw std::invalid_argument("bessel_k: nonpositive argument");
  double k0, k1, scale;
  if (x <= 2.0) {
    k0 = detail::k0_series(x);
    // Wronskian I_0 K_1 + I_1 K_0 = 1/x pins K_1 without a second series.
    k1 = (1.0 / x - detail::i1_series(x) * k0) / detail::i0_series(x);
    scale = 1.0;
  } else {
    std::tie(k0, k1) = detail::k01_scaled_cf(x);
    scale = std::exp(-x);
  }
  if (n == 0) return k0 * scale;
  double prev = k0, cur = k1;
  for (int m = 1; m < n; ++m) {
    double next = prev + (2.0 * m / x) * cur;
    if (next > 1e300)
      throw std::overflow_error("bessel_k: overflow in upward recurrence");
    prev = cur;
    cur = next;
  }
  return cur * scale;
}

inline double bessel_i_prime(int n, double x) {
  if (n == 0) return bessel_i(1, x);
  return 0.5 * (bessel_i(n - 1, x) + bessel_i(n + 1, x));
}

// K_{n+1}(x) / K_n(x) without computing the (under/overflowing) values.
inline double bessel_k_ratio(int n, double x) {
  if (n < 0) throw std::invalid_argument("bessel_k_ratio: negative order");
  if (x <= 0.0)
    throw std::invalid_argument("bessel_k_ratio: nonpositive argument");
  double rho;
  if (x <= 2.0) {
    double k0 = detail::k0_series(x);
    double k1 = (1.0 / x - detail::i1_series(x) * k0) / detail::i0_series(x);
    rho = k1 / k0;
  } else {
    auto [k0s, k1s] = detail::k01_scaled_cf(x);
    rho = k1s / k0s;
  }
  for (int m = 1; m <= n; ++m) rho = 1.0 / rho + 2.0 * m / x;
  return rho;
}

struct KernelParams {
  double gamma = 1.0;
  int dim = 2;
};

// Fundamental solution of -lap G + G/gamma^2 = delta_0, as a function of
// the distance r = |x|.
inline double yukawa_green(const KernelParams& par, double r) {
  if (r <= 0.0) throw std::invalid_argument("yukawa_green: r must be > 0");
  if (par.dim == 2)
    return bessel_k(0, r / par.gamma) / (2.0 * std::numbers::pi);
  if (par.dim == 3)
    return std::exp(-r / par.gamma) / (4.0 * std::numbers::pi * r);
  throw std::invalid_argument("yukawa_green: dim must be 2 or 3");
}

// Radial derivative dG/dr; the full gradient is this times x/|x|.
inline double yukawa_green_dr(const KernelParams& par, double r) {
  if (r <= 0.0) throw std::invalid_argument("yukawa_green_dr: r must be > 0");
  if (par.dim == 2)
    return -bessel_k(1, r / par.gamma) / (2.0 * std::numbers::pi * par.gamma);
  if (par.dim == 3)
    return -std::exp(-r / par.gamma) * (r / par.gamma + 1.0) /
           (4.0 * std::numbers::pi * r * r);
  throw std::invalid_argument("yukawa_green_dr: dim must be 2 or 3");
}

}  // namespace mtfdd::specfun
