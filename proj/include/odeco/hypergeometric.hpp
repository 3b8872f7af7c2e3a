#pragma once

// g(a, z) = 2F1(1, a; a+1; z) = a · sum_m z^m / (a + m), a in (0, 1].

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "odeco/error.hpp"
#include "odeco/quadrature.hpp"

namespace odeco {

namespace detail {

inline void check_g_parameter(double a) {
  if (!(a > 0 && a <= 1)) throw Error(ErrorKind::InvalidArgument, "g: parameter a must lie in (0, 1]");
}

template <typename Scalar>
Scalar gauss_g_series_unchecked(Scalar a, Scalar z) {
  Scalar sum = 0, zm = 1;
  for (int m = 0; m < 10000; ++m) {
    const Scalar term = zm / (a + m);
    sum += term;
    if (std::abs(term) <= std::numeric_limits<Scalar>::epsilon() * std::abs(sum) / 4) break;
    zm *= z;
  }
  return a * sum;
}

}  // namespace detail

/// Power series; converges for |z| < 1, used by gauss_g for |z| <= 0.5.
template <typename Scalar>
Scalar gauss_g_series(Scalar a, Scalar z) {
  detail::check_g_parameter(double(a));
  if (!(std::abs(z) < 1)) throw Error(ErrorKind::DomainViolation, "g series needs |z| < 1", double(z));
  return detail::gauss_g_series_unchecked(a, z);
}

/// a ∫_0^1 t^{a-1}/(1 - z t) dt, written with t = u^{1/a} so the integrand
/// 1/(1 - z u^{1/a}) is bounded on [0, 1].
template <typename Scalar>
Scalar gauss_g_integral(Scalar a, Scalar z) {
  detail::check_g_parameter(double(a));
  if (!(z < 1)) throw Error(ErrorKind::DomainViolation, "g integral needs z < 1", double(z));
  const Scalar p = 1 / a;
  const auto r = gauss_kronrod<Scalar>([&](Scalar u) { return 1 / (1 - z * std::pow(u, p)); }, Scalar(0),
                                       Scalar(1), Scalar(1e-14), Scalar(1e-14));
  return r.value;
}

/// Real principal branch, z < 1. z >= 1 is on or past the branch point.
template <typename Scalar>
Scalar gauss_g(Scalar a, Scalar z) {
  detail::check_g_parameter(double(a));
  if (!(z < 1))
    throw Error(ErrorKind::DomainViolation, "g(a, z) is defined for z < 1 on the real branch, got z = " + std::to_string(z),
                double(z));
  if (std::abs(z) <= Scalar(0.5)) return detail::gauss_g_series_unchecked(a, z);
  return gauss_g_integral(a, z);
}

/// Cauchy principal value (real part of either side of the cut) for z > 1:
/// Re g(a, z) = a [π cot(πa) z^{-a} + g(1-a, 1/z) / ((1-a) z)], and
/// -ln(z-1)/z at a = 1. Agrees with the separation-of-variables integral
/// whenever the imaginary parts cancel in a difference of two values.
template <typename Scalar>
Scalar gauss_g_principal(Scalar a, Scalar z) {
  detail::check_g_parameter(double(a));
  if (z < 1) return gauss_g(a, z);
  if (z == 1) throw Error(ErrorKind::DomainViolation, "g diverges at z = 1", 1.0);
  if (a == 1) return -std::log(z - 1) / z;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar w = 1 / z;
  return a * (pi / std::tan(pi * a) * std::pow(z, -a) + gauss_g(1 - a, w) * w / (1 - a));
}

}  // namespace odeco
