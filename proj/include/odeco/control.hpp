#pragma once

// Constant-input odeco systems x' = A x^{k-1} + b. In modal coordinates
// every mode obeys the scalar Chini equation c' = λ c^{k-1} + b̃ and is
// solved implicitly through t(c) = ∫_α^c ds / (λ s^{k-1} + b̃).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "odeco/dynamics.hpp"
#include "odeco/hypergeometric.hpp"
#include "odeco/quadrature.hpp"

namespace odeco {

template <typename Scalar>
struct ControlledModalProblem {
  int k = 0;
  Scalar lambda{0};
  Scalar b_tilde{0};
  Scalar alpha{0};
  std::optional<Scalar> equilibrium;  // the root the flow from alpha approaches

  Scalar rate(Scalar c) const { return lambda * detail::ipow(c, k - 1) + b_tilde; }
};

namespace detail {

constexpr double modal_quad_abs = 1e-13;
constexpr double modal_quad_rel = 1e-13;

// Real roots of λ s^{k-1} + b̃, ascending.
template <typename Scalar>
std::vector<Scalar> modal_roots(int k, Scalar lambda, Scalar b_tilde) {
  if (lambda == 0) return {};
  const Scalar rho = -b_tilde / lambda;
  const int p = k - 1;
  if (p % 2 == 1) return {std::copysign(std::pow(std::abs(rho), Scalar(1) / p), rho)};
  if (rho < 0) return {};
  if (rho == 0) return {Scalar(0)};
  const Scalar r = std::pow(rho, Scalar(1) / p);
  return {-r, r};
}

template <typename Scalar>
int flow_direction(const ControlledModalProblem<Scalar>& p) {
  const Scalar f = p.rate(p.alpha);
  return f > 0 ? 1 : (f < 0 ? -1 : 0);
}

// Nearest root strictly ahead of alpha in the flow direction.
template <typename Scalar>
std::optional<Scalar> approached_root(int k, Scalar lambda, Scalar b_tilde, Scalar alpha) {
  const Scalar f = lambda * ipow(alpha, k - 1) + b_tilde;
  if (f == 0) return alpha;
  std::optional<Scalar> best;
  for (Scalar e : modal_roots(k, lambda, b_tilde)) {
    if ((e - alpha) * f <= 0) continue;
    if (!best || std::abs(e - alpha) < std::abs(*best - alpha)) best = e;
  }
  return best;
}

// ∫_a^b ds/(λ s^{k-1} + b̃) for an interval free of roots; either end may be
// ±∞. Near a root e ≠ 0 the pole is split off analytically:
//   λ s^{k-1} + b̃ = λ (s - e) q(s),  q(s) = Σ_j s^j e^{m-j},  m = k-2,
//   1/(λ(s-e)q(s)) = [1/(s-e) - D(s)/q(s)] / (λ q(e)),  D = (q(s)-q(e))/(s-e),
// which keeps the logarithmic blow-up of t exact as c approaches e.
template <typename Scalar>
Scalar modal_time_integral(int k, Scalar lambda, Scalar b_tilde, Scalar a, Scalar b) {
  if (a == b) return 0;
  if (b < a) return -modal_time_integral(k, lambda, b_tilde, b, a);
  const int m = k - 2;
  const std::vector<Scalar> roots = modal_roots(k, lambda, b_tilde);

  std::vector<Scalar> cuts{a, b, Scalar(-1), Scalar(1)};
  for (Scalar e : roots)
    if (e != 0) {
      cuts.push_back(e - std::abs(e) / 2);
      cuts.push_back(e + std::abs(e) / 2);
    }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](Scalar s) { return s < a || s > b; }), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto rate = [&](Scalar s) { return lambda * ipow(s, k - 1) + b_tilde; };
  Scalar total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Scalar s0 = cuts[i], s1 = cuts[i + 1];
    const Scalar mid = std::isinf(s0) ? s1 - 1 : (std::isinf(s1) ? s0 + 1 : (s0 + s1) / 2);
    std::optional<Scalar> zone;
    for (Scalar e : roots)
      if (e != 0 && std::abs(mid - e) < std::abs(e) / 2) zone = e;

    if (zone) {
      const Scalar e = *zone;
      auto q = [&](Scalar s) {
        Scalar acc = 0;
        for (int j = 0; j <= m; ++j) acc += ipow(s, j) * ipow(e, m - j);
        return acc;
      };
      auto D = [&](Scalar s) {
        Scalar acc = 0;
        for (int j = 1; j <= m; ++j)
          for (int i2 = 0; i2 < j; ++i2) acc += ipow(e, m - j) * ipow(s, i2) * ipow(e, j - 1 - i2);
        return acc;
      };
      const Scalar smooth = gauss_kronrod<Scalar>([&](Scalar s) { return D(s) / q(s); }, s0, s1,
                                                  Scalar(modal_quad_abs), Scalar(modal_quad_rel)).value;
      total += (std::log(std::abs((s1 - e) / (s0 - e))) - smooth) / (lambda * q(e));
    } else if (s0 >= -1 && s1 <= 1) {
      total += gauss_kronrod<Scalar>([&](Scalar s) { return 1 / rate(s); }, s0, s1, Scalar(modal_quad_abs),
                                     Scalar(modal_quad_rel)).value;
    } else {
      // s = 1/u on a segment of one sign with |s| >= 1
      const Scalar u0 = 1 / s1, u1 = 1 / s0;
      total += gauss_kronrod<Scalar>(
                   [&](Scalar u) { return (k >= 3 ? ipow(u, k - 3) : 1 / u) / (lambda + b_tilde * ipow(u, k - 1)); }, u0, u1,
                   Scalar(modal_quad_abs), Scalar(modal_quad_rel)).value;
    }
  }
  return total;
}

}  // namespace detail

/// Fills in the equilibrium the flow from alpha approaches, if any.
template <typename Scalar>
ControlledModalProblem<Scalar> make_modal_problem(int k, Scalar lambda, Scalar b_tilde, Scalar alpha) {
  if (k < 2) throw Error(ErrorKind::UnsupportedOrder, "modal problem needs order >= 2");
  ControlledModalProblem<Scalar> p{k, lambda, b_tilde, alpha, std::nullopt};
  p.equilibrium = detail::approached_root(k, lambda, b_tilde, alpha);
  return p;
}

/// Time for the mode to move from alpha to c. Negative when c lies behind
/// alpha in the flow direction.
template <typename Scalar>
Scalar implicit_time(const ControlledModalProblem<Scalar>& p, Scalar c) {
  if (c == p.alpha) return 0;
  const int m = p.k - 2;
  if (p.lambda == 0) {
    if (p.b_tilde == 0)
      throw Error(ErrorKind::PathCrossing, "mode is frozen (lambda = b = 0); only c = alpha is reachable", double(p.alpha));
    return (c - p.alpha) / p.b_tilde;
  }
  const Scalar lo = std::min(p.alpha, c), hi = std::max(p.alpha, c);
  for (Scalar e : detail::modal_roots(p.k, p.lambda, p.b_tilde))
    if (e >= lo && e <= hi)
      throw Error(ErrorKind::PathCrossing,
                  "path from " + std::to_string(p.alpha) + " to " + std::to_string(c) + " crosses the equilibrium " +
                      std::to_string(e),
                  double(e));
  if (p.b_tilde == 0) {
    if (m == 0) return std::log(c / p.alpha) / p.lambda;
    return (detail::ipow(1 / c, m) - detail::ipow(1 / p.alpha, m)) / (-m * p.lambda);
  }
  return detail::modal_time_integral(p.k, p.lambda, p.b_tilde, p.alpha, c);
}

/// Closed form through g: t = G(alpha) - G(c) with
/// G(s) = g(a, -b̃/(λ s^{k-1})) / ((k-2) λ s^{k-2}), a = (k-2)/(k-1).
/// Arguments z >= 1 are refused unless principal values are requested.
template <typename Scalar>
Scalar implicit_time_formula(const ControlledModalProblem<Scalar>& p, Scalar c, bool principal_value = false) {
  if (p.k < 3) throw Error(ErrorKind::UnsupportedOrder, "hypergeometric form needs order >= 3");
  if (p.lambda == 0) throw Error(ErrorKind::InvalidArgument, "hypergeometric form needs lambda != 0");
  if (c == 0 || p.alpha == 0) throw Error(ErrorKind::DomainViolation, "hypergeometric form is singular at c = 0");
  const int m = p.k - 2;
  const Scalar a = Scalar(m) / Scalar(m + 1);
  auto G = [&](Scalar s) {
    const Scalar z = -p.b_tilde / (p.lambda * detail::ipow(s, m + 1));
    const Scalar g = principal_value ? gauss_g_principal(a, z) : gauss_g(a, z);
    return g / (m * p.lambda * detail::ipow(s, m));
  };
  return G(p.alpha) - G(c);
}

/// Finite time for the mode to reach ±∞, if the flow from alpha escapes.
template <typename Scalar>
std::optional<Scalar> modal_escape_time(const ControlledModalProblem<Scalar>& p) {
  const int dir = detail::flow_direction(p);
  if (dir == 0 || p.lambda == 0 || p.k < 3) return std::nullopt;
  if (detail::approached_root(p.k, p.lambda, p.b_tilde, p.alpha)) return std::nullopt;
  const Scalar inf = dir * std::numeric_limits<Scalar>::infinity();
  if (p.b_tilde == 0) return Scalar(1) / ((p.k - 2) * p.lambda * detail::ipow(p.alpha, p.k - 2));
  return detail::modal_time_integral(p.k, p.lambda, p.b_tilde, p.alpha, inf);
}

/// c(t): Newton on t(c) - t (slope 1/rate) safeguarded by bisection on the
/// monotone bracket between alpha and the approached equilibrium, or an
/// expanding bracket on the escaping side.
template <typename Scalar>
Scalar solve_modal(const ControlledModalProblem<Scalar>& p, Scalar t, Scalar tol = Scalar(1e-12)) {
  if (!(t >= 0) || !std::isfinite(t)) throw Error(ErrorKind::InvalidArgument, "solve_modal needs finite t >= 0");
  if (t == 0) return p.alpha;
  const int dir = detail::flow_direction(p);
  if (dir == 0) return p.alpha;
  if (p.lambda == 0) return p.alpha + p.b_tilde * t;

  Scalar near = p.alpha, far;
  const std::optional<Scalar> target = detail::approached_root(p.k, p.lambda, p.b_tilde, p.alpha);
  if (target) {
    far = *target;
  } else {
    if (const auto esc = modal_escape_time(p); esc && t >= *esc)
      throw Error(ErrorKind::BlowUp, "mode escapes to infinity at t = " + std::to_string(*esc), double(*esc));
    Scalar step = std::max(Scalar(1), std::abs(p.alpha));
    far = p.alpha + dir * step;
    while (implicit_time(p, far) < t) {
      near = far;
      step *= 2;
      far = p.alpha + dir * step;
      if (std::abs(far) > Scalar(1e12)) {
        const auto esc = modal_escape_time(p);
        throw Error(ErrorKind::BlowUp, "mode leaves |c| <= 1e12 before t", esc ? double(*esc) : double(t));
      }
    }
  }

  // invariant: time(near) < t < time(far) (far may be the unreachable root)
  Scalar c = near;
  Scalar tc = implicit_time(p, c);
  for (int it = 0; it < 400; ++it) {
    if (std::abs(tc - t) <= tol) return c;
    Scalar next = c - (tc - t) * p.rate(c);
    const bool inside = (next - near) * dir > 0 && (far - next) * dir > 0;
    if (!inside) next = near + (far - near) / 2;
    if (next == near || next == far) return c;  // bracket exhausted at floating resolution
    const Scalar tn = implicit_time(p, next);
    if (tn < t) near = next;
    else far = next;
    if (std::abs(tn - t) < std::abs(tc - t) || !inside) {
      c = next;
      tc = tn;
    }
  }
  return c;
}

/// x(t) = V c(t) with every mode solved independently.
template <typename Scalar>
Vector<Scalar> controlled_solution(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> b, VectorCRef<Scalar> x0,
                                   Scalar t) {
  if (d.order < 2) throw Error(ErrorKind::UnsupportedOrder, "controlled solution needs order >= 2");
  if (!d.certified())
    throw Error(ErrorKind::NotOdeco, "tensor is not odeco (residual " + std::to_string(d.residual) + "); use the transform pipeline",
                double(d.residual));
  if (b.size() != d.dim) throw Error(ErrorKind::DimensionMismatch, "control length does not match the system");
  const Vector<Scalar> bt = d.eigenvectors.transpose() * b;
  const Vector<Scalar> alpha = modal_coordinates(d, x0);
  Vector<Scalar> c(d.dim);
  const Scalar tol = Scalar(1e-13) * std::max(Scalar(1), t);
  for (int r = 0; r < d.dim; ++r)
    c[r] = solve_modal(make_modal_problem(d.order, d.eigenvalues[r], bt[r], alpha[r]), t, tol);
  return d.eigenvectors * c;
}

/// Earliest finite modal escape time, or +∞.
template <typename Scalar>
Scalar controlled_escape_time(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> b, VectorCRef<Scalar> x0) {
  const Vector<Scalar> bt = d.eigenvectors.transpose() * b;
  const Vector<Scalar> alpha = modal_coordinates(d, x0);
  Scalar end = std::numeric_limits<Scalar>::infinity();
  for (int r = 0; r < d.dim; ++r)
    if (const auto esc = modal_escape_time(make_modal_problem(d.order, d.eigenvalues[r], bt[r], alpha[r])))
      end = std::min(end, *esc);
  return end;
}

namespace detail {

template <typename Scalar>
Scalar modal_equilibrium(int k, Scalar lambda, Scalar b_tilde, int r, const Scalar* alpha) {
  if (lambda == 0) {
    if (b_tilde != 0)
      throw Error(ErrorKind::NoEquilibrium, "mode " + std::to_string(r) + " has lambda = 0 and nonzero input", r);
    return alpha ? *alpha : Scalar(0);
  }
  const std::vector<Scalar> roots = modal_roots(k, lambda, b_tilde);
  if (roots.empty())
    throw Error(ErrorKind::NoEquilibrium, "mode " + std::to_string(r) + " has no real equilibrium", r);
  if (roots.size() == 1 || !alpha) return roots.back();
  if (const auto e = approached_root(k, lambda, b_tilde, *alpha)) return *e;
  return std::abs(roots[0] - *alpha) < std::abs(roots[1] - *alpha) ? roots[0] : roots[1];
}

}  // namespace detail

/// V e with e_r the real (k-1)-th root of -b̃_r/λ_r; where two roots exist
/// the positive one is taken.
template <typename Scalar>
Vector<Scalar> controlled_equilibrium(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> b) {
  if (b.size() != d.dim) throw Error(ErrorKind::DimensionMismatch, "control length does not match the system");
  const Vector<Scalar> bt = d.eigenvectors.transpose() * b;
  Vector<Scalar> e(d.dim);
  for (int r = 0; r < d.dim; ++r) e[r] = detail::modal_equilibrium<Scalar>(d.order, d.eigenvalues[r], bt[r], r, nullptr);
  return d.eigenvectors * e;
}

/// As above, but each mode picks the equilibrium its flow from x0 approaches
/// (the nearer root when the mode escapes instead).
template <typename Scalar>
Vector<Scalar> controlled_equilibrium(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> b, VectorCRef<Scalar> x0) {
  if (b.size() != d.dim) throw Error(ErrorKind::DimensionMismatch, "control length does not match the system");
  const Vector<Scalar> bt = d.eigenvectors.transpose() * b;
  const Vector<Scalar> alpha = modal_coordinates(d, x0);
  Vector<Scalar> e(d.dim);
  for (int r = 0; r < d.dim; ++r) e[r] = detail::modal_equilibrium<Scalar>(d.order, d.eigenvalues[r], bt[r], r, &alpha[r]);
  return d.eigenvectors * e;
}

using ControlledModalProblemd = ControlledModalProblem<double>;

}  // namespace odeco
