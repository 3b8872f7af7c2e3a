#pragma once

#include <cmath>
#include <queue>
#include <vector>

namespace odeco {

template <typename Scalar>
struct QuadratureResult {
  Scalar value{0};
  Scalar error{0};
  int intervals = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (abscissae >= 0).
inline constexpr double kronrod_x[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kronrod_w[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gauss_w[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar>
struct GKPanel {
  Scalar a, b, value, error;
  bool operator<(const GKPanel& o) const { return error < o.error; }
};

template <typename Scalar, typename F>
GKPanel<Scalar> gk15(F& f, Scalar a, Scalar b) {
  const Scalar c = (a + b) / 2, h = (b - a) / 2;
  const Scalar fc = f(c);
  Scalar k = fc * Scalar(kronrod_w[7]);
  Scalar g = fc * Scalar(gauss_w[3]);
  for (int j = 0; j < 7; ++j) {
    const Scalar dx = h * Scalar(kronrod_x[j]);
    const Scalar s = f(c - dx) + f(c + dx);
    k += Scalar(kronrod_w[j]) * s;
    if (j % 2 == 1) g += Scalar(gauss_w[j / 2]) * s;
  }
  return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive G7-K15 on a finite interval. Stops when the summed
/// error estimate is below max(abs_tol, rel_tol·|I|) or after max_intervals.
template <typename Scalar, typename F>
QuadratureResult<Scalar> gauss_kronrod(F&& f, Scalar a, Scalar b, Scalar abs_tol, Scalar rel_tol = Scalar(0),
                                       int max_intervals = 4000) {
  QuadratureResult<Scalar> out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::GKPanel<Scalar>> panels;
  panels.push(detail::gk15<Scalar>(f, a, b));
  Scalar value = panels.top().value, error = panels.top().error;
  while (error > std::max(abs_tol, rel_tol * std::abs(value)) && int(panels.size()) < max_intervals) {
    const detail::GKPanel<Scalar> worst = panels.top();
    const Scalar mid = (worst.a + worst.b) / 2;
    if (mid == worst.a || mid == worst.b) break;  // cannot split further
    panels.pop();
    const auto left = detail::gk15<Scalar>(f, worst.a, mid);
    const auto right = detail::gk15<Scalar>(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // re-sum to shed the drift of the running updates
  value = error = 0;
  out.intervals = static_cast<int>(panels.size());
  for (; !panels.empty(); panels.pop()) {
    value += panels.top().value;
    error += panels.top().error;
  }
  out.value = value;
  out.error = error;
  out.converged = error <= std::max(abs_tol, rel_tol * std::abs(value));
  return out;
}

}  // namespace odeco
