#pragma once

// Golden systems and random generators shared by the test suites.

#include <cmath>
#include <random>
#include <vector>

#include "odeco/tensor.hpp"

namespace fixtures {

using odeco::Matrix;
using odeco::Vector;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Synthetic 2-D example: order 4, lambda = (-1, -2). The four-decimal slices
// are this tensor rounded to four decimals.
inline Mat synthetic_vectors() {
  Mat V(2, 2);
  V << std::sqrt(2.0) / 3, -std::sqrt(7.0) / 3,
       std::sqrt(7.0) / 3, std::sqrt(2.0) / 3;
  return V;
}

inline odeco::SymTensord synthetic_tensor() {
  return odeco::odeco_tensor(vec({-1.0, -2.0}), synthetic_vectors(), 4);
}

inline odeco::SymTensord synthetic_tensor_rounded() {
  // A_{::11}, A_{::12} (= A_{::21}), A_{::22}
  const double s11[2][2] = {{-1.2593, 0.5543}, {0.5543, -0.5185}};
  const double s12[2][2] = {{0.5543, -0.5185}, {-0.5185, -0.1386}};
  const double s22[2][2] = {{-0.5185, -0.1386}, {-0.1386, -0.7037}};
  Vec e(16);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) {
          const double v = (c == 0 && d == 0) ? s11[a][b] : (c == 1 && d == 1) ? s22[a][b] : s12[a][b];
          e[((a * 2 + b) * 2 + c) * 2 + d] = v;
        }
  return odeco::SymTensord(4, 2, e);
}

inline odeco::PolynomialSpecd synthetic_polynomial() {
  return {2, 3,
          {{{{3, 0}, -1.2593}, {{2, 1}, 1.6630}, {{1, 2}, -1.5554}, {{0, 3}, -0.1386}},
           {{{3, 0}, 0.5543}, {{2, 1}, -1.5554}, {{1, 2}, -0.4158}, {{0, 3}, -0.7037}}}};
}

// Two-species population model: v1 = (1,1)/sqrt2, v2 = (1,-1)/sqrt2, lambda = (2, 2), k = 4.
inline Mat population_vectors() {
  Mat V(2, 2);
  const double h = std::sqrt(2.0) / 2;
  V << h, h, h, -h;
  return V;
}

inline odeco::SymTensord population_tensor() {
  return odeco::odeco_tensor(vec({2.0, 2.0}), population_vectors(), 4);
}

// Three-species model with supply rates: k = 4, b = (2, 2, 2).
inline odeco::PolynomialSpecd supply_polynomial() {
  return {3, 3,
          {{{{3, 0, 0}, -1.0}, {{2, 1, 0}, -3.0}, {{1, 2, 0}, -3.0}},
           {{{0, 3, 0}, -1.0}},
           {{{0, 0, 3}, -1.0},
            {{2, 0, 1}, -3.0},
            {{1, 0, 2}, -3.0},
            {{0, 2, 1}, -3.0},
            {{0, 1, 2}, -3.0},
            {{1, 1, 1}, -6.0}}}};
}

inline Vec supply_control() { return vec({2.0, 2.0, 2.0}); }

inline Vec supply_equilibrium() { return vec({0.3275, 1.2599, 0.2297}); }

inline Mat supply_P() {
  Mat P(3, 3);
  P << 1, -1, 0, 0, 1, 0, -1, 0, 1;
  return P;
}

inline Mat supply_V() {
  Mat V(3, 3);
  V << 1, 0, 1, 1, 1, 1, 0, 0, 1;
  return V;
}

// ---------------------------------------------------------------------------

inline Mat random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  return Q;
}

inline Vec random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * g(rng);
  return v;
}

inline odeco::Tensord random_tensor(int k, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec e(odeco::detail::int_pow(n, k));
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = g(rng);
  return odeco::Tensord(k, n, e);
}

inline odeco::SymTensord random_symmetric(int k, int n, std::mt19937_64& rng) {
  return odeco::symmetrize(random_tensor(k, n, rng));
}

inline odeco::AlmostSymTensord random_almost_symmetric(int k, int n, std::mt19937_64& rng) {
  odeco::PolynomialSpecd spec = odeco::to_polynomial(random_tensor(k, n, rng));
  return odeco::from_polynomial(spec);
}

// Eigenvalues bounded away from zero and from each other.
inline Vec random_spectrum(int n, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Vec l(n);
  for (int i = 0; i < n; ++i) l[i] = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return l;
}

// Brute-force n^k contraction without any reshaping.
inline double naive_polyval(const odeco::Tensord& t, const Vec& x) {
  double s = 0;
  odeco::detail::for_each_index(t.order(), t.dim(), [&](std::span<const int> idx, Eigen::Index off) {
    double p = t.entries()[off];
    for (int j : idx) p *= x[j];
    s += p;
  });
  return s;
}

struct Structured {
  odeco::AlmostSymTensord A;
  Mat V;
  Vec w;
};

// A = Σ w_r v_r^{∘(k-1)} ∘ u_r with U = V^{-T}, V kept well conditioned.
inline Structured random_structured(int k, int n, std::mt19937_64& rng, bool stable = false) {
  Mat V = random_orthogonal(n, rng);
  std::uniform_real_distribution<double> s(0.5, 1.5);
  const Mat Q = random_orthogonal(n, rng);
  Vec sv(n);
  for (int i = 0; i < n; ++i) sv[i] = s(rng);
  V = V * sv.asDiagonal() * Q.transpose();
  Vec w = random_spectrum(n, rng);
  if (stable) w = -w.cwiseAbs();
  const Mat W = V.transpose().inverse();
  return {odeco::structured_cp_tensor(V, Mat(W * w.asDiagonal()), k), V, w};
}

}  // namespace fixtures
