#pragma once

// Closed-form trajectories and stability of x' = A x^{k-1} for odeco A.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "odeco/spectral.hpp"

namespace odeco {

template <typename Scalar>
struct ExplicitSolution {
  OdecoDecomposition<Scalar> decomposition;
  Vector<Scalar> alphas;
  int order = 0;
  Scalar domain_end = std::numeric_limits<Scalar>::infinity();
  std::vector<int> blowup_modes;  // lambda_r alpha_r^{k-2} > 0
};

enum class Verdict { stable, asymptotically_stable, unstable };
enum class StabilityBasis { modal_signs, global_even, unfolding };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::asymptotically_stable: return "asymptotically_stable";
    case Verdict::unstable: return "unstable";
  }
  return "unknown";
}

inline const char* to_string(StabilityBasis b) {
  switch (b) {
    case StabilityBasis::modal_signs: return "modal_signs";
    case StabilityBasis::global_even: return "global_even";
    case StabilityBasis::unfolding: return "unfolding";
  }
  return "unknown";
}

template <typename Scalar>
struct StabilityReport {
  Verdict verdict = Verdict::stable;
  Vector<Scalar> mode_products;  // lambda_r alpha_r^{k-2}, or lambda_r for global_even
  std::optional<Scalar> blowup_time;
  StabilityBasis basis = StabilityBasis::modal_signs;
};

struct EquilibriumStructure {
  bool unique_origin = true;
  std::vector<int> null_modes;  // 0-based
};

namespace detail {

inline void require_dynamic_order(int k) {
  if (k < 3) throw Error(ErrorKind::UnsupportedOrder, "closed form needs order >= 3 (order 2 is linear)");
}

template <typename Scalar>
Vector<Scalar> mode_products(const OdecoDecomposition<Scalar>& d, const Vector<Scalar>& alphas) {
  Vector<Scalar> p(alphas.size());
  for (Eigen::Index r = 0; r < alphas.size(); ++r) p[r] = d.eigenvalues[r] * ipow(alphas[r], d.order - 2);
  return p;
}

// Products this close to zero are taken as zero.
template <typename Scalar>
Scalar product_zero_tol(const OdecoDecomposition<Scalar>& d, Scalar x_norm) {
  return Scalar(1e-12) * std::max(Scalar(1), z_spectral_radius(d) * ipow(x_norm, d.order - 2));
}

template <typename Scalar>
Verdict verdict_from_signs(const Vector<Scalar>& p, Scalar zero_tol) {
  bool any_zero = false;
  for (Eigen::Index r = 0; r < p.size(); ++r) {
    if (p[r] > zero_tol) return Verdict::unstable;
    if (p[r] >= -zero_tol) any_zero = true;
  }
  return any_zero ? Verdict::stable : Verdict::asymptotically_stable;
}

}  // namespace detail

/// alpha = V^T x0.
template <typename Scalar>
Vector<Scalar> modal_coordinates(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> x0) {
  if (x0.size() != d.dim) throw Error(ErrorKind::DimensionMismatch, "initial state length does not match the system");
  return d.eigenvectors.transpose() * x0;
}

/// Refuses decompositions that are not certified: a non-odeco system has no
/// closed form here and must go through the transform module first.
template <typename Scalar>
ExplicitSolution<Scalar> explicit_solution(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> x0) {
  detail::require_dynamic_order(d.order);
  if (!d.certified())
    throw Error(ErrorKind::NotOdeco,
                "tensor is not odeco (residual " + std::to_string(d.residual) + "); use the transform pipeline",
                double(d.residual));
  ExplicitSolution<Scalar> sol;
  sol.decomposition = d;
  sol.order = d.order;
  sol.alphas = modal_coordinates(d, x0);
  const Vector<Scalar> p = detail::mode_products(d, sol.alphas);
  for (Eigen::Index r = 0; r < p.size(); ++r) {
    if (!(p[r] > 0)) continue;
    sol.blowup_modes.push_back(static_cast<int>(r));
    sol.domain_end = std::min(sol.domain_end, 1 / ((d.order - 2) * p[r]));
  }
  return sol;
}

/// x(t) = sum_r (1 - (k-2) lambda_r alpha_r^{k-2} t)^{-1/(k-2)} alpha_r v_r.
template <typename Scalar>
Vector<Scalar> eval_solution(const ExplicitSolution<Scalar>& sol, Scalar t) {
  if (!(t >= 0) || !(t < sol.domain_end))
    throw Error(ErrorKind::DomainViolation,
                "t = " + std::to_string(t) + " is outside the solution domain [0, " + std::to_string(sol.domain_end) + ")",
                double(sol.domain_end));
  const auto& d = sol.decomposition;
  const int m = sol.order - 2;
  Vector<Scalar> c = Vector<Scalar>::Zero(sol.alphas.size());
  for (Eigen::Index r = 0; r < c.size(); ++r) {
    const Scalar a = sol.alphas[r];
    if (a == 0) continue;
    const Scalar base = 1 - m * d.eigenvalues[r] * detail::ipow(a, m) * t;
    c[r] = a * std::pow(base, Scalar(-1) / m);
  }
  return d.eigenvectors * c;
}

/// Linear case: x(t) = sum_r exp(lambda_r t) alpha_r v_r.
template <typename Scalar>
Vector<Scalar> eval_solution_k2(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> x0, Scalar t) {
  if (d.order != 2) throw Error(ErrorKind::UnsupportedOrder, "exponential solution is for order 2 only");
  const Vector<Scalar> alpha = modal_coordinates(d, x0);
  return d.eigenvectors * (d.eigenvalues * t).array().exp().matrix().cwiseProduct(alpha);
}

template <typename Scalar>
EquilibriumStructure equilibrium_structure(const OdecoDecomposition<Scalar>& d) {
  EquilibriumStructure s;
  if (d.eigenvalues.size() == 0) return s;
  const Scalar tol = Scalar(1e-12) * std::max(Scalar(1), std::abs(d.eigenvalues[0]));
  for (Eigen::Index r = 0; r < d.eigenvalues.size(); ++r)
    if (std::abs(d.eigenvalues[r]) <= tol) s.null_modes.push_back(static_cast<int>(r));
  s.unique_origin = s.null_modes.empty();
  return s;
}

template <typename Scalar>
StabilityReport<Scalar> classify_stability(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> x0) {
  detail::require_dynamic_order(d.order);
  StabilityReport<Scalar> rep;
  rep.basis = StabilityBasis::modal_signs;
  const Vector<Scalar> alphas = modal_coordinates(d, x0);
  rep.mode_products = detail::mode_products(d, alphas);
  rep.verdict = detail::verdict_from_signs(rep.mode_products, detail::product_zero_tol(d, Scalar(x0.norm())));
  if (rep.verdict == Verdict::unstable) {
    Scalar end = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index r = 0; r < rep.mode_products.size(); ++r)
      if (rep.mode_products[r] > 0) end = std::min(end, 1 / ((d.order - 2) * rep.mode_products[r]));
    rep.blowup_time = end;
  }
  return rep;
}

/// Even order: the signs of lambda alone decide, for every x0.
template <typename Scalar>
StabilityReport<Scalar> classify_global_even(const OdecoDecomposition<Scalar>& d) {
  if (d.order < 4 || d.order % 2 != 0)
    throw Error(ErrorKind::UnsupportedOrder, "global classification needs even order >= 4");
  StabilityReport<Scalar> rep;
  rep.basis = StabilityBasis::global_even;
  rep.mode_products = d.eigenvalues;
  rep.verdict = detail::verdict_from_signs(rep.mode_products, detail::product_zero_tol(d, Scalar(1)));
  return rep;
}

/// Sufficient test from the psi-unfolding; empty when mu_max > 0.
template <typename Scalar>
std::optional<StabilityReport<Scalar>> classify_by_unfolding(const SymTensor<Scalar>& T) {
  if (T.order() < 4 || T.order() % 2 != 0)
    throw Error(ErrorKind::UnsupportedOrder, "unfolding bound needs even order >= 4");
  const Matrix<Scalar> psi = unfold_psi<Scalar>(T);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(psi, Eigen::EigenvaluesOnly);
  const Scalar mu = es.eigenvalues()[es.eigenvalues().size() - 1];
  const Scalar tol = Scalar(1e-12) * std::max(Scalar(1), psi.norm());
  if (mu > tol) return std::nullopt;
  StabilityReport<Scalar> rep;
  rep.basis = StabilityBasis::unfolding;
  rep.mode_products = Vector<Scalar>::Constant(1, mu);
  rep.verdict = mu < -tol ? Verdict::asymptotically_stable : Verdict::stable;
  return rep;
}

/// Strict test: every modal product negative.
template <typename Scalar>
bool in_region_of_attraction(const OdecoDecomposition<Scalar>& d, VectorCRef<Scalar> x) {
  detail::require_dynamic_order(d.order);
  const Vector<Scalar> p = detail::mode_products(d, modal_coordinates(d, x));
  return (p.array() < 0).all();
}

using ExplicitSolutiond = ExplicitSolution<double>;
using StabilityReportd = StabilityReport<double>;

}  // namespace odeco
