#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>

#include "odeco/tensor.hpp"

namespace odeco {

/// Real (lambda, v) with T v^(k-1) = lambda v, ‖v‖ = 1.
template <typename Scalar>
struct ZEigenPair {
  Scalar value{0};
  Vector<Scalar> vector;
  bool converged = false;
  int iterations = 0;
  Scalar residual = std::numeric_limits<Scalar>::infinity();
};

/// T ≈ sum_r lambda_r v_r^∘k with orthonormal v_r, eigenvalues descending.
template <typename Scalar>
struct OdecoDecomposition {
  int order = 0;
  int dim = 0;
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;  // columns v_r
  Scalar residual{0};           // ‖T - sum lambda_r v_r^∘k‖_F
  Scalar input_norm{0};
  Scalar certification_tol{1e-8};

  bool certified() const { return residual <= certification_tol; }
  SymTensor<Scalar> reconstruct() const { return odeco_tensor(eigenvalues, eigenvectors, order); }
};

struct DecomposeOptions {
  int restarts = 30;
  int max_iter = 500;
  std::uint64_t seed = 0;
  double stage_tol = -1;  // <= 0: 1e-10 * max(1, ‖T‖)
};

namespace detail {

template <typename Scalar>
Scalar min_eigenvalue(const Matrix<Scalar>& H) {
  if (H.rows() == 1) return H(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

/// Shifted symmetric power iteration on the restriction of T to span(B)
/// (B has orthonormal columns). direction = +1 climbs T x^k, -1 descends.
/// Each step uses the shift alpha = max(min_shift, tau - (k-1) lambda_min(
/// direction * B^T T x^(k-2) B)), which makes the shifted objective locally
/// convex so the step is monotone; a failed monotonicity check doubles it.
template <typename Scalar>
ZEigenPair<Scalar> restricted_power(const Tensor<Scalar>& T, const Matrix<Scalar>& B, int direction,
                                    Scalar min_shift, Vector<Scalar> z, Scalar tol, int max_iter) {
  const int k = T.order();
  const Scalar tau(1e-6);
  const Scalar sgn(direction);
  ZEigenPair<Scalar> out;
  z.normalize();

  auto objective = [&](const Vector<Scalar>& zz) { return sgn * polyval(T, Vector<Scalar>(B * zz)); };

  for (int it = 0;; ++it) {
    const Vector<Scalar> x = B * z;
    const Vector<Scalar> g = B.transpose() * apply(T, x);
    const Scalar lambda = z.dot(g);
    out.value = lambda;
    out.vector = x;
    out.iterations = it;
    out.residual = (g - lambda * z).norm();
    if (out.residual <= tol) {
      out.converged = true;
      break;
    }
    if (it >= max_iter) break;

    const Matrix<Scalar> H = Scalar(k - 1) * sgn * (B.transpose() * contract_to_matrix(T, x) * B);
    Scalar alpha = std::max(min_shift, tau - min_eigenvalue(H));
    alpha = std::max(alpha, Scalar(0));
    const Scalar f0 = sgn * lambda;
    Vector<Scalar> next;
    for (int attempt = 0; attempt < 8; ++attempt) {
      next = (sgn * g + alpha * z).normalized();
      if (objective(next) >= f0 - Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (std::abs(f0) + 1)) break;
      alpha = 2 * alpha + std::abs(lambda) + 1;
    }
    if (!next.allFinite()) break;
    z = next;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> complement_basis(const Matrix<Scalar>& found, int n) {
  if (found.cols() == 0) return Matrix<Scalar>::Identity(n, n);
  Eigen::HouseholderQR<Matrix<Scalar>> qr(found);
  const Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(n, n);
  return Q.rightCols(n - found.cols());
}

// Flip each v_r so its first non-negligible entry is positive; for odd k the
// flip negates lambda_r. Then sort descending, ties broken by lexicographic
// order of the canonical vectors (larger first).
template <typename Scalar>
void canonicalize(Vector<Scalar>& lambdas, Matrix<Scalar>& V, int k) {
  const Eigen::Index n = V.cols();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      if (std::abs(V(i, r)) > Scalar(1e-12)) {
        if (V(i, r) < 0) {
          V.col(r) = -V.col(r);
          if (k % 2 == 1) lambdas[r] = -lambdas[r];
        }
        break;
      }
    }
  }
  const Scalar scale = std::max(Scalar(1), lambdas.size() ? lambdas.cwiseAbs().maxCoeff() : Scalar(0));
  const Scalar tie = Scalar(1e-10) * scale;
  auto before = [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(lambdas[a] - lambdas[b]) > tie) return lambdas[a] > lambdas[b];
    for (Eigen::Index i = 0; i < V.rows(); ++i)
      if (V(i, a) != V(i, b)) return V(i, a) > V(i, b);
    return false;
  };
  std::vector<Eigen::Index> perm(n);
  for (Eigen::Index r = 0; r < n; ++r) perm[r] = r;
  for (Eigen::Index i = 1; i < n; ++i)  // insertion sort: tolerant comparator
    for (Eigen::Index j = i; j > 0 && before(perm[j], perm[j - 1]); --j) std::swap(perm[j], perm[j - 1]);
  Vector<Scalar> l2(n);
  Matrix<Scalar> V2(V.rows(), n);
  for (Eigen::Index r = 0; r < n; ++r) {
    l2[r] = lambdas[perm[r]];
    V2.col(r) = V.col(perm[r]);
  }
  lambdas = std::move(l2);
  V = std::move(V2);
}

template <typename Scalar>
OdecoDecomposition<Scalar> assemble(const Tensor<Scalar>& T, Vector<Scalar> lambdas, Matrix<Scalar> V, Scalar tol) {
  canonicalize(lambdas, V, T.order());
  OdecoDecomposition<Scalar> d;
  d.order = T.order();
  d.dim = T.dim();
  d.eigenvalues = std::move(lambdas);
  d.eigenvectors = std::move(V);
  d.input_norm = T.norm();
  d.residual = frob_distance(T, Tensor<Scalar>(d.reconstruct()));
  d.certification_tol = tol;
  return d;
}

/// Decomposition attempt that never throws; the flag reports whether every
/// deflation stage converged.
template <typename Scalar>
std::pair<OdecoDecomposition<Scalar>, bool> decompose_attempt(const Tensor<Scalar>& T, Scalar tol,
                                                              const DecomposeOptions& opts) {
  const int k = T.order(), n = T.dim();
  if (k < 2) throw Error(ErrorKind::UnsupportedOrder, "decomposition needs order >= 2");

  if (k == 2) {
    Matrix<Scalar> M = Eigen::Map<const Matrix<Scalar>>(T.entries().data(), n, n);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(M);
    return {assemble(T, Vector<Scalar>(es.eigenvalues()), Matrix<Scalar>(es.eigenvectors()), tol), true};
  }

  const Scalar stage_tol =
      opts.stage_tol > 0 ? Scalar(opts.stage_tol) : Scalar(1e-10) * std::max(Scalar(1), T.norm());
  Vector<Scalar> lambdas(n);
  Matrix<Scalar> found(n, 0);
  Tensor<Scalar> deflated = T;
  bool all_converged = true;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss;

  for (int stage = 0; stage < n; ++stage) {
    const Matrix<Scalar> B = complement_basis(found, n);
    const int m = static_cast<int>(B.cols());
    ZEigenPair<Scalar> best;
    bool have_converged = false;
    for (int start = 0; start < opts.restarts; ++start) {
      Vector<Scalar> z0(m);
      for (int i = 0; i < m; ++i) z0[i] = Scalar(gauss(rng));
      if (z0.norm() == 0) z0[0] = 1;
      for (int direction : {1, -1}) {
        if (direction < 0 && k % 2 == 1) continue;  // odd order: descent mirrors ascent
        ZEigenPair<Scalar> p = restricted_power(deflated, B, direction, Scalar(0), z0, stage_tol, opts.max_iter);
        const bool better = p.converged
                                ? (!have_converged || std::abs(p.value) > std::abs(best.value))
                                : (!have_converged && p.residual < best.residual);
        if (better) {
          have_converged = have_converged || p.converged;
          best = std::move(p);
        }
      }
    }
    all_converged = all_converged && have_converged;
    lambdas[stage] = best.value;
    found.conservativeResize(n, stage + 1);
    found.col(stage) = best.vector.normalized();
    const Vector<Scalar> v = found.col(stage);
    deflated = Tensor<Scalar>(k, n, deflated.entries() - best.value * outer_power(v, k).entries());
  }
  return {assemble(T, std::move(lambdas), std::move(found), tol), all_converged};
}

}  // namespace detail

/// Shifted power iteration for one Z-eigenpair from `init`. The sign of
/// `shift` picks the variant (>= 0 climbs towards large eigenvalues, < 0
/// descends towards small ones); its magnitude is a floor on the adaptive
/// shift. Non-convergence is reported through the flag, not thrown.
template <typename Scalar>
ZEigenPair<Scalar> z_eigenpair(const Tensor<Scalar>& T, Scalar shift, VectorCRef<Scalar> init, Scalar tol,
                               int max_iter) {
  if (T.order() < 2) throw Error(ErrorKind::UnsupportedOrder, "Z-eigenpairs need order >= 2");
  if (init.size() != T.dim()) throw Error(ErrorKind::DimensionMismatch, "initial vector has wrong length");
  if (!(init.norm() > 0)) throw Error(ErrorKind::InvalidArgument, "initial vector must be nonzero");
  if (!(tol > 0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
  const Matrix<Scalar> I = Matrix<Scalar>::Identity(T.dim(), T.dim());
  return detail::restricted_power(T, I, shift < 0 ? -1 : 1, std::abs(shift), Vector<Scalar>(init), tol, max_iter);
}

/// Orthogonal decomposition by deflation: each stage keeps the largest-|lambda|
/// converged pair over seeded random restarts, searching in the orthogonal
/// complement of the vectors already accepted. `tol` certifies the result
/// (residual <= tol). Throws DecompositionFailed, carrying the reconstruction
/// residual, when a stage exhausts its restarts without converging.
template <typename Scalar>
OdecoDecomposition<Scalar> odeco_decompose(const SymTensor<Scalar>& T, Scalar tol = Scalar(1e-8),
                                           const DecomposeOptions& opts = {}) {
  auto [d, ok] = detail::decompose_attempt<Scalar>(T, tol, opts);
  if (!ok)
    throw Error(ErrorKind::DecompositionFailed,
                "power iteration stagnated; best reconstruction residual " + std::to_string(double(d.residual)),
                double(d.residual));
  return d;
}

/// (certified, residual). Failure of the decomposition maps to false.
template <typename Scalar>
std::pair<bool, Scalar> is_odeco(const SymTensor<Scalar>& T, Scalar tol, const DecomposeOptions& opts = {}) {
  auto [d, ok] = detail::decompose_attempt<Scalar>(T, tol, opts);
  return {ok && d.residual <= tol, d.residual};
}

/// Decomposition built from known factors (no search); V must be orthonormal.
template <typename Scalar>
OdecoDecomposition<Scalar> decomposition_from_factors(const Tensor<Scalar>& T, Vector<Scalar> lambdas,
                                                      Matrix<Scalar> V, Scalar tol = Scalar(1e-8)) {
  if (V.rows() != T.dim() || V.cols() != T.dim() || lambdas.size() != T.dim())
    throw Error(ErrorKind::DimensionMismatch, "factor shapes do not match the tensor");
  return detail::assemble(T, std::move(lambdas), std::move(V), tol);
}

template <typename Scalar>
Scalar z_spectral_radius(const OdecoDecomposition<Scalar>& d) {
  if (d.eigenvalues.size() == 0) return Scalar(0);
  return std::max(std::abs(d.eigenvalues[0]), std::abs(d.eigenvalues[d.eigenvalues.size() - 1]));
}

/// Largest eigenvalue of the psi-unfolding; an upper bound on every
/// Z-eigenvalue of an even-order supersymmetric tensor.
template <typename Scalar>
Scalar mu_max(const SymTensor<Scalar>& T) {
  const Matrix<Scalar> M = unfold_psi<Scalar>(T);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[es.eigenvalues().size() - 1];
}

using OdecoDecompositiond = OdecoDecomposition<double>;
using ZEigenPaird = ZEigenPair<double>;

}  // namespace odeco
