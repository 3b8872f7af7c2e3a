#pragma once

// General systems that are odeco after a linear change of variables x = P y.
// The tensor is fitted as A ≈ Σ_r w_r v_r^{∘(k-1)} ∘ u_r with the output
// factors tied to the input ones by U = (V^{-1})^T.

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "odeco/control.hpp"
#include "odeco/dynamics.hpp"
#include "odeco/parallel.hpp"

namespace odeco {

template <typename Scalar>
struct TransformModel {
  int order = 0;
  int dim = 0;
  Matrix<Scalar> V;        // input factors, columns scaled to max-abs entry +1
  Matrix<Scalar> Vf;       // output factors, (V^{-1})^T diag(weights)
  Vector<Scalar> weights;
  Scalar fit_error = std::numeric_limits<Scalar>::infinity();  // ‖A - Â‖_F
  Scalar input_norm{0};
  Matrix<Scalar> P;        // empty until build_transformation
  Matrix<Scalar> U;        // orthogonal target, P^T V = U

  Matrix<Scalar> dual() const { return V.transpose().fullPivLu().solve(Matrix<Scalar>::Identity(dim, dim)); }
  bool has_transformation() const { return P.size() > 0; }
};

struct FitOptions {
  int restarts = 20;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

namespace detail {

// Columns vec(v_r^{∘(k-1)} ∘ u_r) in the tensor's row-major layout.
template <typename Scalar>
Matrix<Scalar> structured_columns(const Matrix<Scalar>& V, const Matrix<Scalar>& W, int k) {
  const int n = static_cast<int>(V.rows());
  Matrix<Scalar> M(int_pow(n, k), n);
  for_each_index(k, n, [&](std::span<const int> idx, Eigen::Index off) {
    for (int r = 0; r < n; ++r) {
      Scalar p = W(idx[k - 1], r);
      for (int q = 0; q < k - 1; ++q) p *= V(idx[q], r);
      M(off, r) = p;
    }
  });
  return M;
}

// d(model)/dV(i, j) with w fixed, through both v_j and U = V^{-T}
// (dU = -U dV^T U).
template <typename Scalar>
Matrix<Scalar> structured_jacobian(const Matrix<Scalar>& V, const Matrix<Scalar>& W, const Vector<Scalar>& w, int k) {
  const int n = static_cast<int>(V.rows());
  Matrix<Scalar> J = Matrix<Scalar>::Zero(int_pow(n, k), n * n);
  Vector<Scalar> lead(n);
  for_each_index(k, n, [&](std::span<const int> idx, Eigen::Index off) {
    const int out = idx[k - 1];
    for (int r = 0; r < n; ++r) {
      Scalar p = w[r];
      for (int q = 0; q < k - 1; ++q) p *= V(idx[q], r);
      lead[r] = p;  // w_r Π v_r(i_q)
    }
    for (int j = 0; j < n; ++j) {
      for (int p = 0; p < k - 1; ++p) {
        Scalar prod = w[j] * W(out, j);
        for (int q = 0; q < k - 1; ++q)
          if (q != p) prod *= V(idx[q], j);
        J(off, j * n + idx[p]) += prod;
      }
      for (int i = 0; i < n; ++i) {
        Scalar s = 0;
        for (int r = 0; r < n; ++r) s += lead[r] * W(i, r);
        J(off, j * n + i) -= W(out, j) * s;
      }
    }
  });
  return J;
}

template <typename Scalar>
struct FitState {
  Matrix<Scalar> V, W;
  Vector<Scalar> w;
  Vector<Scalar> residual;
  Scalar cost = std::numeric_limits<Scalar>::infinity();
  bool ok = false;
};

template <typename Scalar>
FitState<Scalar> evaluate_fit(const Vector<Scalar>& a, Matrix<Scalar> V, int k) {
  FitState<Scalar> s;
  const int n = static_cast<int>(V.rows());
  for (int r = 0; r < n; ++r) {
    const Scalar nr = V.col(r).norm();
    if (!(nr > 0) || !std::isfinite(nr)) return s;
    V.col(r) /= nr;
  }
  Eigen::FullPivLU<Matrix<Scalar>> lu(V.transpose());
  if (lu.rcond() < Scalar(1e-12)) return s;
  s.W = lu.solve(Matrix<Scalar>::Identity(n, n));
  s.V = std::move(V);
  const Matrix<Scalar> M = structured_columns(s.V, s.W, k);
  s.w = M.colPivHouseholderQr().solve(a);
  s.residual = M * s.w - a;
  s.cost = s.residual.squaredNorm();
  s.ok = std::isfinite(s.cost);
  return s;
}

template <typename Scalar>
FitState<Scalar> fit_from(const Vector<Scalar>& a, Matrix<Scalar> V0, int k, int max_iter, Scalar target) {
  const int n = static_cast<int>(V0.rows());
  FitState<Scalar> cur = evaluate_fit(a, std::move(V0), k);
  if (!cur.ok) return cur;
  Scalar mu = Scalar(1e-3);
  int stalls = 0;
  for (int it = 0; it < max_iter && cur.cost > target * target; ++it) {
    const Matrix<Scalar> J = structured_jacobian(cur.V, cur.W, cur.w, k);
    const Matrix<Scalar> H = J.transpose() * J;
    const Vector<Scalar> g = J.transpose() * cur.residual;
    const Vector<Scalar> hd = H.diagonal().cwiseMax(Scalar(1e-12));
    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      Matrix<Scalar> Hm = H;
      Hm.diagonal() += mu * hd;
      const Vector<Scalar> delta = -Hm.ldlt().solve(g);
      Matrix<Scalar> V1 = cur.V + Eigen::Map<const Matrix<Scalar>>(delta.data(), n, n);
      FitState<Scalar> next = evaluate_fit(a, std::move(V1), k);
      if (next.ok && next.cost < cur.cost) {
        stalls = (cur.cost - next.cost) <= Scalar(1e-10) * cur.cost ? stalls + 1 : 0;
        cur = std::move(next);
        mu = std::max(mu / 3, Scalar(1e-12));
        accepted = true;
      } else {
        mu *= 4;
      }
    }
    if (!accepted || stalls >= 10) break;
  }
  return cur;
}

// Scale columns so the max-abs entry is +1, then order by weight
// (descending), ties by lexicographically larger column.
template <typename Scalar>
void canonicalize_model(Matrix<Scalar>& V, Vector<Scalar>& w, int k) {
  const int n = static_cast<int>(V.cols());
  for (int r = 0; r < n; ++r) {
    Eigen::Index imax = 0;
    V.col(r).cwiseAbs().maxCoeff(&imax);
    const Scalar m = V(imax, r);
    V.col(r) /= m;
    w[r] *= ipow(m, k - 2);
  }
  const Scalar tie = Scalar(1e-10) * std::max(Scalar(1), w.cwiseAbs().maxCoeff());
  auto before = [&](int x, int y) {
    if (std::abs(w[x] - w[y]) > tie) return w[x] > w[y];
    for (int i = 0; i < V.rows(); ++i)
      if (std::abs(V(i, x) - V(i, y)) > Scalar(1e-12)) return V(i, x) > V(i, y);
    return false;
  };
  std::vector<int> order(n);
  for (int r = 0; r < n; ++r) order[r] = r;
  for (int i = 1; i < n; ++i)
    for (int j = i; j > 0 && before(order[j], order[j - 1]); --j) std::swap(order[j], order[j - 1]);
  Matrix<Scalar> V2(V.rows(), n);
  Vector<Scalar> w2(n);
  for (int r = 0; r < n; ++r) {
    V2.col(r) = V.col(order[r]);
    w2[r] = w[order[r]];
  }
  V = std::move(V2);
  w = std::move(w2);
}

template <typename Scalar>
TransformModel<Scalar> assemble_model(const Tensor<Scalar>& A, Matrix<Scalar> V, Vector<Scalar> w) {
  TransformModel<Scalar> m;
  m.order = A.order();
  m.dim = A.dim();
  canonicalize_model(V, w, m.order);
  m.V = std::move(V);
  m.weights = std::move(w);
  const Matrix<Scalar> W = m.dual();
  m.Vf = W * m.weights.asDiagonal();
  m.fit_error = (structured_columns(m.V, W, m.order) * m.weights - A.entries()).norm();
  m.input_norm = A.norm();
  return m;
}

}  // namespace detail

/// Best structured fit over seeded restarts (run concurrently, selected by
/// (fit_error, restart index) so the result does not depend on threading).
template <typename Scalar>
TransformModel<Scalar> fit_structured_cpd(const AlmostSymTensor<Scalar>& A, const FitOptions& opts = {}) {
  const int n = A.dim(), k = A.order();
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "empty tensor");
  if (k < 3) throw Error(ErrorKind::UnsupportedOrder, "structured fit needs order >= 3");
  const Vector<Scalar> a = A.entries();
  const Scalar target = Scalar(1e-16) * std::max(Scalar(1), A.norm());

  const int restarts = std::max(1, opts.restarts);
  std::vector<detail::FitState<Scalar>> results(restarts);
  parallel_for(restarts, [&](int i) {
    std::mt19937_64 rng(opts.seed * 1000003u + static_cast<std::uint64_t>(i));
    std::normal_distribution<double> g;
    Matrix<Scalar> V0(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) V0(r, c) = Scalar(g(rng));
    if (i == 0) V0 = Matrix<Scalar>::Identity(n, n) + Scalar(0.1) * V0;
    results[i] = detail::fit_from(a, std::move(V0), k, opts.max_iter, target);
  });

  int best = -1;
  for (int i = 0; i < restarts; ++i)
    if (results[i].ok && (best < 0 || results[i].cost < results[best].cost)) best = i;
  if (best < 0) throw Error(ErrorKind::FitFailed, "every restart hit a singular factor matrix");
  return detail::assemble_model(A, results[best].V, results[best].w);
}

/// Algorithm-1 decision: fit_error <= epsilon·‖A‖ (or <= epsilon when
/// absolute). A failed fit counts as not transformable.
template <typename Scalar>
std::pair<bool, TransformModel<Scalar>> is_transformable(const AlmostSymTensor<Scalar>& A, Scalar epsilon = Scalar(1e-14),
                                                         bool absolute = false, const FitOptions& opts = {}) {
  TransformModel<Scalar> m;
  try {
    m = fit_structured_cpd(A, opts);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::FitFailed) throw;
    return {false, m};
  }
  const Scalar threshold = absolute ? epsilon : epsilon * m.input_norm;
  return {m.fit_error <= threshold, std::move(m)};
}

/// P = (U V^{-1})^T, i.e. the solution of V^T P = U^T.
template <typename Scalar>
TransformModel<Scalar> build_transformation(TransformModel<Scalar> m, const std::type_identity_t<Matrix<Scalar>>& U) {
  const int n = m.dim;
  if (U.rows() != n || U.cols() != n) throw Error(ErrorKind::DimensionMismatch, "target basis has the wrong shape");
  if ((U.transpose() * U - Matrix<Scalar>::Identity(n, n)).norm() > Scalar(1e-10))
    throw Error(ErrorKind::InvalidArgument, "target basis U is not orthogonal");
  Eigen::FullPivLU<Matrix<Scalar>> lu(m.V.transpose());
  if (!lu.isInvertible()) throw Error(ErrorKind::NotTransformable, "factor matrix V is singular");
  m.P = lu.solve(U.transpose());
  m.U = U;
  return m;
}

template <typename Scalar>
TransformModel<Scalar> build_transformation(TransformModel<Scalar> m) {
  const int n = m.dim;
  return build_transformation(std::move(m), Matrix<Scalar>(Matrix<Scalar>::Identity(n, n)));
}

/// Ã = Σ_r w_r (P^T v_r)^∘k as a certified decomposition (P^T V = U).
template <typename Scalar>
OdecoDecomposition<Scalar> transformed_decomposition(const TransformModel<Scalar>& m) {
  if (!m.has_transformation()) throw Error(ErrorKind::InvalidArgument, "build_transformation has not been applied");
  const Matrix<Scalar> PtV = m.P.transpose() * m.V;
  return decomposition_from_factors<Scalar>(odeco_tensor(m.weights, PtV, m.order), m.weights, PtV);
}

template <typename Scalar>
SymTensor<Scalar> transformed_tensor(const TransformModel<Scalar>& m) {
  if (!m.has_transformation()) throw Error(ErrorKind::InvalidArgument, "build_transformation has not been applied");
  return odeco_tensor(m.weights, Matrix<Scalar>(m.P.transpose() * m.V), m.order);
}

struct SolveGeneralOptions {
  double epsilon = 1e-12;
  bool absolute = false;
  bool allow_approximation = false;  // solve through the fitted model even above epsilon
  FitOptions fit{};
};

template <typename Scalar>
struct GeneralSolution {
  std::vector<Scalar> times;  // requested times that lie before any blow-up
  std::vector<Vector<Scalar>> states;
  std::optional<Scalar> blowup_time;
  TransformModel<Scalar> model;
  bool approximate = false;
};

namespace detail {

template <typename Scalar>
GeneralSolution<Scalar> solve_through(const TransformModel<Scalar>& m, const std::optional<Vector<Scalar>>& b,
                                      const Vector<Scalar>& x0, const std::vector<Scalar>& times) {
  GeneralSolution<Scalar> out;
  out.model = m;
  const OdecoDecomposition<Scalar> d = transformed_decomposition(m);
  Eigen::FullPivLU<Matrix<Scalar>> lu(m.P);
  const Vector<Scalar> y0 = lu.solve(x0);
  std::optional<Vector<Scalar>> bt;
  if (b) bt = lu.solve(*b);
  Scalar end;
  std::optional<ExplicitSolution<Scalar>> free;
  if (bt) {
    end = controlled_escape_time<Scalar>(d, *bt, y0);
  } else {
    free = explicit_solution<Scalar>(d, y0);
    end = free->domain_end;
  }
  if (std::isfinite(end)) out.blowup_time = end;
  for (Scalar t : times) {
    if (t < 0) throw Error(ErrorKind::InvalidArgument, "times must be non-negative");
    if (t >= end) break;
    const Vector<Scalar> y = free ? eval_solution(*free, t) : controlled_solution<Scalar>(d, *bt, y0, t);
    out.times.push_back(t);
    out.states.push_back(m.P * y);
  }
  return out;
}

}  // namespace detail

/// Fit, transform with the given target basis, solve the odeco system and
/// map back x = P y. Times at or past a blow-up are omitted and the blow-up
/// time is reported.
template <typename Scalar>
GeneralSolution<Scalar> solve_general(const AlmostSymTensor<Scalar>& A, const std::optional<Vector<Scalar>>& b,
                                      VectorCRef<Scalar> x0, const std::vector<Scalar>& times,
                                      const SolveGeneralOptions& opts = {}, std::optional<Matrix<Scalar>> U = std::nullopt) {
  if (x0.size() != A.dim()) throw Error(ErrorKind::DimensionMismatch, "initial state length does not match the system");
  if (b && b->size() != A.dim()) throw Error(ErrorKind::DimensionMismatch, "control length does not match the system");
  auto [flag, model] = is_transformable<Scalar>(A, Scalar(opts.epsilon), opts.absolute, opts.fit);
  if (!flag && !(opts.allow_approximation && model.V.size() > 0))
    throw Error(ErrorKind::NotTransformable,
                "no odeco transformation found (fit error " + std::to_string(model.fit_error) +
                    "); integrate the system numerically instead",
                double(model.fit_error));
  model = U ? build_transformation(std::move(model), *U) : build_transformation(std::move(model));
  GeneralSolution<Scalar> out = detail::solve_through<Scalar>(model, b, x0, times);
  out.approximate = !flag;
  return out;
}

using TransformModeld = TransformModel<double>;
using GeneralSolutiond = GeneralSolution<double>;

}  // namespace odeco
