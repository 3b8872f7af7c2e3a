#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "odeco/error.hpp"

namespace odeco {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Non-deduced Ref parameters: Scalar comes from the tensor argument.
template <typename Scalar>
using VectorCRef = std::type_identity_t<Eigen::Ref<const Vector<Scalar>>>;
template <typename Scalar>
using MatrixCRef = std::type_identity_t<Eigen::Ref<const Matrix<Scalar>>>;

namespace detail {

inline Eigen::Index int_pow(int base, int exp) {
  Eigen::Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// Calls f(index, offset) for every multi-index in row-major order (last
/// index fastest). `index` is 0-based and reused between calls.
template <typename F>
void for_each_index(int order, int dim, F&& f) {
  std::vector<int> idx(order, 0);
  const Eigen::Index total = int_pow(dim, order);
  for (Eigen::Index off = 0; off < total; ++off) {
    f(std::span<const int>(idx), off);
    for (int p = order - 1; p >= 0; --p) {
      if (++idx[p] < dim) break;
      idx[p] = 0;
    }
  }
}

inline Eigen::Index offset_of(std::span<const int> idx, int dim) {
  Eigen::Index off = 0;
  for (int j : idx) off = off * dim + j;
  return off;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double multinomial(std::span<const int> exponents) {
  int total = 0;
  double denom = 1.0;
  for (int e : exponents) {
    total += e;
    denom *= factorial(e);
  }
  return factorial(total) / denom;
}

// Integer power that keeps the sign of negative bases.
template <typename Scalar>
Scalar ipow(Scalar x, int p) {
  Scalar r(1);
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

}  // namespace detail

/// Dense cubical tensor of order k and dimension n, stored as n^k entries
/// in row-major multi-index order (last index fastest). Indices are 0-based
/// here; file formats are 1-based.
template <typename Scalar>
class Tensor {
 public:
  Tensor(int order, int dim)
      : Tensor(order, dim, Vector<Scalar>::Zero(detail::int_pow(dim, order))) {}

  Tensor(int order, int dim, Vector<Scalar> entries)
      : order_(order), dim_(dim), entries_(std::move(entries)) {
    if (order < 1 || dim < 1)
      throw Error(ErrorKind::InvalidArgument, "tensor order and dimension must be positive");
    if (entries_.size() != detail::int_pow(dim, order))
      throw Error(ErrorKind::DimensionMismatch,
                  "tensor needs " + std::to_string(detail::int_pow(dim, order)) + " entries, got " +
                      std::to_string(entries_.size()));
  }

  int order() const noexcept { return order_; }
  int dim() const noexcept { return dim_; }
  Eigen::Index size() const noexcept { return entries_.size(); }
  const Vector<Scalar>& entries() const noexcept { return entries_; }

  Scalar operator()(std::span<const int> idx) const {
    return entries_[detail::offset_of(idx, dim_)];
  }
  Scalar operator()(std::initializer_list<int> idx) const {
    return (*this)(std::span<const int>(idx.begin(), idx.size()));
  }

  Scalar norm() const { return entries_.norm(); }

 private:
  int order_;
  int dim_;
  Vector<Scalar> entries_;
};

namespace detail {

// Average of the entries over every permutation of the index positions in
// [0, span). span == order gives full symmetrization, span == order-1 the
// almost-symmetric projection.
template <typename Scalar>
Vector<Scalar> orbit_average(const Tensor<Scalar>& t, int span) {
  const int k = t.order(), n = t.dim();
  Vector<Scalar> sum = Vector<Scalar>::Zero(t.size());
  std::vector<int> count(t.size(), 0);
  std::vector<Eigen::Index> canon(t.size());
  std::vector<int> sorted(k);
  for_each_index(k, n, [&](std::span<const int> idx, Eigen::Index off) {
    std::copy(idx.begin(), idx.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + span);
    const Eigen::Index c = offset_of(sorted, n);
    canon[off] = c;
    sum[c] += t.entries()[off];
    ++count[c];
  });
  Vector<Scalar> out(t.size());
  for (Eigen::Index off = 0; off < t.size(); ++off)
    out[off] = sum[canon[off]] / Scalar(count[canon[off]]);
  return out;
}

template <typename Scalar>
Vector<Scalar> checked_orbit_average(const Tensor<Scalar>& t, int span, const char* what) {
  Vector<Scalar> avg = orbit_average(t, span);
  const Scalar dev = (avg - t.entries()).cwiseAbs().maxCoeff();
  if (dev > Scalar(1e-10) * t.norm())
    throw Error(ErrorKind::NotSymmetric,
                std::string("tensor is not ") + what + " (max deviation " + std::to_string(double(dev)) +
                    "); symmetrize explicitly if intended");
  return avg;
}

}  // namespace detail

/// Tensor invariant under every permutation of its indices. Construction
/// rejects inputs deviating from their permutation average by more than
/// 1e-10·‖T‖; use symmetrize() to project arbitrary tensors.
template <typename Scalar>
class SymTensor : public Tensor<Scalar> {
 public:
  explicit SymTensor(const Tensor<Scalar>& t)
      : Tensor<Scalar>(t.order(), t.dim(), detail::checked_orbit_average(t, t.order(), "supersymmetric")) {}
  SymTensor(int order, int dim) : Tensor<Scalar>(order, dim) {}
  SymTensor(int order, int dim, Vector<Scalar> entries)
      : SymTensor(Tensor<Scalar>(order, dim, std::move(entries))) {}

 private:
  struct trusted {};
  SymTensor(trusted, int order, int dim, Vector<Scalar> entries)
      : Tensor<Scalar>(order, dim, std::move(entries)) {}
  template <typename S>
  friend SymTensor<S> symmetrize(const Tensor<S>&);
};

/// Tensor symmetric in its first k-1 modes: the carrier of a general
/// homogeneous system, one supersymmetric (k-1)-slice per state equation.
template <typename Scalar>
class AlmostSymTensor : public Tensor<Scalar> {
 public:
  explicit AlmostSymTensor(const Tensor<Scalar>& t)
      : Tensor<Scalar>(t.order(), t.dim(),
                       detail::checked_orbit_average(t, t.order() - 1, "almost symmetric")) {}
  AlmostSymTensor(int order, int dim) : Tensor<Scalar>(order, dim) {}
  AlmostSymTensor(int order, int dim, Vector<Scalar> entries)
      : AlmostSymTensor(Tensor<Scalar>(order, dim, std::move(entries))) {}
  AlmostSymTensor(const SymTensor<Scalar>& t) : Tensor<Scalar>(t) {}  // NOLINT: every supersymmetric tensor qualifies
};

template <typename Scalar>
SymTensor<Scalar> symmetrize(const Tensor<Scalar>& t) {
  if (t.order() < 1) throw Error(ErrorKind::InvalidArgument, "empty tensor");
  return SymTensor<Scalar>(typename SymTensor<Scalar>::trusted{}, t.order(), t.dim(),
                           detail::orbit_average(t, t.order()));
}

template <typename Scalar>
bool is_supersymmetric(const Tensor<Scalar>& t, Scalar rel_tol = Scalar(1e-10)) {
  const Vector<Scalar> avg = detail::orbit_average(t, t.order());
  return (avg - t.entries()).cwiseAbs().maxCoeff() <= rel_tol * t.norm();
}

/// Contracts the first `count` modes with x (mode 1 first). Returns the
/// remaining n^(k-count) entries in row-major order.
template <typename Scalar>
Vector<Scalar> contract_leading(const Tensor<Scalar>& t, VectorCRef<Scalar> x, int count) {
  const int n = t.dim();
  if (x.size() != n)
    throw Error(ErrorKind::DimensionMismatch,
                "vector length " + std::to_string(x.size()) + " does not match tensor dimension " + std::to_string(n));
  Vector<Scalar> y = t.entries();
  for (int p = 0; p < count; ++p) {
    const Eigen::Index rest = y.size() / n;
    Eigen::Map<const Matrix<Scalar>> slab(y.data(), rest, n);
    Vector<Scalar> next = slab * x;
    y.swap(next);
  }
  return y;
}

/// A x^(k-1): contracts modes 1..k-1, the last mode is the output mode.
template <typename Scalar>
Vector<Scalar> apply(const Tensor<Scalar>& t, VectorCRef<Scalar> x) {
  return contract_leading(t, x, t.order() - 1);
}

/// Full contraction T x^k.
template <typename Scalar>
Scalar polyval(const Tensor<Scalar>& t, VectorCRef<Scalar> x) {
  return x.dot(apply(t, x));
}

/// T x^(k-2) as an n-by-n matrix (requires k >= 2).
template <typename Scalar>
Matrix<Scalar> contract_to_matrix(const Tensor<Scalar>& t, VectorCRef<Scalar> x) {
  if (t.order() < 2) throw Error(ErrorKind::UnsupportedOrder, "matrix contraction needs order >= 2");
  const Vector<Scalar> y = contract_leading(t, x, t.order() - 2);
  return Eigen::Map<const Matrix<Scalar>>(y.data(), t.dim(), t.dim()).transpose();
}

template <typename Scalar>
Scalar frob_distance(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.order() != b.order() || a.dim() != b.dim())
    throw Error(ErrorKind::DimensionMismatch, "tensors differ in order or dimension");
  return (a.entries() - b.entries()).norm();
}

/// psi-unfolding of an even-order tensor A (order 2m) into an n^m square
/// matrix: entry A_{j1 i1 j2 i2 ... jm im} lands at row j1 + sum (j_p - 1) n^(p-1)
/// and column i1 + sum (i_p - 1) n^(p-1) (1-based).
template <typename Scalar>
Matrix<Scalar> unfold_psi(const Tensor<Scalar>& t) {
  if (t.order() % 2 != 0)
    throw Error(ErrorKind::UnsupportedOrder, "psi-unfolding needs an even order, got " + std::to_string(t.order()));
  const int m = t.order() / 2, n = t.dim();
  const Eigen::Index side = detail::int_pow(n, m);
  Matrix<Scalar> out(side, side);
  detail::for_each_index(t.order(), n, [&](std::span<const int> idx, Eigen::Index off) {
    Eigen::Index row = 0, col = 0, stride = 1;
    for (int p = 0; p < m; ++p) {
      row += idx[2 * p] * stride;
      col += idx[2 * p + 1] * stride;
      stride *= n;
    }
    out(row, col) = t.entries()[off];
  });
  return out;
}

/// v ∘ v ∘ ... ∘ v (k times).
template <typename Derived>
SymTensor<typename Derived::Scalar> outer_power(const Eigen::MatrixBase<Derived>& v, int k) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(v.size());
  Vector<Scalar> e(detail::int_pow(n, k));
  detail::for_each_index(k, n, [&](std::span<const int> idx, Eigen::Index off) {
    Scalar prod(1);
    for (int j : idx) prod *= v[j];
    e[off] = prod;
  });
  return symmetrize(Tensor<Scalar>(k, n, std::move(e)));
}

/// sum_r lambda_r v_r^∘k over the columns of V.
template <typename DerivedL, typename DerivedV>
SymTensor<typename DerivedV::Scalar> odeco_tensor(const Eigen::MatrixBase<DerivedL>& lambdas,
                                                  const Eigen::MatrixBase<DerivedV>& vectors, int k) {
  using Scalar = typename DerivedV::Scalar;
  const int n = static_cast<int>(vectors.rows());
  if (lambdas.size() != vectors.cols())
    throw Error(ErrorKind::DimensionMismatch, "one weight per column required");
  Vector<Scalar> e = Vector<Scalar>::Zero(detail::int_pow(n, k));
  for (Eigen::Index r = 0; r < vectors.cols(); ++r)
    e += lambdas[r] * outer_power(vectors.col(r), k).entries();
  return symmetrize(Tensor<Scalar>(k, n, std::move(e)));
}

/// sum_r v_r ∘ ... ∘ v_r ∘ f_r with k-1 copies of the columns of V and the
/// matching column of F in the last mode.
template <typename DerivedV, typename DerivedF>
AlmostSymTensor<typename DerivedV::Scalar> structured_cp_tensor(const Eigen::MatrixBase<DerivedV>& V,
                                                                const Eigen::MatrixBase<DerivedF>& F, int k) {
  using Scalar = typename DerivedV::Scalar;
  const int n = static_cast<int>(V.rows());
  if (F.rows() != V.rows() || F.cols() != V.cols())
    throw Error(ErrorKind::DimensionMismatch, "factor matrices differ in shape");
  Vector<Scalar> e = Vector<Scalar>::Zero(detail::int_pow(n, k));
  detail::for_each_index(k, n, [&](std::span<const int> idx, Eigen::Index off) {
    Scalar s(0);
    for (Eigen::Index r = 0; r < V.cols(); ++r) {
      Scalar prod = F(idx[k - 1], r);
      for (int p = 0; p + 1 < k; ++p) prod *= V(idx[p], r);
      s += prod;
    }
    e[off] = s;
  });
  return AlmostSymTensor<Scalar>(Tensor<Scalar>(k, n, std::move(e)));
}

// ---------------------------------------------------------------------------
// Polynomial <-> tensor conversion

template <typename Scalar>
struct Monomial {
  std::vector<int> exponents;
  Scalar coeff;
};

/// n homogeneous state equations of a common degree d = k-1.
template <typename Scalar>
struct PolynomialSpec {
  int dim = 0;
  int degree = 0;
  std::vector<std::vector<Monomial<Scalar>>> equations;
};

namespace detail {

using ExponentKey = std::vector<int>;

template <typename Scalar>
std::map<ExponentKey, Scalar, std::greater<>> monomial_table(int dim, int degree,
                                                             const std::vector<Monomial<Scalar>>& terms) {
  std::map<ExponentKey, Scalar, std::greater<>> table;
  for (const auto& m : terms) {
    if (static_cast<int>(m.exponents.size()) != dim)
      throw Error(ErrorKind::DimensionMismatch, "exponent vector length " + std::to_string(m.exponents.size()) +
                                                    " does not match dimension " + std::to_string(dim));
    int total = 0;
    for (int e : m.exponents) {
      if (e < 0) throw Error(ErrorKind::InvalidArgument, "negative exponent");
      total += e;
    }
    if (total != degree)
      throw Error(ErrorKind::DegreeMismatch,
                  "monomial of degree " + std::to_string(total) + " in a degree-" + std::to_string(degree) + " system");
    if (!table.emplace(m.exponents, m.coeff).second)
      throw Error(ErrorKind::InvalidArgument, "duplicate exponent vector in one equation");
  }
  return table;
}

inline void exponents_of(std::span<const int> idx, int dim, ExponentKey& out) {
  out.assign(dim, 0);
  for (int j : idx) ++out[j];
}

}  // namespace detail

/// Supersymmetric order-d tensor of a single degree-d form; each coefficient
/// is split evenly over the multinomially many index permutations.
template <typename Scalar>
SymTensor<Scalar> from_form(int dim, int degree, const std::vector<Monomial<Scalar>>& terms) {
  if (degree < 1) throw Error(ErrorKind::DegreeMismatch, "form degree must be at least 1");
  const auto table = detail::monomial_table(dim, degree, terms);
  Vector<Scalar> e = Vector<Scalar>::Zero(detail::int_pow(dim, degree));
  detail::ExponentKey key;
  detail::for_each_index(degree, dim, [&](std::span<const int> idx, Eigen::Index off) {
    detail::exponents_of(idx, dim, key);
    if (auto it = table.find(key); it != table.end()) e[off] = it->second / Scalar(detail::multinomial(key));
  });
  return SymTensor<Scalar>(degree, dim, std::move(e));
}

template <typename Scalar>
AlmostSymTensor<Scalar> from_polynomial(const PolynomialSpec<Scalar>& spec) {
  const int n = spec.dim, d = spec.degree;
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "dimension must be positive");
  if (d < 1) throw Error(ErrorKind::DegreeMismatch, "degree must be at least 1");
  if (static_cast<int>(spec.equations.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(n) + " equations, got " +
                                                  std::to_string(spec.equations.size()));
  const int k = d + 1;
  Vector<Scalar> e = Vector<Scalar>::Zero(detail::int_pow(n, k));
  detail::ExponentKey key;
  for (int i = 0; i < n; ++i) {
    const auto table = detail::monomial_table(n, d, spec.equations[i]);
    detail::for_each_index(d, n, [&](std::span<const int> idx, Eigen::Index off) {
      detail::exponents_of(idx, n, key);
      if (auto it = table.find(key); it != table.end())
        e[off * n + i] = it->second / Scalar(detail::multinomial(key));
    });
  }
  return AlmostSymTensor<Scalar>(k, n, std::move(e));
}

/// Inverse of from_polynomial. Coefficients are the sums of the slice
/// entries over each index orbit; terms with |coeff| <= drop_below are
/// omitted. Monomials come out in descending lexicographic exponent order.
template <typename Scalar>
PolynomialSpec<Scalar> to_polynomial(const Tensor<Scalar>& t, Scalar drop_below = Scalar(0)) {
  const int n = t.dim(), d = t.order() - 1;
  PolynomialSpec<Scalar> spec;
  spec.dim = n;
  spec.degree = d;
  spec.equations.resize(n);
  detail::ExponentKey key;
  for (int i = 0; i < n; ++i) {
    std::map<detail::ExponentKey, Scalar, std::greater<>> acc;
    detail::for_each_index(d, n, [&](std::span<const int> idx, Eigen::Index off) {
      detail::exponents_of(idx, n, key);
      acc[key] += t.entries()[off * n + i];
    });
    for (const auto& [exps, c] : acc)
      if (std::abs(c) > drop_below) spec.equations[i].push_back({exps, c});
  }
  return spec;
}

/// Inverse of from_form: the degree-k form T x^k as a monomial list.
template <typename Scalar>
std::vector<Monomial<Scalar>> to_form(const Tensor<Scalar>& t, Scalar drop_below = Scalar(0)) {
  std::map<detail::ExponentKey, Scalar, std::greater<>> acc;
  detail::ExponentKey key;
  detail::for_each_index(t.order(), t.dim(), [&](std::span<const int> idx, Eigen::Index off) {
    detail::exponents_of(idx, t.dim(), key);
    acc[key] += t.entries()[off];
  });
  std::vector<Monomial<Scalar>> out;
  for (const auto& [exps, c] : acc)
    if (std::abs(c) > drop_below) out.push_back({exps, c});
  return out;
}

/// Direct evaluation of the polynomial right-hand side.
template <typename Scalar>
Vector<Scalar> evaluate(const PolynomialSpec<Scalar>& spec, VectorCRef<Scalar> x) {
  Vector<Scalar> out = Vector<Scalar>::Zero(spec.dim);
  for (int i = 0; i < spec.dim; ++i)
    for (const auto& m : spec.equations[i]) {
      Scalar term = m.coeff;
      for (int j = 0; j < spec.dim; ++j) term *= detail::ipow(x[j], m.exponents[j]);
      out[i] += term;
    }
  return out;
}

using Tensord = Tensor<double>;
using SymTensord = SymTensor<double>;
using AlmostSymTensord = AlmostSymTensor<double>;
using PolynomialSpecd = PolynomialSpec<double>;

}  // namespace odeco
