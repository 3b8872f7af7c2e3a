#pragma once

#include <optional>
#include <string>

#include "odeco/tensor.hpp"

namespace odeco {

/// x' = A x^{k-1} (+ b). A only has to be symmetric in its first k-1 modes.
template <typename Scalar>
struct HPDSystem {
  AlmostSymTensor<Scalar> tensor;
  std::optional<Vector<Scalar>> control;

  explicit HPDSystem(AlmostSymTensor<Scalar> a, std::optional<Vector<Scalar>> b = std::nullopt)
      : tensor(std::move(a)), control(std::move(b)) {
    if (control && control->size() != tensor.dim())
      throw Error(ErrorKind::DimensionMismatch, "control has length " + std::to_string(control->size()) +
                                                    ", tensor dimension is " + std::to_string(tensor.dim()));
  }

  int order() const { return tensor.order(); }
  int dim() const { return tensor.dim(); }

  Vector<Scalar> rhs(VectorCRef<Scalar> x) const {
    Vector<Scalar> f = apply<Scalar>(tensor, x);
    if (control) f += *control;
    return f;
  }
};

using HPDSystemd = HPDSystem<double>;

}  // namespace odeco
