#pragma once

#include <span>

#include "spanopt/linalg.hpp"
#include "spanopt/objectives.hpp"

namespace spanopt {

enum class HvpKind { FiniteDifference, Analytic };

struct HvpMode {
  HvpKind kind = HvpKind::FiniteDifference;
  /// Step h = fd_scale·√ε·(1 + ‖x‖).
  double fd_scale = 1.0;
  /// Central difference by default; false gives the one-sided rule
  /// (g(x + h·v̂) − g(x))·‖v‖/h, i.e. C = 1/h.
  bool central = true;

  void validate() const;
};

/// H_B(x)·v from gradient differences along v̂ = v/‖v‖ (or exactly, in
/// analytic mode). Returns zero for v = 0 without touching the objective.
Vector hvp(const Objective& objective, const BatchIndex& batch, std::span<const double> x,
           std::span<const double> v, const HvpMode& mode);

/// Column-wise hvp over V (d x l) with one batch for every column: H_B(x)·V.
DenseMatrix extended_hvp(const Objective& objective, const BatchIndex& batch,
                         std::span<const double> x, const DenseMatrix& v, const HvpMode& mode);

}  // namespace spanopt
