#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "spanopt/hvp.hpp"

namespace spanopt {

struct RangeConfig {
  std::size_t l = 0;  // sketch width
  std::size_t q = 1;  // 2q+1 Hessian products are applied to the sketch
  std::size_t m = 0;  // target rank used for error accounting and λ
  /// QR between power steps. Unset means on for q >= 3.
  std::optional<bool> reorthonormalize;

  bool reorthonormalize_enabled() const noexcept { return reorthonormalize.value_or(q >= 3); }

  /// Shape checks needed by the kernels: 1 <= l <= d and m < l.
  void validate_shape(std::size_t d) const;
  /// Full error-bound regime: additionally m + 4 <= l.
  void validate(std::size_t d) const;
};

/// Orthonormal d x l basis U of H_B(x)^{2q+1}·Ω with Ω Gaussian. On a
/// rank-deficient sketch it retries with up to 3 fresh seeds.
DenseMatrix power_range(const Objective& objective, const BatchIndex& batch,
                        std::span<const double> x, const RangeConfig& rc, std::uint64_t seed,
                        const HvpMode& mode);

/// Smallest power exponent for which the approximation-error bound
/// ‖Ĥ_B − H_B‖ <= 3σ_{m+1} is guaranteed:
///   ceil( ½ · log_{3/2}( 34·√(l/(l−m)) + 16·√l/(l−m+1)·√(d−m) ) ).
/// Throws InvalidRankParams unless m <= l − 4 <= d − 4.
std::size_t min_power_iterations(std::size_t d, std::size_t l, std::size_t m);

}  // namespace spanopt
