#include "spanopt/rangefinder.hpp"

#include <cmath>
#include <string>

#include "spanopt/error.hpp"
#include "spanopt/random.hpp"

namespace spanopt {

void RangeConfig::validate_shape(std::size_t d) const {
  if (l == 0 || l > d) {
    throw Error(Errc::InvalidRankParams,
                "range: need 1 <= l <= d (l=" + std::to_string(l) + ", d=" + std::to_string(d) + ")");
  }
  if (m >= l) throw Error(Errc::InvalidRankParams, "range: need m < l");
}

void RangeConfig::validate(std::size_t d) const {
  validate_shape(d);
  if (m + 4 > l) throw Error(Errc::InvalidRankParams, "range: need m + 4 <= l");
}

DenseMatrix power_range(const Objective& objective, const BatchIndex& batch,
                        std::span<const double> x, const RangeConfig& rc, std::uint64_t seed,
                        const HvpMode& mode) {
  const std::size_t d = objective.dim();
  rc.validate_shape(d);
  constexpr int kRetries = 3;
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t sketch_seed = attempt == 0 ? seed : derive_seed(seed, 0x5e5a, attempt);
    try {
      DenseMatrix y = gaussian_matrix(d, rc.l, sketch_seed);
      const std::size_t products = 2 * rc.q + 1;
      for (std::size_t j = 1; j <= products; ++j) {
        y = extended_hvp(objective, batch, x, y, mode);
        if (rc.reorthonormalize_enabled() && j < products) y = qr_orthonormal(y);
      }
      return qr_orthonormal(y);
    } catch (const Error& e) {
      if (e.code() != Errc::RankDeficient || attempt >= kRetries) throw;
    }
  }
}

std::size_t min_power_iterations(std::size_t d, std::size_t l, std::size_t m) {
  if (l < 4 || m + 4 > l || l > d) {
    throw Error(Errc::InvalidRankParams, "min_power_iterations: need m <= l - 4 <= d - 4");
  }
  const double dl = static_cast<double>(l);
  const double dm = static_cast<double>(m);
  const double dd = static_cast<double>(d);
  const double arg = 34.0 * std::sqrt(dl / (dl - dm)) +
                     16.0 * std::sqrt(dl) / (dl - dm + 1.0) * std::sqrt(dd - dm);
  const double q = 0.5 * std::log(arg) / std::log(1.5);
  return static_cast<std::size_t>(std::ceil(q));
}

}  // namespace spanopt
