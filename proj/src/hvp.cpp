#include "spanopt/hvp.hpp"

#include <cmath>
#include <limits>

#include "spanopt/error.hpp"
#include "spanopt/parallel.hpp"

namespace spanopt {

void HvpMode::validate() const {
  if (!(fd_scale > 0.0) || !std::isfinite(fd_scale)) {
    throw Error(Errc::InvalidArgument, "hvp: fd_scale must be positive");
  }
}

Vector hvp(const Objective& objective, const BatchIndex& batch, std::span<const double> x,
           std::span<const double> v, const HvpMode& mode) {
  const std::size_t d = objective.dim();
  if (x.size() != d || v.size() != d) throw Error(Errc::DimensionMismatch, "hvp: x or v length");
  if (!all_finite(v)) throw Error(Errc::InvalidArgument, "hvp: non-finite direction");

  const double vnorm = norm2(v);
  if (vnorm == 0.0) return Vector(d, 0.0);

  Vector out;
  if (mode.kind == HvpKind::Analytic) {
    out = objective.exact_hvp(batch, x, v);
  } else {
    mode.validate();
    const double h = mode.fd_scale * std::sqrt(std::numeric_limits<double>::epsilon()) *
                     (1.0 + norm2(x));
    Vector plus(x.begin(), x.end());
    axpy(h / vnorm, v, plus);
    out = objective.batch_gradient(batch, plus);
    if (mode.central) {
      Vector minus(x.begin(), x.end());
      axpy(-h / vnorm, v, minus);
      const Vector g_minus = objective.batch_gradient(batch, minus);
      axpy(-1.0, g_minus, out);
      scale(vnorm / (2.0 * h), out);
    } else {
      const Vector g0 = objective.batch_gradient(batch, x);
      axpy(-1.0, g0, out);
      scale(vnorm / h, out);
    }
  }
  if (!all_finite(out)) throw Error(Errc::NonFiniteResult, "hvp: non-finite product");
  return out;
}

DenseMatrix extended_hvp(const Objective& objective, const BatchIndex& batch,
                         std::span<const double> x, const DenseMatrix& v, const HvpMode& mode) {
  if (v.rows() != objective.dim()) throw Error(Errc::DimensionMismatch, "extended_hvp: V rows");
  DenseMatrix out(v.rows(), v.cols());
  parallel_for(v.cols(), [&](std::size_t j) {
    const Vector col = v.column(j);
    out.set_column(j, hvp(objective, batch, x, col, mode));
  });
  return out;
}

}  // namespace spanopt
