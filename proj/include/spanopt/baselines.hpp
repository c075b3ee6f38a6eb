#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>

#include "spanopt/hvp.hpp"
#include "spanopt/trace.hpp"

namespace spanopt {

enum class BaselineMethod { GradientDescent, Svrg, NewSamp, Lissa };

BaselineMethod parse_baseline_method(std::string_view name);
std::string_view baseline_method_name(BaselineMethod method) noexcept;

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::GradientDescent;
  double eta = 1.0;
  std::size_t iterations = 10;  // T: steps for gd/newsamp/lissa, epochs for svrg
  /// Sample count per stochastic quantity. Unset picks the method default:
  /// 1 for svrg and lissa, the full dataset for newsamp.
  std::optional<std::size_t> batch_size;
  std::size_t rank_m = 10;       // newsamp
  std::size_t inner_steps = 0;   // svrg: 0 means ceil(N / b); lissa: recursion depth
  std::size_t repetitions = 1;   // lissa s1
  double lissa_margin = 1.25;
  std::uint64_t seed = 0;
  double grad_tol = 0.0;
  HvpMode hvp{HvpKind::Analytic};
  bool probe_hessian_error = false;

  std::size_t effective_batch(std::size_t n_terms) const;
  void validate(std::size_t d, std::size_t n_terms) const;
};

RunResult run_gd(const BaselineConfig& cfg, const Objective& objective, std::span<const double> x0);
RunResult run_svrg(const BaselineConfig& cfg, const Objective& objective, std::span<const double> x0);
RunResult run_newsamp(const BaselineConfig& cfg, const Objective& objective,
                      std::span<const double> x0);
RunResult run_lissa(const BaselineConfig& cfg, const Objective& objective,
                    std::span<const double> x0);
RunResult run_baseline(const BaselineConfig& cfg, const Objective& objective,
                       std::span<const double> x0);

/// g_B(w) − g_B(snapshot) + ∇F(snapshot).
Vector svrg_estimator(const Objective& objective, const BatchIndex& batch,
                      std::span<const double> w, std::span<const double> snapshot,
                      std::span<const double> snapshot_grad);

/// Rank-m truncated inverse of a symmetric positive matrix:
///   Ĥ⁻¹ = σ_{m+1}⁻¹·I + Σ_{i<=m} (σ_i⁻¹ − σ_{m+1}⁻¹)·u_i·u_iᵀ.
class TruncatedInverse {
 public:
  /// Throws IndefiniteBlock if σ_{m+1} <= 0, InvalidRankParams unless m < d.
  TruncatedInverse(const DenseMatrix& hessian, std::size_t m);

  Vector apply(std::span<const double> g) const;
  /// Ĥ = Σ_{i<=m} σ_i·u_i·u_iᵀ + σ_{m+1}·(I − Σ_{i<=m} u_i·u_iᵀ).
  DenseMatrix approximation() const;
  DenseMatrix inverse() const;
  /// ‖Ĥ − H‖ = σ_{m+1} − σ_d, exact because Ĥ and H share eigenvectors.
  double approximation_error() const;
  double floor() const noexcept { return eig_.values[m_]; }

 private:
  EigenPairs eig_;
  std::size_t m_;
};

/// One Neumann-series estimate of H⁻¹g for ‖H‖ < 1:
///   u_0 = g,  u_j = g + u_{j−1} − H_j·u_{j−1},  j = 1..inner_steps,
/// where hvp_step(v, j) returns the j-th (possibly stochastic) product H_j·v.
/// Throws DivergingSeries if ‖u_j‖ exceeds 1e8.
Vector lissa_recursion(const std::function<Vector(std::span<const double>, std::size_t)>& hvp_step,
                       std::span<const double> g, std::size_t inner_steps);

/// Curvature scale s such that ‖H_i / s‖ < 1 along the path: margin times the
/// larger of a spectral probe of ∇²F(x0) and the per-term curvature bound.
double lissa_scale(const Objective& objective, std::span<const double> x0, double margin,
                   std::uint64_t seed);

/// Averaged (over cfg.repetitions) LiSSA estimate of H⁻¹g at x; the sample
/// sequence is fixed by `seed`, so the map g ↦ estimate is linear.
Vector lissa_direction(const Objective& objective, std::span<const double> x,
                       std::span<const double> g, const BaselineConfig& cfg, double scale,
                       std::uint64_t seed);

/// The d x d matrix realized by lissa_direction for a fixed seed.
DenseMatrix lissa_inverse_operator(const Objective& objective, std::span<const double> x,
                                   const BaselineConfig& cfg, double scale, std::uint64_t seed);

/// ‖A⁻¹ − H‖₂ for an inverse-Hessian estimate A.
double implied_hessian_error(const DenseMatrix& inverse_estimate, const DenseMatrix& hessian);

}  // namespace spanopt
