#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spanopt/hvp.hpp"
#include "spanopt/rangefinder.hpp"
#include "spanopt/trace.hpp"

namespace spanopt {

/// Per-iteration state of the projected approximation
///   Ĥ_B = U·Uᵀ·H_B·U·Uᵀ + λ·(I − U·Uᵀ),
/// kept in factored form so that Ĥ_B⁻¹ is applied in O(d·l + l³).
struct Subspace {
  DenseMatrix basis;          // U, d x l, orthonormal columns
  DenseMatrix image;          // Z = H_B(x)·U
  DenseMatrix small_block;    // (ZᵀU + UᵀZ)/2
  Vector block_eigenvalues;   // eigenvalues of small_block, non-increasing
  double lambda = 0.0;
  double lambda_min = 0.0;      // ½·σ_min(ZᵀU)
  double sigma_proxy_m1 = 0.0;  // σ_{m+1}(ZᵀU)
};

/// Completes a Subspace from a basis and its Hessian image. λ is
/// min(λ_min, σ_{m+1}(ZᵀU)). Throws IndefiniteBlock if ZᵀU has an eigenvalue <= 0.
Subspace subspace_from_basis(DenseMatrix basis, DenseMatrix image, std::size_t m);

Subspace build_subspace(const Objective& objective, const BatchIndex& batch,
                        std::span<const double> x, const RangeConfig& rc, std::uint64_t seed,
                        const HvpMode& mode);

/// Ĥ_B⁻¹·g = U·(ZᵀU)⁻¹·Uᵀg + λ⁻¹·(g − U·Uᵀg).
Vector apply_inverse(const Subspace& s, std::span<const double> g);

/// Ĥ_B·v, the forward operator matching apply_inverse, using `hvp_fn` for H_B.
Vector apply_approximation(const Subspace& s, std::span<const double> v,
                           const LinearOperator& hvp_fn);

/// ‖Ĥ_B − H_B‖ estimated by power iteration on the matrix-free difference
/// v ↦ P·H_B·P·v + λ(v − P·v) − H_B·v with P = U·Uᵀ.
double hessian_error_probe(const Subspace& s, const Objective& objective, const BatchIndex& batch,
                           std::span<const double> x, const HvpMode& mode,
                           std::uint64_t seed = 0, double tol = 1e-6);

/// Step-size schedule: a constant, a per-iteration list (last entry repeats),
/// or the auto heuristic η_t = s/(96·λ_min − 16·s) with s = σ_min(ZᵀU) standing
/// in for the unobservable smallest Hessian eigenvalue.
struct StepSize {
  enum class Kind { Constant, Schedule, Auto };
  Kind kind = Kind::Constant;
  double constant = 1.0;
  std::vector<double> schedule;

  static StepSize fixed(double eta) { return {Kind::Constant, eta, {}}; }
  static StepSize from_list(std::vector<double> etas) { return {Kind::Schedule, 0.0, std::move(etas)}; }
  static StepSize automatic() { return {Kind::Auto, 0.0, {}}; }

  void validate() const;
  double at(std::size_t t, const Subspace& s) const;
};

struct SpanConfig {
  std::size_t iterations = 10;  // T
  std::size_t m = 10;
  std::size_t l = 16;
  std::size_t q = 1;
  std::optional<bool> reorthonormalize;
  std::size_t batch_size = 0;  // 0 = full batch
  StepSize eta = StepSize::fixed(1.0);
  std::uint64_t seed = 0;
  double grad_tol = 0.0;
  HvpMode hvp;
  bool probe_hessian_error = false;

  RangeConfig range() const { return {l, q, m, reorthonormalize}; }
  std::size_t effective_batch(std::size_t n_terms) const {
    return batch_size == 0 ? n_terms : batch_size;
  }
  /// m + 4 <= l <= d, 1 <= b <= N, positive step sizes.
  void validate(std::size_t d, std::size_t n_terms) const;
};

struct SpanState {
  Vector x;
  Vector grad;  // ∇F(x), carried over so each step evaluates it once
  std::size_t t = 0;
  double elapsed_s = 0.0;
};

SpanState make_span_state(const Objective& objective, std::span<const double> x0);

struct SpanStepResult {
  SpanState state;
  TraceRecord record;
  Subspace subspace;
  double eta = 0.0;
};

/// One iteration: sample B, build the subspace at x_t, and move along
/// −η_t·Ĥ_B⁻¹·∇F(x_t) using the full gradient.
SpanStepResult span_step(const SpanState& state, const Objective& objective, const SpanConfig& cfg);

/// Runs up to cfg.iterations steps, stopping early once ‖∇F‖ <= grad_tol
/// (0 disables the check).
RunResult run_span(const SpanConfig& cfg, const Objective& objective, std::span<const double> x0);

/// Batch size that makes the sub-sampled Hessian ε-accurate with probability
/// 1 − e^{m−l}: ceil(min{16K²/ε²·(l − m + log 2d), N}), at least 1.
std::size_t recommended_batch_size(double k_bound, double eps, std::size_t l, std::size_t m,
                                   double d, std::size_t n);

}  // namespace spanopt
