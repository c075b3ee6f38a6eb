#include "spanopt/span_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "spanopt/error.hpp"
#include "spanopt/random.hpp"

namespace spanopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Stream tags for derive_seed.
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kSketchStream = 2;
constexpr std::uint64_t kProbeStream = 3;

}  // namespace

Subspace subspace_from_basis(DenseMatrix basis, DenseMatrix image, std::size_t m) {
  if (basis.rows() != image.rows() || basis.cols() != image.cols()) {
    throw Error(Errc::DimensionMismatch, "subspace: U and Z shapes differ");
  }
  if (m >= basis.cols()) throw Error(Errc::InvalidRankParams, "subspace: need m < l");

  Subspace s;
  DenseMatrix zt_u = matmul_tn(image, basis);
  s.small_block = DenseMatrix(zt_u.rows(), zt_u.cols());
  for (std::size_t i = 0; i < zt_u.rows(); ++i)
    for (std::size_t j = 0; j < zt_u.cols(); ++j)
      s.small_block(i, j) = 0.5 * (zt_u(i, j) + zt_u(j, i));

  s.block_eigenvalues = sym_eig_small(s.small_block).values;
  const double smallest = s.block_eigenvalues.back();
  if (!(smallest > 0.0)) {
    throw Error(Errc::IndefiniteBlock,
                "subspace: ZᵀU has eigenvalue " + std::to_string(smallest) + " <= 0");
  }
  s.lambda_min = 0.5 * smallest;
  s.sigma_proxy_m1 = s.block_eigenvalues[m];
  s.lambda = std::min(s.lambda_min, s.sigma_proxy_m1);
  s.basis = std::move(basis);
  s.image = std::move(image);
  return s;
}

Subspace build_subspace(const Objective& objective, const BatchIndex& batch,
                        std::span<const double> x, const RangeConfig& rc, std::uint64_t seed,
                        const HvpMode& mode) {
  DenseMatrix u = power_range(objective, batch, x, rc, seed, mode);
  DenseMatrix z = extended_hvp(objective, batch, x, u, mode);
  return subspace_from_basis(std::move(u), std::move(z), rc.m);
}

Vector apply_inverse(const Subspace& s, std::span<const double> g) {
  if (g.size() != s.basis.rows()) throw Error(Errc::DimensionMismatch, "apply_inverse: g length");
  const Vector coeff = matvec_t(s.basis, g);
  const Vector inner = solve_small(s.small_block, coeff);
  Vector out(g.begin(), g.end());
  axpy(-1.0, matvec(s.basis, coeff), out);  // (I − UUᵀ)g
  scale(1.0 / s.lambda, out);
  axpy(1.0, matvec(s.basis, inner), out);
  return out;
}

Vector apply_approximation(const Subspace& s, std::span<const double> v,
                           const LinearOperator& hvp_fn) {
  const Vector pv = matvec(s.basis, matvec_t(s.basis, v));
  const Vector hpv = hvp_fn(pv);
  Vector out = matvec(s.basis, matvec_t(s.basis, hpv));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s.lambda * (v[i] - pv[i]);
  return out;
}

double hessian_error_probe(const Subspace& s, const Objective& objective, const BatchIndex& batch,
                           std::span<const double> x, const HvpMode& mode, std::uint64_t seed,
                           double tol) {
  const LinearOperator h = [&](std::span<const double> v) {
    return hvp(objective, batch, x, v, mode);
  };
  const LinearOperator diff = [&](std::span<const double> v) {
    Vector out = apply_approximation(s, v, h);
    axpy(-1.0, h(v), out);
    return out;
  };
  // Finite-difference products carry relative noise near 1e-8 of ‖H_B‖.
  const double floor = s.block_eigenvalues.empty() ? 0.0 : 1e-7 * std::abs(s.block_eigenvalues.front());
  return spectral_norm_sym(diff, objective.dim(), tol, seed, 20000, floor);
}

// ---------------------------------------------------------------------------
// Step sizes and configuration

void StepSize::validate() const {
  switch (kind) {
    case Kind::Constant:
      if (!(constant > 0.0)) throw Error(Errc::InvalidArgument, "eta must be positive");
      break;
    case Kind::Schedule:
      if (schedule.empty()) throw Error(Errc::InvalidArgument, "eta schedule is empty");
      for (double e : schedule)
        if (!(e > 0.0)) throw Error(Errc::InvalidArgument, "eta schedule entries must be positive");
      break;
    case Kind::Auto:
      break;
  }
}

double StepSize::at(std::size_t t, const Subspace& s) const {
  switch (kind) {
    case Kind::Constant: return constant;
    case Kind::Schedule: return schedule[std::min(t, schedule.size() - 1)];
    case Kind::Auto: {
      const double proxy = s.block_eigenvalues.back();
      const double denom = 96.0 * s.lambda_min - 16.0 * proxy;
      return denom > 0.0 ? proxy / denom : 1.0;
    }
  }
  return constant;
}

void SpanConfig::validate(std::size_t d, std::size_t n_terms) const {
  range().validate(d);
  const std::size_t b = effective_batch(n_terms);
  if (b == 0 || b > n_terms) {
    throw Error(Errc::BatchTooLarge, "span: batch size " + std::to_string(b) + " not in [1, N]");
  }
  eta.validate();
  hvp.validate();
  if (!(grad_tol >= 0.0)) throw Error(Errc::InvalidArgument, "span: grad_tol must be >= 0");
}

// ---------------------------------------------------------------------------
// Driver

SpanState make_span_state(const Objective& objective, std::span<const double> x0) {
  SpanState st;
  st.x.assign(x0.begin(), x0.end());
  st.grad = objective.gradient(st.x);
  return st;
}

SpanStepResult span_step(const SpanState& state, const Objective& objective, const SpanConfig& cfg) {
  const auto start = Clock::now();
  const std::size_t n = objective.num_terms();

  BatchIndex batch;
  if (cfg.effective_batch(n) == n) {
    batch = objective.full_batch();
  } else {
    Rng rng(derive_seed(cfg.seed, state.t, kBatchStream));
    batch = sample_batch(n, cfg.effective_batch(n), rng);
  }

  SpanStepResult out;
  out.subspace = build_subspace(objective, batch, state.x, cfg.range(),
                                derive_seed(cfg.seed, state.t, kSketchStream), cfg.hvp);
  out.eta = cfg.eta.at(state.t, out.subspace);

  const Vector direction = apply_inverse(out.subspace, state.grad);
  out.state.x = state.x;
  axpy(-out.eta, direction, out.state.x);
  if (!all_finite(out.state.x)) throw Error(Errc::NonFiniteResult, "span: iterate diverged");
  out.state.grad = objective.gradient(out.state.x);
  out.state.t = state.t + 1;
  out.state.elapsed_s = state.elapsed_s + seconds_since(start);

  // Diagnostics below are not part of the timed work.
  out.record.iteration = out.state.t;
  out.record.wall_clock_s = out.state.elapsed_s;
  out.record.loss = objective.loss(out.state.x);
  out.record.grad_norm = norm2(out.state.grad);
  out.record.lambda_used = out.subspace.lambda;
  if (cfg.probe_hessian_error) {
    out.record.hessian_err = hessian_error_probe(out.subspace, objective, batch, state.x, cfg.hvp,
                                                 derive_seed(cfg.seed, state.t, kProbeStream));
  }
  return out;
}

RunResult run_span(const SpanConfig& cfg, const Objective& objective, std::span<const double> x0) {
  if (x0.size() != objective.dim()) throw Error(Errc::DimensionMismatch, "run_span: x0 length");
  cfg.validate(objective.dim(), objective.num_terms());

  RunResult result;
  SpanState state = make_span_state(objective, x0);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cfg.grad_tol > 0.0 && norm2(state.grad) <= cfg.grad_tol) break;
    SpanStepResult step = span_step(state, objective, cfg);
    result.trace.push_back(step.record);
    state = std::move(step.state);
  }
  result.x = std::move(state.x);
  return result;
}

std::size_t recommended_batch_size(double k_bound, double eps, std::size_t l, std::size_t m,
                                   double d, std::size_t n) {
  if (!(k_bound > 0.0) || !(eps > 0.0) || !(d > 0.0) || n == 0 || m >= l) {
    throw Error(Errc::InvalidArgument, "recommended_batch_size: arguments must be positive, m < l");
  }
  const double expr = 16.0 * k_bound * k_bound / (eps * eps) *
                      (static_cast<double>(l - m) + std::log(2.0 * d));
  // The relative nudge keeps values that are integral up to rounding (e.g. 80 +
  // 1 ulp from log) from being bumped to the next integer.
  const double capped = std::min(expr, static_cast<double>(n)) * (1.0 - 1e-12);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(capped)));
}

}  // namespace spanopt
