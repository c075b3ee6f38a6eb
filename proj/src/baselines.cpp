#include "spanopt/baselines.hpp"

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

constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kLissaStream = 4;
constexpr std::uint64_t kScaleStream = 5;

BatchIndex draw_batch(const Objective& objective, std::size_t b, Rng& rng) {
  const std::size_t n = objective.num_terms();
  return b == n ? objective.full_batch() : sample_batch(n, b, rng);
}

TraceRecord make_record(const Objective& objective, std::size_t iteration, double elapsed,
                        std::span<const double> x, std::span<const double> grad) {
  TraceRecord r;
  r.iteration = iteration;
  r.wall_clock_s = elapsed;
  r.loss = objective.loss(x);
  r.grad_norm = norm2(grad);
  return r;
}

void check_start(const BaselineConfig& cfg, const Objective& objective, std::span<const double> x0) {
  if (x0.size() != objective.dim()) throw Error(Errc::DimensionMismatch, "baseline: x0 length");
  cfg.validate(objective.dim(), objective.num_terms());
}

}  // namespace

BaselineMethod parse_baseline_method(std::string_view name) {
  if (name == "gd") return BaselineMethod::GradientDescent;
  if (name == "svrg") return BaselineMethod::Svrg;
  if (name == "newsamp") return BaselineMethod::NewSamp;
  if (name == "lissa") return BaselineMethod::Lissa;
  throw Error(Errc::ConfigError, "unknown baseline method '" + std::string(name) + "'");
}

std::string_view baseline_method_name(BaselineMethod method) noexcept {
  switch (method) {
    case BaselineMethod::GradientDescent: return "gd";
    case BaselineMethod::Svrg: return "svrg";
    case BaselineMethod::NewSamp: return "newsamp";
    case BaselineMethod::Lissa: return "lissa";
  }
  return "unknown";
}

std::size_t BaselineConfig::effective_batch(std::size_t n_terms) const {
  if (batch_size) return *batch_size;
  return method == BaselineMethod::NewSamp ? n_terms : 1;
}

void BaselineConfig::validate(std::size_t d, std::size_t n_terms) const {
  // A zero step is accepted for gradient descent only (a no-op run).
  const bool eta_ok = method == BaselineMethod::GradientDescent ? eta >= 0.0 : eta > 0.0;
  if (!eta_ok || !std::isfinite(eta)) throw Error(Errc::InvalidArgument, "baseline: bad eta");
  if (method == BaselineMethod::GradientDescent) return;
  const std::size_t b = effective_batch(n_terms);
  if (b == 0 || b > n_terms) {
    throw Error(Errc::BatchTooLarge, "baseline: batch size " + std::to_string(b) + " not in [1, N]");
  }
  if (method == BaselineMethod::NewSamp && (rank_m == 0 || rank_m >= d)) {
    throw Error(Errc::InvalidRankParams, "newsamp: need 0 < m < d");
  }
  if (method == BaselineMethod::Lissa) {
    if (inner_steps == 0 || repetitions == 0) {
      throw Error(Errc::InvalidArgument, "lissa: inner_steps and repetitions must be positive");
    }
    if (!(lissa_margin > 1.0)) throw Error(Errc::InvalidArgument, "lissa: margin must exceed 1");
  }
  hvp.validate();
  if (!(grad_tol >= 0.0)) throw Error(Errc::InvalidArgument, "baseline: grad_tol must be >= 0");
}

// ---------------------------------------------------------------------------
// Gradient descent

RunResult run_gd(const BaselineConfig& cfg, const Objective& objective, std::span<const double> x0) {
  check_start(cfg, objective, x0);
  RunResult result;
  result.x.assign(x0.begin(), x0.end());
  Vector grad = objective.gradient(result.x);
  double elapsed = 0.0;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cfg.grad_tol > 0.0 && norm2(grad) <= cfg.grad_tol) break;
    const auto start = Clock::now();
    axpy(-cfg.eta, grad, result.x);
    grad = objective.gradient(result.x);
    elapsed += seconds_since(start);
    result.trace.push_back(make_record(objective, t + 1, elapsed, result.x, grad));
  }
  return result;
}

// ---------------------------------------------------------------------------
// SVRG

Vector svrg_estimator(const Objective& objective, const BatchIndex& batch,
                      std::span<const double> w, std::span<const double> snapshot,
                      std::span<const double> snapshot_grad) {
  Vector g = objective.batch_gradient(batch, w);
  axpy(-1.0, objective.batch_gradient(batch, snapshot), g);
  axpy(1.0, snapshot_grad, g);
  return g;
}

RunResult run_svrg(const BaselineConfig& cfg, const Objective& objective, std::span<const double> x0) {
  check_start(cfg, objective, x0);
  const std::size_t n = objective.num_terms();
  const std::size_t b = cfg.effective_batch(n);
  const std::size_t inner = cfg.inner_steps > 0 ? cfg.inner_steps : (n + b - 1) / b;

  RunResult result;
  Vector snapshot(x0.begin(), x0.end());
  Vector snapshot_grad = objective.gradient(snapshot);
  double elapsed = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.iterations; ++epoch) {
    if (cfg.grad_tol > 0.0 && norm2(snapshot_grad) <= cfg.grad_tol) break;
    const auto start = Clock::now();
    Rng rng(derive_seed(cfg.seed, epoch, kBatchStream));
    Vector w = snapshot;
    for (std::size_t k = 0; k < inner; ++k) {
      const BatchIndex batch = draw_batch(objective, b, rng);
      axpy(-cfg.eta, svrg_estimator(objective, batch, w, snapshot, snapshot_grad), w);
    }
    if (!all_finite(w)) throw Error(Errc::NonFiniteResult, "svrg: iterate diverged");
    snapshot = std::move(w);
    snapshot_grad = objective.gradient(snapshot);
    elapsed += seconds_since(start);
    result.trace.push_back(make_record(objective, epoch + 1, elapsed, snapshot, snapshot_grad));
  }
  result.x = std::move(snapshot);
  return result;
}

// ---------------------------------------------------------------------------
// NewSamp

TruncatedInverse::TruncatedInverse(const DenseMatrix& hessian, std::size_t m)
    : eig_(sym_eig_small(hessian)), m_(m) {
  if (m >= hessian.rows()) throw Error(Errc::InvalidRankParams, "truncated inverse: need m < d");
  if (!(eig_.values[m_] > 0.0)) {
    throw Error(Errc::IndefiniteBlock, "truncated inverse: σ_{m+1} <= 0");
  }
}

Vector TruncatedInverse::apply(std::span<const double> g) const {
  const double inv_floor = 1.0 / floor();
  Vector out(g.begin(), g.end());
  scale(inv_floor, out);
  for (std::size_t i = 0; i < m_; ++i) {
    double proj = 0.0;
    for (std::size_t r = 0; r < g.size(); ++r) proj += eig_.vectors(r, i) * g[r];
    const double coeff = (1.0 / eig_.values[i] - inv_floor) * proj;
    for (std::size_t r = 0; r < g.size(); ++r) out[r] += coeff * eig_.vectors(r, i);
  }
  return out;
}

DenseMatrix TruncatedInverse::approximation() const {
  const std::size_t d = eig_.vectors.rows();
  DenseMatrix out = floor() * DenseMatrix::identity(d);
  for (std::size_t i = 0; i < m_; ++i) {
    const double w = eig_.values[i] - floor();
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) out(r, c) += w * eig_.vectors(r, i) * eig_.vectors(c, i);
  }
  return out;
}

DenseMatrix TruncatedInverse::inverse() const {
  const std::size_t d = eig_.vectors.rows();
  DenseMatrix out(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    Vector e(d, 0.0);
    e[c] = 1.0;
    out.set_column(c, apply(e));
  }
  return out;
}

double TruncatedInverse::approximation_error() const { return floor() - eig_.values.back(); }

RunResult run_newsamp(const BaselineConfig& cfg, const Objective& objective,
                      std::span<const double> x0) {
  check_start(cfg, objective, x0);
  const std::size_t b = cfg.effective_batch(objective.num_terms());

  RunResult result;
  result.x.assign(x0.begin(), x0.end());
  Vector grad = objective.gradient(result.x);
  double elapsed = 0.0;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cfg.grad_tol > 0.0 && norm2(grad) <= cfg.grad_tol) break;
    const auto start = Clock::now();
    Rng rng(derive_seed(cfg.seed, t, kBatchStream));
    const BatchIndex batch = draw_batch(objective, b, rng);
    const TruncatedInverse inv(objective.dense_hessian(batch, result.x), cfg.rank_m);
    axpy(-cfg.eta, inv.apply(grad), result.x);
    if (!all_finite(result.x)) throw Error(Errc::NonFiniteResult, "newsamp: iterate diverged");
    grad = objective.gradient(result.x);
    elapsed += seconds_since(start);
    TraceRecord rec = make_record(objective, t + 1, elapsed, result.x, grad);
    if (cfg.probe_hessian_error) rec.hessian_err = inv.approximation_error();
    result.trace.push_back(rec);
  }
  return result;
}

// ---------------------------------------------------------------------------
// LiSSA

Vector lissa_recursion(const std::function<Vector(std::span<const double>, std::size_t)>& hvp_step,
                       std::span<const double> g, std::size_t inner_steps) {
  Vector u(g.begin(), g.end());
  for (std::size_t j = 1; j <= inner_steps; ++j) {
    const Vector hu = hvp_step(u, j);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = g[i] + u[i] - hu[i];
    const double un = norm2(u);
    if (!(un <= 1e8)) {
      throw Error(Errc::DivergingSeries, "lissa: ‖u_" + std::to_string(j) + "‖ exceeds 1e8");
    }
  }
  return u;
}

double lissa_scale(const Objective& objective, std::span<const double> x0, double margin,
                   std::uint64_t seed) {
  const BatchIndex full = objective.full_batch();
  const LinearOperator h = [&](std::span<const double> v) { return objective.exact_hvp(full, x0, v); };
  const double probe = spectral_norm_sym(h, objective.dim(), 1e-6, derive_seed(seed, kScaleStream));
  return margin * std::max(probe, objective.max_term_curvature());
}

Vector lissa_direction(const Objective& objective, std::span<const double> x,
                       std::span<const double> g, const BaselineConfig& cfg, double scale_factor,
                       std::uint64_t seed) {
  const std::size_t b = cfg.effective_batch(objective.num_terms());
  Vector total(g.size(), 0.0);
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    Rng rng(derive_seed(seed, r, kLissaStream));
    const auto step = [&](std::span<const double> v, std::size_t) {
      const BatchIndex batch = draw_batch(objective, b, rng);
      Vector hv = hvp(objective, batch, x, v, cfg.hvp);
      scale(1.0 / scale_factor, hv);
      return hv;
    };
    axpy(1.0, lissa_recursion(step, g, cfg.inner_steps), total);
  }
  // The recursion inverts H / s; undo the scaling and average.
  scale(1.0 / (scale_factor * static_cast<double>(cfg.repetitions)), total);
  return total;
}

DenseMatrix lissa_inverse_operator(const Objective& objective, std::span<const double> x,
                                   const BaselineConfig& cfg, double scale_factor,
                                   std::uint64_t seed) {
  const std::size_t d = objective.dim();
  DenseMatrix out(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    Vector e(d, 0.0);
    e[c] = 1.0;
    out.set_column(c, lissa_direction(objective, x, e, cfg, scale_factor, seed));
  }
  return out;
}

double implied_hessian_error(const DenseMatrix& inverse_estimate, const DenseMatrix& hessian) {
  const DenseMatrix implied = solve_small(inverse_estimate, DenseMatrix::identity(hessian.rows()));
  return spectral_norm_dense(implied - hessian);
}

RunResult run_lissa(const BaselineConfig& cfg, const Objective& objective,
                    std::span<const double> x0) {
  check_start(cfg, objective, x0);
  RunResult result;
  result.x.assign(x0.begin(), x0.end());
  double elapsed = 0.0;
  auto start = Clock::now();
  const double s = lissa_scale(objective, x0, cfg.lissa_margin, cfg.seed);
  Vector grad = objective.gradient(result.x);
  elapsed += seconds_since(start);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    if (cfg.grad_tol > 0.0 && norm2(grad) <= cfg.grad_tol) break;
    start = Clock::now();
    const std::uint64_t step_seed = derive_seed(cfg.seed, t, kLissaStream);
    const Vector x_t = result.x;
    axpy(-cfg.eta, lissa_direction(objective, x_t, grad, cfg, s, step_seed), result.x);
    if (!all_finite(result.x)) throw Error(Errc::NonFiniteResult, "lissa: iterate diverged");
    grad = objective.gradient(result.x);
    elapsed += seconds_since(start);
    TraceRecord rec = make_record(objective, t + 1, elapsed, result.x, grad);
    if (cfg.probe_hessian_error) {
      const DenseMatrix inv = lissa_inverse_operator(objective, x_t, cfg, s, step_seed);
      rec.hessian_err = implied_hessian_error(inv, objective.dense_hessian(objective.full_batch(), x_t));
    }
    result.trace.push_back(rec);
  }
  return result;
}

RunResult run_baseline(const BaselineConfig& cfg, const Objective& objective,
                       std::span<const double> x0) {
  switch (cfg.method) {
    case BaselineMethod::GradientDescent: return run_gd(cfg, objective, x0);
    case BaselineMethod::Svrg: return run_svrg(cfg, objective, x0);
    case BaselineMethod::NewSamp: return run_newsamp(cfg, objective, x0);
    case BaselineMethod::Lissa: return run_lissa(cfg, objective, x0);
  }
  throw Error(Errc::InvalidArgument, "unknown baseline");
}

}  // namespace spanopt
